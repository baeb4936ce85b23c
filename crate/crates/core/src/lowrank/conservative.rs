//! Moment-preserving truncation of 1D1V low-rank matrices.
//!
//! `f` is split as `f = f1 + f2` where `f1` is the weighted orthogonal
//! projection onto `span{1, v, v^2}` (rescaled by `w`) and carries the mass,
//! current and kinetic-energy densities exactly, while `f2` has zero moments.
//! Only `f2` is compressed, in the weighted norm, so the truncated result
//! keeps all three densities of `f`.

use nalgebra::{DMatrix, DVector};

use super::{LowRankMatrix, Moments1D};
use crate::error::{check_len, Result};
use crate::grid::VelocityWeights;
use crate::linalg::scale_rows;

/// Which moments the projection preserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectorLevel {
    /// Mass only (`span{1}`).
    Mass,
    /// Mass and momentum (`span{1, v}`).
    MassMomentum,
    /// Mass, momentum and kinetic energy (`span{1, v, v^2}`).
    Full,
}

impl ProjectorLevel {
    pub fn from_index(level: u8) -> Option<Self> {
        match level {
            1 => Some(Self::Mass),
            2 => Some(Self::MassMomentum),
            3 => Some(Self::Full),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Mass => 1,
            Self::MassMomentum => 2,
            Self::Full => 3,
        }
    }

    pub fn basis_size(self) -> usize {
        self.index() as usize
    }
}

/// Weighted-orthogonal conservation basis `{1, v, v^2 - c}` on one velocity
/// axis, with `c = <1, v^2>_w / <1, 1>_w` and norms `c1, c2, c3`.
#[derive(Debug, Clone)]
pub struct VBasis1D {
    level: ProjectorLevel,
    c: f64,
    norms: [f64; 3],
    vectors: [DVector<f64>; 3],
    weights: VelocityWeights,
}

impl VBasis1D {
    pub fn new(weights: &VelocityWeights, level: ProjectorLevel) -> Result<Self> {
        let axis = weights.axis();
        let one = axis.ones();
        let v = axis.points().clone();
        let v2 = v.map(|x| x * x);
        let c = weights.inner_w(&one, &v2)? / weights.inner_w(&one, &one)?;
        let shifted = v2.map(|x| x - c);
        let norms = [
            weights.norm_w(&one)?,
            weights.norm_w(&v)?,
            weights.norm_w(&shifted)?,
        ];
        Ok(Self {
            level,
            c,
            norms,
            vectors: [one, v, shifted],
            weights: weights.clone(),
        })
    }

    pub fn level(&self) -> ProjectorLevel {
        self.level
    }

    /// Orthogonalization constant `c`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// `[||1||_w, ||v||_w, ||v^2 - c||_w]`.
    pub fn norms(&self) -> [f64; 3] {
        self.norms
    }

    /// Basis vectors in use at this level.
    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors[..self.level.basis_size()]
    }

    pub fn weights(&self) -> &VelocityWeights {
        &self.weights
    }

    /// Projection coefficients `M_k` from the moments.
    fn coefficients(&self, m: &Moments1D) -> Vec<DVector<f64>> {
        let [c1, c2, c3] = self.norms;
        let mut out = vec![&m.rho / (c1 * c1)];
        if self.level.basis_size() >= 2 {
            out.push(&m.current / (c2 * c2));
        }
        if self.level.basis_size() >= 3 {
            out.push((&m.kappa * 2.0 - &m.rho * self.c) / (c3 * c3));
        }
        out
    }

    /// `f1 = sum_k M_k (x) (w(v) * V_k)`, rank at most the basis size.
    pub fn project(&self, f: &LowRankMatrix) -> Result<LowRankMatrix> {
        let moments = f.moments(self.weights.axis())?;
        self.from_moments(&moments)
    }

    /// The projected part with prescribed moments.
    pub fn from_moments(&self, m: &Moments1D) -> Result<LowRankMatrix> {
        let coefficients = self.coefficients(m);
        let k = coefficients.len();
        let nx = m.rho.len();
        let nv = self.weights.axis().len();
        let mut u = DMatrix::zeros(nx, k);
        let mut v = DMatrix::zeros(nv, k);
        for (j, (mk, vk)) in coefficients.iter().zip(self.vectors()).enumerate() {
            u.set_column(j, mk);
            v.set_column(j, &vk.component_mul(self.weights.pointwise()));
        }
        LowRankMatrix::new(DVector::from_element(k, 1.0), u, v)
    }

    /// Split `f` into its projected part and the zero-moment remainder.
    pub fn decompose(&self, f: &LowRankMatrix) -> Result<(LowRankMatrix, LowRankMatrix)> {
        let f1 = self.project(f)?;
        let f2 = f.add(&f1.scale(-1.0))?;
        Ok((f1, f2))
    }
}

/// Conservative truncation: project, compress the remainder in the weighted
/// norm at tail threshold `eps`, and add the projection back.
///
/// The remainder is compressed as `sqrt(w) * T_eps(f2 / sqrt(w))`, which
/// keeps it weighted-orthogonal to the conservation basis.
pub fn conservative_truncate(
    f: &LowRankMatrix,
    eps: f64,
    basis: &VBasis1D,
) -> Result<LowRankMatrix> {
    let weights = basis.weights();
    check_len(
        "conservative truncation (velocity grid)",
        weights.axis().len(),
        f.nv(),
    )?;
    let (f1, f2) = basis.decompose(f)?;
    let scaled = LowRankMatrix {
        coeffs: f2.coeffs.clone(),
        u: f2.u.clone(),
        v: scale_rows(&f2.v, weights.inv_sqrt_w()),
        orthonormal: false,
    };
    let compressed = scaled.truncate_svd(eps);
    let rescaled = compressed.scale_v(weights.sqrt_w())?;
    f1.add(&rescaled)
}
