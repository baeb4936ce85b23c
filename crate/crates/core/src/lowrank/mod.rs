//! Rank-`r` matrix format `f = sum_l C_l U1_l (x) U2_l` for 1D1V solutions.

mod conservative;

pub use conservative::{conservative_truncate, ProjectorLevel, VBasis1D};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::AxisGrid;
use crate::linalg::{hcat, scale_rows, svd, tail_rank, thin_qr};

/// Low-rank factorization of an `nx x nv` matrix.
///
/// Column `l` of `u` (x frame) and of `v` (velocity frame) together with
/// `coeffs[l]` form one rank-one term. After [`LowRankMatrix::truncate_svd`]
/// both frames have orthonormal columns and the coefficients are the
/// nonincreasing singular values; additions and scalings clear that state.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankMatrix {
    coeffs: DVector<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    orthonormal: bool,
}

/// Velocity moments of a 1D1V distribution at every x node.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments1D {
    pub rho: DVector<f64>,
    pub current: DVector<f64>,
    pub kappa: DVector<f64>,
}

impl Moments1D {
    /// Largest componentwise deviation of each moment, relative to the
    /// sup-norm of the reference moment (absolute when the reference is 0).
    pub fn relative_deviation(&self, reference: &Moments1D) -> [f64; 3] {
        fn dev(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
            let scale = b.amax();
            let diff = (a - b).amax();
            if scale > 0.0 {
                diff / scale
            } else {
                diff
            }
        }
        [
            dev(&self.rho, &reference.rho),
            dev(&self.current, &reference.current),
            dev(&self.kappa, &reference.kappa),
        ]
    }
}

impl LowRankMatrix {
    pub fn new(coeffs: DVector<f64>, u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        check_len("low-rank x frame", coeffs.len(), u.ncols())?;
        check_len("low-rank v frame", coeffs.len(), v.ncols())?;
        Ok(Self {
            coeffs,
            u,
            v,
            orthonormal: false,
        })
    }

    pub fn zeros(nx: usize, nv: usize) -> Self {
        Self {
            coeffs: DVector::zeros(0),
            u: DMatrix::zeros(nx, 0),
            v: DMatrix::zeros(nv, 0),
            orthonormal: true,
        }
    }

    /// Exact representation of `sum_k c_k x_k (x) v_k`; rank equals the
    /// number of terms.
    pub fn from_separable_terms(terms: &[(DVector<f64>, DVector<f64>, f64)]) -> Result<Self> {
        let (first_x, first_v, _) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("no separable terms given".into()))?;
        let (nx, nv) = (first_x.len(), first_v.len());
        let r = terms.len();
        let mut u = DMatrix::zeros(nx, r);
        let mut v = DMatrix::zeros(nv, r);
        let mut coeffs = DVector::zeros(r);
        for (l, (x, vel, c)) in terms.iter().enumerate() {
            check_len("separable x term", nx, x.len())?;
            check_len("separable v term", nv, vel.len())?;
            u.set_column(l, x);
            v.set_column(l, vel);
            coeffs[l] = *c;
        }
        Self::new(coeffs, u, v)
    }

    /// `u * core * v^T` recompressed through an SVD of the small core.
    pub fn from_core(u: &DMatrix<f64>, core: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Self> {
        check_len("core rows", u.ncols(), core.nrows())?;
        check_len("core columns", v.ncols(), core.ncols())?;
        let s = svd(core);
        Self::new(s.sigma.clone(), u * &s.u, v * s.v_t.transpose())
    }

    /// Best approximation of a dense matrix at tail threshold `eps`.
    pub fn from_dense(m: &DMatrix<f64>, eps: f64) -> Self {
        let s = svd(m);
        let r = tail_rank(s.sigma.as_slice(), eps);
        Self {
            coeffs: s.sigma.rows(0, r).into_owned(),
            u: s.u.columns(0, r).into_owned(),
            v: s.v_t.rows(0, r).transpose(),
            orthonormal: true,
        }
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn nx(&self) -> usize {
        self.u.nrows()
    }

    pub fn nv(&self) -> usize {
        self.v.nrows()
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn x_frame(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v_frame(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        scale_rows(&self.u.transpose(), &self.coeffs).transpose() * self.v.transpose()
    }

    /// Number of stored floating-point values.
    pub fn storage(&self) -> usize {
        self.rank() * (1 + self.nx() + self.nv())
    }

    /// Frobenius norm computed from the factors.
    pub fn norm(&self) -> f64 {
        if self.orthonormal {
            return self.coeffs.norm();
        }
        let gu = self.u.transpose() * &self.u;
        let gv = self.v.transpose() * &self.v;
        let g = gu.component_mul(&gv);
        (self.coeffs.dot(&(g * &self.coeffs))).max(0.0).sqrt()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            coeffs: &self.coeffs * alpha,
            u: self.u.clone(),
            v: self.v.clone(),
            orthonormal: self.orthonormal && alpha >= 0.0,
        }
    }

    /// Concatenate the terms of `self` and `other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_len("low-rank add (x)", self.nx(), other.nx())?;
        check_len("low-rank add (v)", self.nv(), other.nv())?;
        let mut coeffs = DVector::zeros(self.rank() + other.rank());
        coeffs.rows_mut(0, self.rank()).copy_from(&self.coeffs);
        coeffs
            .rows_mut(self.rank(), other.rank())
            .copy_from(&other.coeffs);
        Ok(Self {
            coeffs,
            u: hcat(&self.u, &other.u),
            v: hcat(&self.v, &other.v),
            orthonormal: self.rank() == 0 && other.orthonormal
                || other.rank() == 0 && self.orthonormal,
        })
    }

    /// Sum of several low-rank matrices by term concatenation.
    pub fn sum(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty low-rank sum".into()))?;
        let mut acc = Self::zeros(first.nx(), first.nv());
        for p in parts {
            acc = acc.add(p)?;
        }
        Ok(acc)
    }

    /// Multiply every x-frame column element-wise by `a`.
    pub fn scale_x(&self, a: &DVector<f64>) -> Result<Self> {
        check_len("x scaling", self.nx(), a.len())?;
        Ok(Self {
            coeffs: self.coeffs.clone(),
            u: scale_rows(&self.u, a),
            v: self.v.clone(),
            orthonormal: false,
        })
    }

    /// Multiply every velocity-frame column element-wise by `b`.
    pub fn scale_v(&self, b: &DVector<f64>) -> Result<Self> {
        check_len("v scaling", self.nv(), b.len())?;
        Ok(Self {
            coeffs: self.coeffs.clone(),
            u: self.u.clone(),
            v: scale_rows(&self.v, b),
            orthonormal: false,
        })
    }

    /// Apply a linear map to every x-frame column.
    pub fn map_x(&self, op: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        Self {
            coeffs: self.coeffs.clone(),
            u: map_columns(&self.u, op),
            v: self.v.clone(),
            orthonormal: false,
        }
    }

    /// Apply a linear map to every velocity-frame column.
    pub fn map_v(&self, op: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        Self {
            coeffs: self.coeffs.clone(),
            u: self.u.clone(),
            v: map_columns(&self.v, op),
            orthonormal: false,
        }
    }

    /// SVD truncation: keep the smallest rank whose discarded singular values
    /// have Euclidean norm at most `eps`, so `||f - T(f)||_F <= eps`.
    pub fn truncate_svd(&self, eps: f64) -> Self {
        if self.rank() == 0 {
            return Self::zeros(self.nx(), self.nv());
        }
        let (qu, ru) = thin_qr(&self.u);
        let (qv, rv) = thin_qr(&self.v);
        let core = scale_rows(&ru.transpose(), &self.coeffs).transpose() * rv.transpose();
        let s = svd(&core);
        let r = tail_rank(s.sigma.as_slice(), eps);
        Self {
            coeffs: s.sigma.rows(0, r).into_owned(),
            u: qu * s.u.columns(0, r),
            v: qv * s.v_t.rows(0, r).transpose(),
            orthonormal: true,
        }
    }

    /// Exact recompression to orthonormal frames (drops only exactly zero
    /// singular values).
    pub fn orthonormalize(&self) -> Self {
        self.truncate_svd(0.0)
    }

    /// Discrete mass, current and kinetic-energy densities, computed term by
    /// term in `O(r N)`.
    pub fn moments(&self, v_axis: &AxisGrid) -> Result<Moments1D> {
        check_len("moments (velocity grid)", self.nv(), v_axis.len())?;
        let h = v_axis.spacing();
        let vel = v_axis.points();
        let half_v2 = vel.map(|v| 0.5 * v * v);
        let ones = v_axis.ones();
        let project = |g: &DVector<f64>| -> DVector<f64> {
            let w = (self.v.transpose() * g * h).component_mul(&self.coeffs);
            &self.u * w
        };
        Ok(Moments1D {
            rho: project(&ones),
            current: project(vel),
            kappa: project(&half_v2),
        })
    }
}

pub(crate) fn map_columns(
    m: &DMatrix<f64>,
    op: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (j, col) in m.column_iter().enumerate() {
        let c = op(&col.into_owned());
        out.set_column(j, &c);
    }
    out
}
