//! Moment-preserving truncation of 2D2V HT tensors.
//!
//! The projection `f1` of `f` onto `w * span{V_1..V_4}` has an explicit HT
//! form with ranks `(r1, r2, 3, 3, 4, 4)`: the spatial leaves of `f` are
//! reused, the velocity leaves hold `w * {1, v, v^2 - c}` and only `B12`
//! depends on `f`. The zero-moment remainder is compressed in the weighted
//! norm, and the moments it gains from the truncation are projected out
//! again before `f1` is added back.

use nalgebra::{DMatrix, DVector};

use super::{HTensor, Transfer};
use crate::error::{check_len, Error, Result};
use crate::grid::VelocityWeights;
use crate::linalg::{dominant_subspace, scale_rows, thin_qr};
use crate::lowrank::{ProjectorLevel, VBasis1D};

/// Tail threshold of the spatial redundancy removal applied to `f1`.
pub const F1_CLEANUP_EPS: f64 = 1e-15;

/// Conservation basis for two identical velocity directions.
///
/// `V_1 = b1 b1`, `V_2 = b2 b1`, `V_3 = b1 b2`, `V_4 = (b3 b1 + b1 b3)/sqrt(2)`
/// with `b1 = 1/c1`, `b2 = v/c2`, `b3 = (v^2 - c)/c3`; these are orthonormal
/// in the weighted inner product with weight `w(v1) w(v2)`.
#[derive(Debug, Clone)]
pub struct VBasis2D {
    weights: VelocityWeights,
    c: f64,
    norms: [f64; 3],
    frame: DMatrix<f64>,
    weighted_frame: DMatrix<f64>,
    transfer: Transfer,
}

impl VBasis2D {
    pub fn new(w1: &VelocityWeights, w2: &VelocityWeights) -> Result<Self> {
        if w1.axis() != w2.axis() || w1.spec() != w2.spec() {
            return Err(Error::InvalidArgument(
                "2D conservation basis requires identical v1 and v2 grids and weights".into(),
            ));
        }
        let one_d = VBasis1D::new(w1, ProjectorLevel::Full)?;
        let norms = one_d.norms();
        let n = w1.axis().len();
        let mut frame = DMatrix::zeros(n, 3);
        for (k, v) in one_d.vectors().iter().enumerate() {
            frame.set_column(k, &(v / norms[k]));
        }
        let weighted_frame = scale_rows(&frame, w1.pointwise());
        let mut transfer = Transfer::zeros(3, 3, 4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        transfer.set(0, 0, 0, 1.0);
        transfer.set(1, 0, 1, 1.0);
        transfer.set(0, 1, 2, 1.0);
        transfer.set(2, 0, 3, s);
        transfer.set(0, 2, 3, s);
        let basis = Self {
            weights: w1.clone(),
            c: one_d.c(),
            norms,
            frame,
            weighted_frame,
            transfer,
        };
        let gram = basis.gram();
        let dev = (&gram - DMatrix::identity(4, 4)).amax();
        if dev > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "conservation basis is not orthonormal (Gram deviation {dev:.3e})"
            )));
        }
        Ok(basis)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn norms(&self) -> [f64; 3] {
        self.norms
    }

    pub fn weights(&self) -> &VelocityWeights {
        &self.weights
    }

    /// One-direction basis `[1/c1, v/c2, (v^2 - c)/c3]` as columns.
    pub fn leaf_basis(&self) -> &DMatrix<f64> {
        &self.frame
    }

    /// Transfer tensor combining the leaf bases into `V_1..V_4`.
    pub fn transfer(&self) -> &Transfer {
        &self.transfer
    }

    /// `V_k` as an `n x n` matrix over `(v1, v2)`.
    pub fn element(&self, k: usize) -> DMatrix<f64> {
        let s = self.transfer.slice(k);
        &self.frame * s * self.frame.transpose()
    }

    /// Weighted Gram matrix of `V_1..V_4`, evaluated one direction at a time.
    pub fn gram(&self) -> DMatrix<f64> {
        let g1 = self.frame.transpose() * scale_rows(&self.frame, self.weights.quadrature());
        let mut out = DMatrix::zeros(4, 4);
        for i in 0..4 {
            let si = self.transfer.slice(i);
            for j in 0..4 {
                let sj = self.transfer.slice(j);
                // sum B_i(a,b) B_j(a',b') g(a,a') g(b,b')
                out[(i, j)] = (g1.transpose() * &si * &g1).component_mul(&sj).sum();
            }
        }
        out
    }

    fn check_grid(&self, f: &HTensor) -> Result<()> {
        let n = self.frame.nrows();
        check_len("conservation basis (v1 grid)", n, f.dims()[2])?;
        check_len("conservation basis (v2 grid)", n, f.dims()[3])
    }

    /// Coefficients `S[k, q] = <U34[:, q], V_k>` in the plain quadrature.
    fn coupling(&self, f: &HTensor) -> DMatrix<f64> {
        let h = self.weights.axis().spacing();
        let g3 = self.frame.transpose() * &f.leaves[2] * h;
        let g4 = self.frame.transpose() * &f.leaves[3] * h;
        let t = f.b34.apply_children(Some(&g3), Some(&g4));
        self.transfer.mat.transpose() * t.mat
    }

    /// The projection `f1` in its explicit HT form (ranks `(r1, r2, 3, 3, 4, 4)`,
    /// identity root). It has the same discrete `rho`, `J1`, `J2` and `kappa`
    /// as `f`.
    pub fn project(&self, f: &HTensor) -> Result<HTensor> {
        self.check_grid(f)?;
        let s = self.coupling(f);
        let b1 = &f.b12.mat * &f.root * s.transpose();
        HTensor::new(
            [
                f.leaves[0].clone(),
                f.leaves[1].clone(),
                self.weighted_frame.clone(),
                self.weighted_frame.clone(),
            ],
            Transfer::new(f.b12.left, f.b12.right, b1)?,
            self.transfer.clone(),
            DMatrix::identity(4, 4),
        )
    }

    /// `<f, V_k>` for every spatial node, as dense `(n1 n2) x 4` columns.
    pub fn functionals(&self, f: &HTensor) -> Result<DMatrix<f64>> {
        self.check_grid(f)?;
        let s = self.coupling(f);
        let x = HTensor::node_frame(&f.leaves[0], &f.leaves[1], &f.b12);
        Ok(x * &f.root * s.transpose())
    }
}

/// Remove exact redundancy from a tensor whose velocity node is the shared
/// conservation basis: fold the root into `B12`, orthonormalize the spatial
/// leaves and drop directions below [`F1_CLEANUP_EPS`].
fn compress_f1(f: &HTensor) -> HTensor {
    let (q1, r1) = thin_qr(&f.leaves[0]);
    let (q2, r2) = thin_qr(&f.leaves[1]);
    let b = Transfer {
        left: f.b12.left,
        right: f.b12.right,
        mat: &f.b12.mat * &f.root,
    }
    .apply_children(Some(&r1), Some(&r2));
    let p1 = dominant_subspace(&b.mode_left(), F1_CLEANUP_EPS);
    let p2 = dominant_subspace(&b.mode_right(), F1_CLEANUP_EPS);
    let b = b.apply_children(Some(&p1.transpose()), Some(&p2.transpose()));
    let r34 = f.root.ncols();
    HTensor {
        leaves: [q1 * p1, q2 * p2, f.leaves[2].clone(), f.leaves[3].clone()],
        b12: b,
        b34: f.b34.clone(),
        root: DMatrix::identity(r34, r34),
        orthogonal: false,
    }
}

fn truncate_impl(f: &HTensor, eps: f64, basis: &VBasis2D, repair: bool) -> Result<HTensor> {
    let f1 = basis.project(f)?;
    let f2 = f.add(&f1.scale(-1.0))?;
    let w = basis.weights();
    let inv: &DVector<f64> = w.inv_sqrt_w();
    let t = f2
        .scale_v(inv, inv)?
        .truncate(eps)
        .scale_v(w.sqrt_w(), w.sqrt_w())?;
    let f1 = if repair {
        // the weighted truncation leaves t with small nonzero moments
        f1.add(&basis.project(&t)?.scale(-1.0))?
    } else {
        f1
    };
    compress_f1(&f1).add(&t)
}

/// Conservative truncation at tail threshold `eps`. The result has the same
/// discrete `rho`, `J1`, `J2` and `kappa` as `f` up to round-off.
pub fn conservative_truncate_2d2v(f: &HTensor, eps: f64, basis: &VBasis2D) -> Result<HTensor> {
    truncate_impl(f, eps, basis, true)
}

/// The same procedure without projecting the truncated remainder back onto
/// zero moments. Only useful to demonstrate that the repair is necessary.
pub fn conservative_truncate_2d2v_unrepaired(
    f: &HTensor,
    eps: f64,
    basis: &VBasis2D,
) -> Result<HTensor> {
    truncate_impl(f, eps, basis, false)
}
