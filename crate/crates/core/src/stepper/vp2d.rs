use nalgebra::{DMatrix, DVector};

use super::{Model, TruncationMode, TruncationPolicy};
use crate::error::{check_len, Error, Result};
use crate::grid::{AxisGrid, VelocityWeights};
use crate::htucker::{apply_sum, conservative_truncate_2d2v, HTensor, KronTerm, LeafOp, VBasis2D};
use crate::lowrank::{LowRankMatrix, ProjectorLevel};
use crate::poisson::{solve_poisson_2d, Field2D};
use crate::stencil::{Direction, UpwindOperator};

/// Upwind matrices for one axis, `[D+, D-]`.
fn stencil_pair(axis: &AxisGrid) -> [DMatrix<f64>; 2] {
    [
        UpwindOperator::for_axis(axis, Direction::Plus).to_dense(),
        UpwindOperator::for_axis(axis, Direction::Minus).to_dense(),
    ]
}

/// `(u_m * s_m, w_m)` for every rank term of a field component.
fn field_terms(e: &LowRankMatrix) -> Vec<(DVector<f64>, DVector<f64>)> {
    (0..e.rank())
        .map(|m| {
            (
                e.x_frame().column(m) * e.coeffs()[m],
                e.v_frame().column(m).into_owned(),
            )
        })
        .collect()
}

/// 2D2V Vlasov-Poisson system in hierarchical Tucker format, with modes
/// ordered `(x1, x2, v1, v2)`.
#[derive(Debug, Clone)]
pub struct VlasovPoisson2D {
    x: [AxisGrid; 2],
    v: [AxisGrid; 2],
    basis: VBasis2D,
    dx: [[DMatrix<f64>; 2]; 2],
    dv: [[DMatrix<f64>; 2]; 2],
    /// `[v+, v-]` on each velocity axis.
    vsplit: [[DVector<f64>; 2]; 2],
}

impl VlasovPoisson2D {
    pub fn new(
        x1: &AxisGrid,
        x2: &AxisGrid,
        w1: &VelocityWeights,
        w2: &VelocityWeights,
    ) -> Result<Self> {
        if !x1.is_periodic() || !x2.is_periodic() {
            return Err(Error::InvalidArgument("x axes must be periodic".into()));
        }
        let basis = VBasis2D::new(w1, w2)?;
        let v = [w1.axis().clone(), w2.axis().clone()];
        let split = |a: &AxisGrid| [a.map(|s| s.max(0.0)), a.map(|s| s.min(0.0))];
        Ok(Self {
            dx: [stencil_pair(x1), stencil_pair(x2)],
            dv: [stencil_pair(&v[0]), stencil_pair(&v[1])],
            vsplit: [split(&v[0]), split(&v[1])],
            x: [x1.clone(), x2.clone()],
            v,
            basis,
        })
    }

    pub fn x_axes(&self) -> &[AxisGrid; 2] {
        &self.x
    }

    pub fn v_axes(&self) -> &[AxisGrid; 2] {
        &self.v
    }

    pub fn basis(&self) -> &VBasis2D {
        &self.basis
    }

    pub fn dims(&self) -> [usize; 4] {
        [
            self.x[0].len(),
            self.x[1].len(),
            self.v[0].len(),
            self.v[1].len(),
        ]
    }

    /// Per-direction CFL bound divided by the number of directions; the
    /// multistep method is unstable in 2D at the 1D Courant limit.
    pub fn default_dt(&self, cfl: f64, e_bound: f64) -> f64 {
        let hx = self.x[0].spacing().min(self.x[1].spacing());
        let hv = self.v[0].spacing().min(self.v[1].spacing());
        let vmax = self.v[0].max_abs().max(self.v[1].max_abs());
        cfl * (hx / vmax).min(hv / e_bound) / 2.0
    }

    fn check(&self, f: &HTensor) -> Result<()> {
        let dims = self.dims();
        for (k, (&want, got)) in dims.iter().zip(f.dims()).enumerate() {
            let ctx = [
                "2D2V state (x1)",
                "2D2V state (x2)",
                "2D2V state (v1)",
                "2D2V state (v2)",
            ];
            check_len(ctx[k], want, got)?;
        }
        Ok(())
    }

    fn combine_impl(
        &self,
        f: &HTensor,
        field: &Field2D,
        a: f64,
        b: f64,
        extra: Option<(&HTensor, f64)>,
    ) -> Result<HTensor> {
        self.check(f)?;
        let e_terms = [
            [field_terms(&field.e1_plus), field_terms(&field.e1_minus)],
            [field_terms(&field.e2_plus), field_terms(&field.e2_minus)],
        ];
        let id = LeafOp::Identity;
        let mut terms = vec![KronTerm::identity(a)];
        #[allow(clippy::needless_range_loop)]
        for c in 0..2 {
            for s in 0..2 {
                // -(v_c^s) D^s_{x_c} f
                let mut x_ops = [id; 2];
                x_ops[c] = LeafOp::Matrix(&self.dx[c][s]);
                let mut v_ops = [id; 2];
                v_ops[c] = LeafOp::Diag(&self.vsplit[c][s]);
                terms.push(KronTerm::new(-b, vec![x_ops], v_ops));

                // -(E_c^s) D^s_{v_c} f, with E_c^s = sum_m u_m (x) w_m
                let x_ops = e_terms[c][s]
                    .iter()
                    .map(|(u, w)| [LeafOp::Diag(u), LeafOp::Diag(w)])
                    .collect();
                let mut v_ops = [id; 2];
                v_ops[c] = LeafOp::Matrix(&self.dv[c][s]);
                terms.push(KronTerm::new(-b, x_ops, v_ops));
            }
        }
        match extra {
            Some((g, coeff)) => {
                self.check(g)?;
                let other = [KronTerm::identity(coeff)];
                apply_sum(&[(f, &terms), (g, &other)])
            }
            None => apply_sum(&[(f, &terms)]),
        }
    }
}

/// Upwinded `-(v . grad_x f + E . grad_v f)` evaluated exactly in HT format.
pub fn rhs_2d2v(model: &VlasovPoisson2D, f: &HTensor, field: &Field2D) -> Result<HTensor> {
    model.combine_impl(f, field, 0.0, 1.0, None)
}

impl Model for VlasovPoisson2D {
    type State = HTensor;
    type Field = Field2D;

    fn field(&self, f: &HTensor) -> Result<Field2D> {
        self.check(f)?;
        let rho = f.density(&self.v[0], &self.v[1])?;
        solve_poisson_2d(&rho, &self.x[0], &self.x[1])
    }

    fn combine(
        &self,
        f: &HTensor,
        field: &Field2D,
        a: f64,
        b: f64,
        extra: Option<(&HTensor, f64)>,
    ) -> Result<HTensor> {
        self.combine_impl(f, field, a, b, extra)
    }

    fn truncate(&self, f: &HTensor, policy: &TruncationPolicy) -> Result<HTensor> {
        match policy.mode {
            TruncationMode::Conservative => {
                if policy.level != ProjectorLevel::Full {
                    return Err(Error::InvalidArgument(
                        "2D2V conservative truncation preserves all moments; \
                         partial projector levels are not supported"
                            .into(),
                    ));
                }
                conservative_truncate_2d2v(f, policy.eps, &self.basis)
            }
            TruncationMode::Plain => Ok(f.truncate(policy.eps)),
        }
    }

    fn max_rank(&self, f: &HTensor) -> usize {
        f.ranks().max()
    }

    fn is_finite(&self, f: &HTensor) -> bool {
        f.norm().is_finite()
    }
}
