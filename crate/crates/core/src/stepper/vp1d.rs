use nalgebra::DVector;

use super::{Model, TruncationMode, TruncationPolicy};
use crate::error::{check_len, Error, Result};
use crate::grid::{AxisGrid, VelocityWeights};
use crate::lowrank::{conservative_truncate, LowRankMatrix, ProjectorLevel, VBasis1D};
use crate::poisson::{solve_poisson_1d, Field1D};
use crate::stencil::{split_flux_v_with, split_flux_x_with, Boundary, Direction, UpwindOperator};

/// Whether the electric field is computed from the solution or held at zero
/// (free streaming, used for convergence studies).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldMode {
    SelfConsistent,
    Zero,
}

/// 1D1V Vlasov-Poisson system `f_t + v f_x + E f_v = 0` on low-rank matrices.
#[derive(Debug, Clone)]
pub struct VlasovPoisson1D {
    x: AxisGrid,
    v: AxisGrid,
    bases: [VBasis1D; 3],
    dx: [UpwindOperator; 2],
    dv: [UpwindOperator; 2],
    field_mode: FieldMode,
}

impl VlasovPoisson1D {
    pub fn new(x: &AxisGrid, weights: &VelocityWeights) -> Result<Self> {
        if !x.is_periodic() {
            return Err(Error::InvalidArgument("x axis must be periodic".into()));
        }
        let v = weights.axis().clone();
        let bases = [
            VBasis1D::new(weights, ProjectorLevel::Mass)?,
            VBasis1D::new(weights, ProjectorLevel::MassMomentum)?,
            VBasis1D::new(weights, ProjectorLevel::Full)?,
        ];
        Ok(Self {
            dx: [
                UpwindOperator::for_axis(x, Direction::Plus),
                UpwindOperator::for_axis(x, Direction::Minus),
            ],
            dv: [
                UpwindOperator::for_axis(&v, Direction::Plus),
                UpwindOperator::for_axis(&v, Direction::Minus),
            ],
            x: x.clone(),
            v,
            bases,
            field_mode: FieldMode::SelfConsistent,
        })
    }

    pub fn with_field_mode(mut self, mode: FieldMode) -> Self {
        self.field_mode = mode;
        self
    }

    pub fn with_velocity_boundary(mut self, boundary: Boundary) -> Result<Self> {
        self.dv = [
            UpwindOperator::new(&self.v, Direction::Plus, boundary)?,
            UpwindOperator::new(&self.v, Direction::Minus, boundary)?,
        ];
        Ok(self)
    }

    pub fn x_axis(&self) -> &AxisGrid {
        &self.x
    }

    pub fn v_axis(&self) -> &AxisGrid {
        &self.v
    }

    pub fn basis(&self, level: ProjectorLevel) -> &VBasis1D {
        &self.bases[level.index() as usize - 1]
    }

    /// `CFL * min(h_x / v_max, h_v / e_bound)`.
    pub fn default_dt(&self, cfl: f64, e_bound: f64) -> f64 {
        cfl * (self.x.spacing() / self.v.max_abs()).min(self.v.spacing() / e_bound)
    }

    fn check(&self, f: &LowRankMatrix) -> Result<()> {
        check_len("1D1V state (x grid)", self.x.len(), f.nx())?;
        check_len("1D1V state (v grid)", self.v.len(), f.nv())
    }

    /// Upwinded `v f_x + E f_v` (rank `4r`).
    fn transport(&self, f: &LowRankMatrix, e: &DVector<f64>) -> Result<LowRankMatrix> {
        let x = split_flux_x_with(f, &self.v, &self.dx[0], &self.dx[1])?;
        if self.field_mode == FieldMode::Zero {
            return Ok(x);
        }
        x.add(&split_flux_v_with(f, e, &self.dv[0], &self.dv[1])?)
    }
}

/// `-(v+ f)_x - (v- f)_x - (E+ f)_v - (E- f)_v` as a rank-`4r` matrix.
pub fn rhs_1d1v(
    model: &VlasovPoisson1D,
    f: &LowRankMatrix,
    field: &Field1D,
) -> Result<LowRankMatrix> {
    model.check(f)?;
    Ok(model.transport(f, &field.e)?.scale(-1.0))
}

impl Model for VlasovPoisson1D {
    type State = LowRankMatrix;
    type Field = Field1D;

    fn field(&self, f: &LowRankMatrix) -> Result<Field1D> {
        self.check(f)?;
        let rho = f.moments(&self.v)?.rho;
        match self.field_mode {
            FieldMode::SelfConsistent => solve_poisson_1d(&rho, &self.x),
            FieldMode::Zero => {
                let zero = DVector::zeros(self.x.len());
                Ok(Field1D {
                    e: zero.clone(),
                    e_plus: zero.clone(),
                    e_minus: zero.clone(),
                    phi: zero,
                    rho0: rho.mean(),
                })
            }
        }
    }

    fn combine(
        &self,
        f: &LowRankMatrix,
        field: &Field1D,
        a: f64,
        b: f64,
        extra: Option<(&LowRankMatrix, f64)>,
    ) -> Result<LowRankMatrix> {
        self.check(f)?;
        let mut out = self.transport(f, &field.e)?.scale(-b);
        if a != 0.0 {
            out = f.scale(a).add(&out)?;
        }
        if let Some((g, c)) = extra {
            out = out.add(&g.scale(c))?;
        }
        Ok(out)
    }

    fn truncate(&self, f: &LowRankMatrix, policy: &TruncationPolicy) -> Result<LowRankMatrix> {
        match policy.mode {
            TruncationMode::Conservative => {
                conservative_truncate(f, policy.eps, self.basis(policy.level))
            }
            TruncationMode::Plain => Ok(f.truncate_svd(policy.eps)),
        }
    }

    fn max_rank(&self, f: &LowRankMatrix) -> usize {
        f.rank()
    }

    fn is_finite(&self, f: &LowRankMatrix) -> bool {
        f.norm().is_finite()
    }
}
