//! Fifth-order upwind finite differences in flux-difference form.
//!
//! The plus-wind operator (for positive transport speed) is
//! `(-2u[i-3] + 15u[i-2] - 60u[i-1] + 20u[i] + 30u[i+1] - 3u[i+2]) / (60h)`,
//! i.e. the difference of the numerical fluxes
//! `F[i+1/2] = (2u[i-2] - 13u[i-1] + 47u[i] + 27u[i+1] - 3u[i+2]) / 60`.
//! The minus-wind operator is its mirror image.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::grid::AxisGrid;
use crate::lowrank::LowRankMatrix;

const PLUS_FLUX: [f64; 5] = [2.0, -13.0, 47.0, 27.0, -3.0];
const PLUS_FLUX_OFFSET: isize = -2;
const MINUS_FLUX: [f64; 5] = [-3.0, 27.0, 47.0, -13.0, 2.0];
const MINUS_FLUX_OFFSET: isize = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Upwind for positive speed.
    Plus,
    /// Upwind for negative speed.
    Minus,
    /// Average of the two upwind operators (sixth-order central).
    Central,
}

/// Treatment of values outside a non-periodic axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Ghost values are zero; fluxes through the two end faces are computed
    /// from them like any other face.
    ZeroGhost,
    /// Ghost values are zero and the fluxes through the two end faces are
    /// set to zero, so `sum_i (D u)_i = 0` exactly.
    ZeroFlux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpwindOperator {
    direction: Direction,
    boundary: Boundary,
    n: usize,
    h: f64,
}

impl UpwindOperator {
    pub fn new(axis: &AxisGrid, direction: Direction, boundary: Boundary) -> Result<Self> {
        if axis.is_periodic() != (boundary == Boundary::Periodic) {
            return Err(Error::InvalidArgument(format!(
                "{boundary:?} boundary does not match a {} axis",
                if axis.is_periodic() {
                    "periodic"
                } else {
                    "bounded"
                }
            )));
        }
        Ok(Self {
            direction,
            boundary,
            n: axis.len(),
            h: axis.spacing(),
        })
    }

    /// Default operator for an axis: periodic in space, zero-flux in velocity.
    pub fn for_axis(axis: &AxisGrid, direction: Direction) -> Self {
        let boundary = if axis.is_periodic() {
            Boundary::Periodic
        } else {
            Boundary::ZeroFlux
        };
        Self {
            direction,
            boundary,
            n: axis.len(),
            h: axis.spacing(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Six-point stencil coefficients (before the `1/(60h)` factor) and the
    /// offset of the first one.
    pub fn stencil(direction: Direction) -> ([f64; 7], isize) {
        let plus = [-2.0, 15.0, -60.0, 20.0, 30.0, -3.0, 0.0];
        let minus = [0.0, 3.0, -30.0, -20.0, 60.0, -15.0, 2.0];
        match direction {
            Direction::Plus => (plus, -3),
            Direction::Minus => (minus, -3),
            Direction::Central => {
                let mut c = [0.0; 7];
                for k in 0..7 {
                    c[k] = 0.5 * (plus[k] + minus[k]);
                }
                (c, -3)
            }
        }
    }

    fn value(&self, u: &[f64], i: isize) -> f64 {
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => u[i.rem_euclid(n) as usize],
            _ if i < 0 || i >= n => 0.0,
            _ => u[i as usize],
        }
    }

    /// Flux through face `i + 1/2` for a single upwind direction.
    fn flux(&self, u: &[f64], i: isize, coef: &[f64; 5], offset: isize) -> f64 {
        let n = self.n as isize;
        if self.boundary == Boundary::ZeroFlux && (i < 0 || i >= n - 1) {
            return 0.0;
        }
        coef.iter()
            .enumerate()
            .map(|(k, c)| c * self.value(u, i + offset + k as isize))
            .sum::<f64>()
            / 60.0
    }

    fn apply_slice(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n as isize;
        let run = |coef: &[f64; 5], offset: isize, out: &mut [f64], weight: f64| {
            let mut left = self.flux(u, -1, coef, offset);
            for i in 0..n {
                let right = self.flux(u, i, coef, offset);
                out[i as usize] += weight * (right - left) / self.h;
                left = right;
            }
        };
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.direction {
            Direction::Plus => run(&PLUS_FLUX, PLUS_FLUX_OFFSET, out, 1.0),
            Direction::Minus => run(&MINUS_FLUX, MINUS_FLUX_OFFSET, out, 1.0),
            Direction::Central => {
                run(&PLUS_FLUX, PLUS_FLUX_OFFSET, out, 0.5);
                run(&MINUS_FLUX, MINUS_FLUX_OFFSET, out, 0.5);
            }
        }
    }

    pub fn apply(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("upwind operator", self.n, u.len())?;
        let mut out = DVector::zeros(self.n);
        self.apply_slice(u.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Apply to every column of `m`.
    pub fn apply_columns(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len("upwind operator", self.n, m.nrows())?;
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col = m.column(j);
            let src: Vec<f64> = col.iter().copied().collect();
            let mut dst = vec![0.0; self.n];
            self.apply_slice(&src, &mut dst);
            out.column_mut(j).copy_from_slice(&dst);
        }
        Ok(out)
    }

    /// Dense matrix of the operator (test and diagnostics use).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let eye = DMatrix::identity(self.n, self.n);
        self.apply_columns(&eye).expect("square identity")
    }
}

/// Sign-split upwind discretization of `v d/dx f`:
/// `D+_x U1 (x) v+ U2 + D-_x U1 (x) v- U2`, rank `2r`.
pub fn split_flux_x(
    f: &LowRankMatrix,
    x_axis: &AxisGrid,
    v_axis: &AxisGrid,
) -> Result<LowRankMatrix> {
    let plus = UpwindOperator::for_axis(x_axis, Direction::Plus);
    let minus = UpwindOperator::for_axis(x_axis, Direction::Minus);
    split_flux_x_with(f, v_axis, &plus, &minus)
}

pub(crate) fn split_flux_x_with(
    f: &LowRankMatrix,
    v_axis: &AxisGrid,
    plus: &UpwindOperator,
    minus: &UpwindOperator,
) -> Result<LowRankMatrix> {
    check_len("x transport", plus.len(), f.nx())?;
    let vp = v_axis.map(|v| v.max(0.0));
    let vm = v_axis.map(|v| v.min(0.0));
    let a = LowRankMatrix::new(
        f.coeffs().clone(),
        plus.apply_columns(f.x_frame())?,
        f.v_frame().clone(),
    )?
    .scale_v(&vp)?;
    let b = LowRankMatrix::new(
        f.coeffs().clone(),
        minus.apply_columns(f.x_frame())?,
        f.v_frame().clone(),
    )?
    .scale_v(&vm)?;
    a.add(&b)
}

/// Sign-split upwind discretization of `E d/dv f`:
/// `E+ U1 (x) D+_v U2 + E- U1 (x) D-_v U2`, rank `2r`.
pub fn split_flux_v(
    f: &LowRankMatrix,
    field: &DVector<f64>,
    v_axis: &AxisGrid,
) -> Result<LowRankMatrix> {
    let plus = UpwindOperator::for_axis(v_axis, Direction::Plus);
    let minus = UpwindOperator::for_axis(v_axis, Direction::Minus);
    split_flux_v_with(f, field, &plus, &minus)
}

pub(crate) fn split_flux_v_with(
    f: &LowRankMatrix,
    field: &DVector<f64>,
    plus: &UpwindOperator,
    minus: &UpwindOperator,
) -> Result<LowRankMatrix> {
    check_len("v transport (field)", f.nx(), field.len())?;
    check_len("v transport", plus.len(), f.nv())?;
    let ep = field.map(|e| e.max(0.0));
    let em = field.map(|e| e.min(0.0));
    let a = LowRankMatrix::new(
        f.coeffs().clone(),
        f.x_frame().clone(),
        plus.apply_columns(f.v_frame())?,
    )?
    .scale_x(&ep)?;
    let b = LowRankMatrix::new(
        f.coeffs().clone(),
        f.x_frame().clone(),
        minus.apply_columns(f.v_frame())?,
    )?
    .scale_x(&em)?;
    a.add(&b)
}
