//! Uniform phase-space grids, velocity weights and the discrete inner
//! products used by every other module.
//!
//! Conventions: a periodic axis on `[lo, hi)` drops the right endpoint and
//! has spacing `(hi - lo) / n`; a velocity axis spans `[-v_max, v_max]`
//! including both endpoints with spacing `(hi - lo) / (n - 1)`. Quadrature
//! is a plain nodal sum times the spacing, with no endpoint correction.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};

/// Smallest number of points accepted on any axis (the upwind stencil
/// reaches three cells to each side).
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisGrid {
    n: usize,
    lo: f64,
    hi: f64,
    h: f64,
    points: DVector<f64>,
    periodic: bool,
}

impl AxisGrid {
    pub fn new(n: usize, lo: f64, hi: f64, periodic: bool) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::DegenerateAxis(format!(
                "{n} points requested, at least {MIN_POINTS} required"
            )));
        }
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::DegenerateAxis(format!("empty domain [{lo}, {hi}]")));
        }
        let h = if periodic {
            (hi - lo) / n as f64
        } else {
            (hi - lo) / (n - 1) as f64
        };
        let points = if periodic {
            DVector::from_fn(n, |i, _| lo + i as f64 * h)
        } else {
            // endpoint-weighted form keeps a symmetric axis exactly antisymmetric
            let m = (n - 1) as f64;
            DVector::from_fn(n, |i, _| (lo * (m - i as f64) + hi * i as f64) / m)
        };
        Ok(Self {
            n,
            lo,
            hi,
            h,
            points,
            periodic,
        })
    }

    /// Periodic spatial axis `[0, length)`.
    pub fn periodic(n: usize, length: f64) -> Result<Self> {
        Self::new(n, 0.0, length, true)
    }

    /// Velocity axis `[-v_max, v_max]` with both endpoints on the grid.
    pub fn velocity(n: usize, v_max: f64) -> Result<Self> {
        Self::new(n, -v_max, v_max, false)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn points(&self) -> &DVector<f64> {
        &self.points
    }

    /// Domain length `hi - lo`.
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Largest coordinate magnitude on the grid.
    pub fn max_abs(&self) -> f64 {
        self.points.iter().fold(0.0_f64, |m, p| m.max(p.abs()))
    }

    /// Evaluate `f` at every grid point.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        self.points.map(f)
    }

    pub fn ones(&self) -> DVector<f64> {
        DVector::from_element(self.n, 1.0)
    }

    /// `h * sum_j f_j g_j`.
    pub fn inner(&self, f: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        check_len("inner product", self.n, f.len())?;
        check_len("inner product", self.n, g.len())?;
        Ok(self.h * f.dot(g))
    }
}

/// Gaussian weight `w(v) = exp(-v^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub sigma: f64,
    /// Optional lower bound on the quadrature weights `w(v_j) h_v`.
    pub min_weight: Option<f64>,
}

impl WeightSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            sigma,
            min_weight: None,
        }
    }

    /// `exp(-v^2/2)`.
    pub fn standard() -> Self {
        Self::gaussian(1.0)
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.min_weight = Some(floor);
        self
    }

    pub fn eval(&self, v: f64) -> f64 {
        (-v * v / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Weight vectors for one velocity axis.
///
/// `quadrature` holds `w_j = w(v_j) h_v` (the weights of `<., .>_w`); the
/// pointwise values `w(v_j)` and their square roots and reciprocals are the
/// element-wise scalings used by the projections and weighted truncations.
#[derive(Debug, Clone)]
pub struct VelocityWeights {
    axis: AxisGrid,
    spec: WeightSpec,
    quadrature: DVector<f64>,
    pointwise: DVector<f64>,
    sqrt_w: DVector<f64>,
    inv_w: DVector<f64>,
    inv_sqrt_w: DVector<f64>,
}

impl VelocityWeights {
    pub fn new(axis: &AxisGrid, spec: WeightSpec) -> Result<Self> {
        if axis.is_periodic() {
            return Err(Error::InvalidArgument(
                "velocity weights require a non-periodic axis".into(),
            ));
        }
        if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight width must be positive, got {}",
                spec.sigma
            )));
        }
        let pointwise = axis.map(|v| spec.eval(v));
        for (index, (&w, &v)) in pointwise.iter().zip(axis.points().iter()).enumerate() {
            if w <= 0.0 || !w.is_finite() {
                return Err(Error::WeightUnderflow { index, v });
            }
        }
        let quadrature = &pointwise * axis.spacing();
        if let Some(floor) = spec.min_weight {
            if let Some((index, &value)) = quadrature.iter().enumerate().find(|(_, &q)| q < floor) {
                return Err(Error::WeightBelowFloor {
                    index,
                    value,
                    floor,
                });
            }
        }
        Ok(Self {
            axis: axis.clone(),
            spec,
            sqrt_w: pointwise.map(f64::sqrt),
            inv_w: pointwise.map(f64::recip),
            inv_sqrt_w: pointwise.map(|w| w.sqrt().recip()),
            quadrature,
            pointwise,
        })
    }

    pub fn axis(&self) -> &AxisGrid {
        &self.axis
    }

    pub fn spec(&self) -> WeightSpec {
        self.spec
    }

    pub fn quadrature(&self) -> &DVector<f64> {
        &self.quadrature
    }

    pub fn pointwise(&self) -> &DVector<f64> {
        &self.pointwise
    }

    pub fn sqrt_w(&self) -> &DVector<f64> {
        &self.sqrt_w
    }

    pub fn inv_w(&self) -> &DVector<f64> {
        &self.inv_w
    }

    pub fn inv_sqrt_w(&self) -> &DVector<f64> {
        &self.inv_sqrt_w
    }

    /// `sum_j f_j g_j w_j` with `w_j = w(v_j) h_v`.
    pub fn inner_w(&self, f: &DVector<f64>, g: &DVector<f64>) -> Result<f64> {
        let n = self.quadrature.len();
        check_len("weighted inner product", n, f.len())?;
        check_len("weighted inner product", n, g.len())?;
        Ok(f.iter()
            .zip(g.iter())
            .zip(self.quadrature.iter())
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    pub fn norm_w(&self, f: &DVector<f64>) -> Result<f64> {
        Ok(self.inner_w(f, f)?.sqrt())
    }
}
