//! Periodic spectral Poisson solves `-lap(phi) = rho - rho0`, `E = -grad(phi)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{check_len, Error, Result};
use crate::grid::AxisGrid;
use crate::lowrank::LowRankMatrix;

/// Tail threshold used when compressing the sign-split 2D field components.
pub const FIELD_COMPRESSION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    pub e: DVector<f64>,
    pub e_plus: DVector<f64>,
    pub e_minus: DVector<f64>,
    pub phi: DVector<f64>,
    /// Background ion density (mean of the electron density).
    pub rho0: f64,
}

/// Electric field on a 2D periodic spatial grid.
///
/// `e1`/`e2` are dense; the sign-split parts are stored as low-rank matrices
/// over `(x1, x2)` for use as element-wise multipliers of HT frames.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub e1_plus: LowRankMatrix,
    pub e1_minus: LowRankMatrix,
    pub e2_plus: LowRankMatrix,
    pub e2_minus: LowRankMatrix,
    pub phi: DMatrix<f64>,
    pub rho0: f64,
}

fn wavenumbers(axis: &AxisGrid) -> Vec<f64> {
    let n = axis.len();
    let base = 2.0 * PI / axis.length();
    (0..n)
        .map(|m| {
            let m = m as isize;
            let signed = if m <= n as isize / 2 {
                m
            } else {
                m - n as isize
            };
            base * signed as f64
        })
        .collect()
}

fn is_nyquist(m: usize, n: usize) -> bool {
    n.is_multiple_of(2) && m == n / 2
}

fn require_periodic(axis: &AxisGrid) -> Result<()> {
    if !axis.is_periodic() {
        return Err(Error::InvalidArgument(
            "Poisson solve requires a periodic axis".into(),
        ));
    }
    Ok(())
}

pub fn solve_poisson_1d(rho: &DVector<f64>, axis: &AxisGrid) -> Result<Field1D> {
    require_periodic(axis)?;
    let n = axis.len();
    check_len("Poisson right-hand side", n, rho.len())?;
    let rho0 = rho.mean();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut spec: Vec<Complex64> = rho.iter().map(|&r| Complex64::new(r - rho0, 0.0)).collect();
    forward.process(&mut spec);
    let ks = wavenumbers(axis);
    let mut phi_hat = vec![Complex64::new(0.0, 0.0); n];
    let mut e_hat = vec![Complex64::new(0.0, 0.0); n];
    for m in 1..n {
        let k = ks[m];
        phi_hat[m] = spec[m] / (k * k);
        if !is_nyquist(m, n) {
            e_hat[m] = Complex64::new(0.0, -k) * phi_hat[m];
        }
    }
    inverse.process(&mut phi_hat);
    inverse.process(&mut e_hat);
    let scale = 1.0 / n as f64;
    let phi = DVector::from_iterator(n, phi_hat.iter().map(|c| c.re * scale));
    let mut e = DVector::from_iterator(n, e_hat.iter().map(|c| c.re * scale));
    let mean = e.mean();
    e.add_scalar_mut(-mean);
    Ok(Field1D {
        e_plus: e.map(|x| x.max(0.0)),
        e_minus: e.map(|x| x.min(0.0)),
        e,
        phi,
        rho0,
    })
}

fn fft_2d(data: &mut DMatrix<Complex64>, inverse: bool) {
    let (n1, n2) = data.shape();
    let mut planner = FftPlanner::<f64>::new();
    let (p1, p2) = if inverse {
        (planner.plan_fft_inverse(n1), planner.plan_fft_inverse(n2))
    } else {
        (planner.plan_fft_forward(n1), planner.plan_fft_forward(n2))
    };
    // columns are contiguous in nalgebra storage
    for mut col in data.column_iter_mut() {
        let mut buf: Vec<Complex64> = col.iter().copied().collect();
        p1.process(&mut buf);
        col.copy_from_slice(&buf);
    }
    for i in 0..n1 {
        let mut buf: Vec<Complex64> = data.row(i).iter().copied().collect();
        p2.process(&mut buf);
        for (j, v) in buf.into_iter().enumerate() {
            data[(i, j)] = v;
        }
    }
}

/// Solve on a dense density; `rho[(i, j)]` lives at `(x1_i, x2_j)`.
pub fn solve_poisson_2d_dense(rho: &DMatrix<f64>, x1: &AxisGrid, x2: &AxisGrid) -> Result<Field2D> {
    require_periodic(x1)?;
    require_periodic(x2)?;
    let (n1, n2) = (x1.len(), x2.len());
    check_len("Poisson right-hand side (x1)", n1, rho.nrows())?;
    check_len("Poisson right-hand side (x2)", n2, rho.ncols())?;
    let rho0 = rho.mean();
    let mut spec = rho.map(|r| Complex64::new(r - rho0, 0.0));
    fft_2d(&mut spec, false);
    let k1 = wavenumbers(x1);
    let k2 = wavenumbers(x2);
    let zero = Complex64::new(0.0, 0.0);
    let mut phi_hat = DMatrix::from_element(n1, n2, zero);
    let mut e1_hat = phi_hat.clone();
    let mut e2_hat = phi_hat.clone();
    for j in 0..n2 {
        for i in 0..n1 {
            if i == 0 && j == 0 {
                continue;
            }
            let k2sum = k1[i] * k1[i] + k2[j] * k2[j];
            let p = spec[(i, j)] / k2sum;
            phi_hat[(i, j)] = p;
            if !is_nyquist(i, n1) {
                e1_hat[(i, j)] = Complex64::new(0.0, -k1[i]) * p;
            }
            if !is_nyquist(j, n2) {
                e2_hat[(i, j)] = Complex64::new(0.0, -k2[j]) * p;
            }
        }
    }
    fft_2d(&mut phi_hat, true);
    fft_2d(&mut e1_hat, true);
    fft_2d(&mut e2_hat, true);
    let scale = 1.0 / (n1 * n2) as f64;
    let real = |m: &DMatrix<Complex64>| {
        let mut out = m.map(|c| c.re * scale);
        let mean = out.mean();
        out.add_scalar_mut(-mean);
        out
    };
    let phi = phi_hat.map(|c| c.re * scale);
    let e1 = real(&e1_hat);
    let e2 = real(&e2_hat);
    let split = |m: &DMatrix<f64>, positive: bool| {
        let part = if positive {
            m.map(|x| x.max(0.0))
        } else {
            m.map(|x| x.min(0.0))
        };
        LowRankMatrix::from_dense(&part, FIELD_COMPRESSION_EPS)
    };
    Ok(Field2D {
        e1_plus: split(&e1, true),
        e1_minus: split(&e1, false),
        e2_plus: split(&e2, true),
        e2_minus: split(&e2, false),
        e1,
        e2,
        phi,
        rho0,
    })
}

/// Solve for a density given as a low-rank matrix over `(x1, x2)`.
pub fn solve_poisson_2d(rho: &LowRankMatrix, x1: &AxisGrid, x2: &AxisGrid) -> Result<Field2D> {
    solve_poisson_2d_dense(&rho.to_dense(), x1, x2)
}

/// `1/2 h sum E^2`.
pub fn electric_energy_1d(field: &Field1D, axis: &AxisGrid) -> f64 {
    0.5 * axis.spacing() * field.e.norm_squared()
}

/// `1/2 h1 h2 sum (E1^2 + E2^2)`.
pub fn electric_energy_2d(field: &Field2D, x1: &AxisGrid, x2: &AxisGrid) -> f64 {
    0.5 * x1.spacing() * x2.spacing() * (field.e1.norm_squared() + field.e2.norm_squared())
}

/// Spectral derivative along a periodic axis (used for Gauss-law checks).
pub fn spectral_derivative(u: &DVector<f64>, axis: &AxisGrid) -> Result<DVector<f64>> {
    require_periodic(axis)?;
    let n = axis.len();
    check_len("spectral derivative", n, u.len())?;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);
    let ks = wavenumbers(axis);
    for (m, s) in spec.iter_mut().enumerate() {
        *s = if is_nyquist(m, n) {
            Complex64::new(0.0, 0.0)
        } else {
            *s * Complex64::new(0.0, ks[m])
        };
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    Ok(DVector::from_iterator(
        n,
        spec.iter().map(|c| c.re / n as f64),
    ))
}
