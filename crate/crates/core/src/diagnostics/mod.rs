//! Conserved quantities, time series and snapshot output, configuration and
//! the simulation driver.

pub mod config;
mod run;
mod snapshot;

pub use config::{parse_config, Problem, SimulationConfig};
pub use run::{run_simulation, simulate, RunOutput, Solution};
pub use snapshot::{
    read_grid_csv, snapshot_name, write_full_tensor, write_snapshot_1d, write_snapshot_2d, GridCsv,
    FULL_EXPORT_LIMIT,
};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::grid::AxisGrid;
use crate::htucker::{HTensor, RankTuple};
use crate::lowrank::LowRankMatrix;
use crate::poisson::{electric_energy_1d, electric_energy_2d, Field1D, Field2D};

/// How total momentum enters the time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumReport {
    /// `|J(t)|`, for initial data symmetric in `v` (where `J(0) = 0`).
    Absolute,
    /// `(J(t) - J(0)) / |J(0)|`.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranks {
    Matrix(usize),
    Tree(RankTuple),
}

impl Ranks {
    pub fn max(&self) -> usize {
        match self {
            Ranks::Matrix(r) => *r,
            Ranks::Tree(t) => t.max(),
        }
    }

    fn values(&self) -> Vec<usize> {
        match self {
            Ranks::Matrix(r) => vec![*r],
            Ranks::Tree(t) => t.as_array().to_vec(),
        }
    }
}

/// Conserved quantities of one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub total_mass: f64,
    /// One component per spatial dimension.
    pub total_momentum: Vec<f64>,
    pub kinetic_energy: f64,
    pub electric_energy: f64,
    /// `kinetic_energy + electric_energy`.
    pub total_energy: f64,
    pub ranks: Ranks,
    pub mass_dev: f64,
    /// Per [`MomentumReport`].
    pub momentum_dev: Vec<f64>,
    pub energy_dev: f64,
}

impl DiagnosticsRecord {
    fn new(mass: f64, momentum: Vec<f64>, kinetic: f64, electric: f64, ranks: Ranks) -> Self {
        let dims = momentum.len();
        Self {
            step: 0,
            time: 0.0,
            total_mass: mass,
            total_momentum: momentum,
            kinetic_energy: kinetic,
            electric_energy: electric,
            total_energy: kinetic + electric,
            ranks,
            mass_dev: 0.0,
            momentum_dev: vec![0.0; dims],
            energy_dev: 0.0,
        }
    }

    /// Fill the deviation fields against the `t = 0` record.
    pub fn with_deviations(mut self, baseline: &DiagnosticsRecord, report: MomentumReport) -> Self {
        let rel = |q: f64, q0: f64| (q - q0) / q0.abs();
        self.mass_dev = rel(self.total_mass, baseline.total_mass);
        self.energy_dev = rel(self.total_energy, baseline.total_energy);
        self.momentum_dev = self
            .total_momentum
            .iter()
            .zip(&baseline.total_momentum)
            .map(|(&j, &j0)| match report {
                MomentumReport::Absolute => j.abs(),
                MomentumReport::Relative => rel(j, j0),
            })
            .collect();
        self
    }

    pub fn at(mut self, step: usize, time: f64) -> Self {
        self.step = step;
        self.time = time;
        self
    }
}

/// `sum_ij m_ij` in `O(r (nx + nv))`.
fn total(m: &LowRankMatrix) -> f64 {
    let a = m.x_frame().row_sum();
    let b = m.v_frame().row_sum();
    (0..m.rank()).map(|l| m.coeffs()[l] * a[l] * b[l]).sum()
}

/// Totals of a 1D1V solution; `field` must be solved from its density.
pub fn invariants_1d(
    f: &LowRankMatrix,
    field: &Field1D,
    x: &AxisGrid,
    v: &AxisGrid,
) -> Result<DiagnosticsRecord> {
    check_len("diagnostics (x grid)", x.len(), f.nx())?;
    let m = f.moments(v)?;
    let h = x.spacing();
    Ok(DiagnosticsRecord::new(
        h * m.rho.sum(),
        vec![h * m.current.sum()],
        h * m.kappa.sum(),
        electric_energy_1d(field, x),
        Ranks::Matrix(f.rank()),
    ))
}

/// Totals of a 2D2V solution; `field` must be solved from its density.
pub fn invariants_2d(
    f: &HTensor,
    field: &Field2D,
    x: &[AxisGrid; 2],
    v: &[AxisGrid; 2],
) -> Result<DiagnosticsRecord> {
    check_len("diagnostics (x1 grid)", x[0].len(), f.dims()[0])?;
    check_len("diagnostics (x2 grid)", x[1].len(), f.dims()[1])?;
    let m = f.moments(&v[0], &v[1])?;
    let h = x[0].spacing() * x[1].spacing();
    Ok(DiagnosticsRecord::new(
        h * total(&m.rho),
        vec![h * total(&m.current1), h * total(&m.current2)],
        h * total(&m.kappa),
        electric_energy_2d(field, &x[0], &x[1]),
        Ranks::Tree(f.ranks()),
    ))
}

/// Column names of the time series for `dims` spatial dimensions.
pub fn timeseries_header(dims: usize) -> Vec<String> {
    let mut h = vec!["time".to_string(), "mass_dev".into()];
    h.extend((1..=dims).map(|d| format!("momentum_{d}")));
    h.push("energy_dev".into());
    h.push("electric_energy".into());
    if dims == 1 {
        h.push("rank_r".into());
    } else {
        h.extend(["r1", "r2", "r3", "r4", "r12", "r34"].map(|r| format!("rank_{r}")));
    }
    h
}

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write records as CSV. All records must have the same dimension; an empty
/// list writes the header only (for `dims` spatial dimensions).
pub fn write_timeseries(records: &[DiagnosticsRecord], dims: usize, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{}", timeseries_header(dims).join(",")).map_err(io)?;
    for r in records {
        check_len(
            "time series record (momentum components)",
            dims,
            r.momentum_dev.len(),
        )?;
        let mut row = vec![fmt_f64(r.time), fmt_f64(r.mass_dev)];
        row.extend(r.momentum_dev.iter().map(|&j| fmt_f64(j)));
        row.push(fmt_f64(r.energy_dev));
        row.push(fmt_f64(r.electric_energy));
        row.extend(r.ranks.values().iter().map(|k| k.to_string()));
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// A parsed time-series file.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeseries {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Timeseries {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_timeseries(path: &Path) -> Result<Timeseries> {
    let io = |e| Error::io(path, e);
    let mut lines = BufReader::new(File::open(path).map_err(io)?).lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line.map_err(io)?.split(',').map(str::to_string).collect(),
        None => return Err(Error::Format(format!("{}: empty file", path.display()))),
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}: line {}: {e}", path.display(), k + 2)))?;
        check_len("time series row", header.len(), row.len())?;
        rows.push(row);
    }
    Ok(Timeseries { header, rows })
}
