//! Initial conditions of the presets and the time loop with its outputs.

use std::fs;
use std::io::Write;
use std::time::{Duration, Instant};

use log::{info, warn};

use super::config::{Problem, SimulationConfig};
use super::snapshot::{snapshot_name, write_snapshot_1d, write_snapshot_2d};
use super::{invariants_1d, invariants_2d, write_timeseries, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{AxisGrid, VelocityWeights, WeightSpec};
use crate::htucker::HTensor;
use crate::lowrank::LowRankMatrix;
use crate::stepper::{Integrator, Model, VlasovPoisson1D, VlasovPoisson2D};

#[derive(Debug, Clone)]
pub enum Solution {
    Matrix(LowRankMatrix),
    Tree(HTensor),
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Configured output time; the file is named after it.
    pub requested_time: f64,
    pub step: usize,
    pub time: f64,
    pub solution: Solution,
}

#[derive(Debug)]
pub struct RunOutput {
    pub config: SimulationConfig,
    pub dt: f64,
    pub steps_planned: usize,
    pub steps_done: usize,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Last solution that passed the step guards.
    pub final_solution: Solution,
    /// Why the run stopped early, if it did.
    pub failure: Option<Error>,
    pub wall_time: Duration,
}

/// `(1 + alpha cos(k x))` on a periodic axis.
fn perturbation(x: &AxisGrid, cfg: &SimulationConfig) -> nalgebra::DVector<f64> {
    x.map(|s| 1.0 + cfg.alpha * (cfg.k * s).cos())
}

fn maxwellian(v: &AxisGrid) -> nalgebra::DVector<f64> {
    let c = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    v.map(|s| c * (-s * s / 2.0).exp())
}

fn initial_1d(cfg: &SimulationConfig, x: &AxisGrid, v: &AxisGrid) -> Result<LowRankMatrix> {
    let gx = perturbation(x, cfg);
    let gv = match cfg.problem {
        Problem::WeakLandau1D | Problem::StrongLandau1D => maxwellian(v),
        Problem::BumpOnTail => v.map(|s| {
            let d = s - cfg.u;
            cfg.n_p * (-s * s / 2.0).exp() + cfg.n_b * (-d * d / (2.0 * cfg.v_t)).exp()
        }),
        p => return Err(Error::InvalidArgument(format!("{p} is not a 1D1V problem"))),
    };
    LowRankMatrix::from_separable_terms(&[(gx, gv, 1.0)])
}

fn initial_2d(cfg: &SimulationConfig, x: &AxisGrid, v: &AxisGrid) -> Result<HTensor> {
    let one = x.ones();
    let c = x.map(|s| (cfg.k * s).cos());
    let g = match cfg.problem {
        Problem::WeakLandau2D => maxwellian(v),
        Problem::TwoStream2D => {
            let norm = 0.5 / (2.0 * std::f64::consts::PI).sqrt();
            v.map(|s| {
                let (a, b) = (s - cfg.v0, s + cfg.v0);
                norm * ((-a * a / 2.0).exp() + (-b * b / 2.0).exp())
            })
        }
        p => return Err(Error::InvalidArgument(format!("{p} is not a 2D2V problem"))),
    };
    HTensor::from_separable(&[
        ([&one, &one, &g, &g], 1.0),
        ([&c, &one, &g, &g], cfg.alpha),
        ([&one, &c, &g, &g], cfg.alpha),
    ])
}

/// Largest step not above `dt_max` that divides `t_end` evenly.
fn step_plan(t_end: f64, dt_max: f64) -> (f64, usize) {
    if t_end == 0.0 {
        return (dt_max, 0);
    }
    let n = (t_end / dt_max - 1e-9).ceil().max(1.0) as usize;
    (t_end / n as f64, n)
}

fn drive<M: Model>(
    model: &M,
    cfg: &SimulationConfig,
    initial: M::State,
    dt_max: f64,
    invariants: impl Fn(&M::State, &M::Field) -> Result<DiagnosticsRecord>,
    wrap: impl Fn(&M::State) -> Solution,
) -> Result<RunOutput> {
    let start = Instant::now();
    let (dt, steps) = step_plan(cfg.t_end, dt_max);
    let snapshot_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|&t| (((t / dt).round() as usize).min(steps), t))
        .collect();
    let report = cfg.problem.momentum_report();
    let integ = Integrator::new(model, cfg.policy(), cfg.rank_ceiling)?;
    let mut state = integ.init(initial, dt)?;
    let baseline = invariants(&state.solution, &state.field)?;
    let mut records = vec![baseline.clone().with_deviations(&baseline, report)];
    let mut snapshots = Vec::new();
    let mut take_snapshot = |state: &crate::stepper::State<M>| {
        for &(_, t) in snapshot_steps.iter().filter(|(s, _)| *s == state.step) {
            snapshots.push(Snapshot {
                requested_time: t,
                step: state.step,
                time: state.time,
                solution: wrap(&state.solution),
            });
        }
    };
    take_snapshot(&state);
    info!(
        "{}: {} steps of dt = {:.6e} to t = {}, {:?} truncation at eps = {:e}",
        cfg.problem, steps, dt, cfg.t_end, cfg.truncation, cfg.eps
    );

    let mut failure = None;
    for _ in 0..steps {
        let backup = state.solution.clone();
        let step = state.step;
        match integ.advance(state) {
            Ok(next) => state = next,
            Err(e) => {
                warn!("aborting after step {step}: {e}");
                failure = Some(e);
                // the stepper consumed the state; rebuild it around the
                // last good solution for the outputs
                state = integ.init(backup, dt)?;
                state.step = step;
                state.time = step as f64 * dt;
                break;
            }
        }
        let last = state.step == steps;
        if state.step % cfg.output_every == 0 || last || state.step % cfg.log_every == 0 {
            let r = invariants(&state.solution, &state.field)?
                .at(state.step, state.time)
                .with_deviations(&baseline, report);
            if state.step % cfg.log_every == 0 || last {
                info!(
                    "step {:>6}  t = {:>9.4}  rank {:>4}  mass {:+.2e}  momentum {:.2e}  energy {:+.2e}  E_el {:.4e}",
                    state.step,
                    state.time,
                    r.ranks.max(),
                    r.mass_dev,
                    r.momentum_dev.iter().fold(0.0f64, |a, b| a.max(b.abs())),
                    r.energy_dev,
                    r.electric_energy
                );
            }
            if state.step % cfg.output_every == 0 || last {
                records.push(r);
            }
        }
        take_snapshot(&state);
    }
    Ok(RunOutput {
        config: cfg.clone(),
        dt,
        steps_planned: steps,
        steps_done: state.step,
        records,
        snapshots,
        final_solution: wrap(&state.solution),
        failure,
        wall_time: start.elapsed(),
    })
}

fn weights(cfg: &SimulationConfig) -> Result<VelocityWeights> {
    let v = AxisGrid::velocity(cfg.nv, cfg.l_v)?;
    VelocityWeights::new(&v, WeightSpec::gaussian(cfg.sigma))
}

/// Run a configuration in memory. Errors during setup are returned; errors
/// while stepping end the run early and are reported in
/// [`RunOutput::failure`].
pub fn simulate(cfg: &SimulationConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let x = AxisGrid::periodic(cfg.nx, cfg.length())?;
    let w = weights(cfg)?;
    let v = w.axis().clone();
    if cfg.dims() == 1 {
        let model = VlasovPoisson1D::new(&x, &w)?;
        let f0 = initial_1d(cfg, &x, &v)?;
        let dt = model.default_dt(cfg.cfl, cfg.e_bound);
        drive(
            &model,
            cfg,
            f0,
            dt,
            |f, e| invariants_1d(f, e, &x, &v),
            |f| Solution::Matrix(f.clone()),
        )
    } else {
        let model = VlasovPoisson2D::new(&x, &x, &w, &w)?;
        let f0 = initial_2d(cfg, &x, &v)?;
        let dt = model.default_dt(cfg.cfl, cfg.e_bound);
        let xs = [x.clone(), x.clone()];
        let vs = [v.clone(), v.clone()];
        drive(
            &model,
            cfg,
            f0,
            dt,
            |f, e| invariants_2d(f, e, &xs, &vs),
            |f| Solution::Tree(f.clone()),
        )
    }
}

/// Name of the marker file written when a run aborts.
pub const FAILURE_MARKER: &str = "FAILED";

/// Run a configuration and write `timeseries.csv`, the snapshots and
/// `manifest.txt` into `cfg.outdir`. On abort the partial outputs are still
/// written, together with a `FAILED` marker, and the error is returned.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<RunOutput> {
    let dir = &cfg.outdir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let marker = dir.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let mut out = simulate(cfg)?;

    write_timeseries(&out.records, cfg.dims(), &dir.join("timeseries.csv"))?;
    let x = AxisGrid::periodic(cfg.nx, cfg.length())?;
    let v = AxisGrid::velocity(cfg.nv, cfg.l_v)?;
    for s in &out.snapshots {
        match &s.solution {
            Solution::Matrix(f) => {
                write_snapshot_1d(f, &x, &v, &dir.join(snapshot_name(s.requested_time, "")))?
            }
            Solution::Tree(f) => write_snapshot_2d(
                f,
                &[x.clone(), x.clone()],
                &[v.clone(), v.clone()],
                (cfg.slice_x1, cfg.slice_x2),
                &dir.join(snapshot_name(s.requested_time, "")),
                &dir.join(snapshot_name(s.requested_time, "_vslice")),
            )?,
        }
    }

    let status = match &out.failure {
        None => "completed".to_string(),
        Some(e) => format!("aborted: {e}"),
    };
    let manifest = dir.join("manifest.txt");
    let mut m = fs::File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let text = format!(
        "# lowrank-vp {}\nstatus = {status}\ndt = {}\nsteps = {} of {}\nwall_time_s = {:.3}\n\n[config]\n{}",
        env!("CARGO_PKG_VERSION"),
        out.dt,
        out.steps_done,
        out.steps_planned,
        out.wall_time.as_secs_f64(),
        cfg.serialize()
    );
    m.write_all(text.as_bytes())
        .map_err(|e| Error::io(&manifest, e))?;

    if let Some(e) = out.failure.take() {
        fs::write(&marker, format!("{e}\n")).map_err(|err| Error::io(&marker, err))?;
        return Err(e);
    }
    Ok(out)
}
