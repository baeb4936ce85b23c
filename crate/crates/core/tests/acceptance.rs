//! End-to-end acceptance suite.
//!
//! Every check prints its measurements followed by one PASS/FAIL line, and
//! the process exits non-zero if any check fails. Arguments that do not
//! start with `-` select checks by substring, e.g.
//! `cargo test --test acceptance -- c3 c7`. `LRVP_BLESS=1` rewrites the
//! regression fixtures.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use lowrank_vp::diagnostics::{
    read_grid_csv, simulate, write_snapshot_1d, DiagnosticsRecord, Problem, Ranks, RunOutput,
    SimulationConfig, Solution,
};
use lowrank_vp::htucker::{
    conservative_truncate_2d2v, conservative_truncate_2d2v_unrepaired, LeafOp,
};
use lowrank_vp::poisson::spectral_derivative;
use lowrank_vp::stencil::{Direction, UpwindOperator};
use lowrank_vp::stepper::{
    rhs_1d1v, rhs_2d2v, Integrator, Model, TruncationMode, TruncationPolicy, VlasovPoisson1D,
    VlasovPoisson2D,
};
use lowrank_vp::{conservative_truncate, AxisGrid, HTensor, ProjectorLevel, VBasis1D, VBasis2D};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    pass: bool,
    summary: String,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
        }
    }
}

type Check = fn() -> Outcome;

const CHECKS: [(&str, &str, Check); 9] = [
    (
        "c1_truncation_1d",
        "1: conservative truncation 1D1V",
        c1_truncation_1d,
    ),
    (
        "c2_truncation_2d",
        "2: conservative truncation 2D2V",
        c2_truncation_2d,
    ),
    (
        "c3_weak_landau_1d",
        "3: weak Landau 1D1V",
        c3_weak_landau_1d,
    ),
    (
        "c4_energy_refinement",
        "4: energy error under refinement",
        c4_energy_refinement,
    ),
    (
        "c5_strong_landau",
        "5: strong Landau at large threshold",
        c5_strong_landau,
    ),
    (
        "c6_weak_landau_2d",
        "6: weak Landau 2D2V",
        c6_weak_landau_2d,
    ),
    ("c7_orders", "7: discretization orders", c7_orders),
    (
        "c8_dense_oracles",
        "8: dense oracle equivalence",
        c8_dense_oracles,
    ),
    (
        "fixture_bump_on_tail",
        "bump-on-tail snapshot fixture",
        fixture_bump_on_tail,
    ),
];

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let selected: Vec<_> = CHECKS
        .iter()
        .filter(|(id, _, _)| filters.is_empty() || filters.iter().any(|f| id.contains(f.as_str())))
        .collect();
    let mut results = Vec::new();
    for (id, title, check) in selected {
        println!("--- {title} ({id})");
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Outcome::new(false, "panicked"));
        let secs = start.elapsed().as_secs_f64();
        let line = format!(
            "{} {title}: {} [{secs:.1} s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.summary
        );
        println!("{line}\n");
        results.push((outcome.pass, line));
    }
    println!("=== acceptance summary");
    for (_, line) in &results {
        println!("{line}");
    }
    let failed = results.iter().filter(|(p, _)| !p).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn bless() -> bool {
    std::env::var("LRVP_BLESS").is_ok_and(|v| v == "1")
}

fn run(cfg: &SimulationConfig) -> RunOutput {
    let out = simulate(cfg).expect("invalid configuration");
    if let Some(e) = &out.failure {
        panic!("{} run aborted: {e}", cfg.problem);
    }
    out
}

fn preset(problem: Problem) -> SimulationConfig {
    SimulationConfig {
        log_every: usize::MAX,
        snapshot_times: Vec::new(),
        ..SimulationConfig::preset(problem)
    }
}

fn max_of(records: &[DiagnosticsRecord], f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    records.iter().map(f).fold(0.0, f64::max)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

fn c1_truncation_1d() -> Outcome {
    let x = AxisGrid::periodic(64, 4.0 * PI).unwrap();
    let w = weights(128, 6.0);
    let v = w.axis().clone();
    let basis = VBasis1D::new(&w, ProjectorLevel::Full).unwrap();
    let mut rng = rng(1001);
    let mut worst = [0.0f64; 3];
    let mut cut = 0;
    for i in 0..500 {
        let eps = [1e-2, 1e-3, 1e-5][i % 3];
        let r = rng.gen_range(2..=16);
        let f = random_state_1d(&mut rng, &x, &v, r);
        let t = conservative_truncate(&f, eps, &basis).unwrap();
        if (t.to_dense() - f.to_dense()).norm() > 0.1 * eps {
            cut += 1;
        }
        let dev = t
            .moments(&v)
            .unwrap()
            .relative_deviation(&f.moments(&v).unwrap());
        for k in 0..3 {
            worst[k] = worst[k].max(dev[k]);
        }
    }
    println!("  500 states, truncation error above eps/10 in {cut}");
    println!(
        "  max relative deviation rho {:.2e}  J {:.2e}  kappa {:.2e}",
        worst[0], worst[1], worst[2]
    );
    let max = worst.iter().cloned().fold(0.0, f64::max);
    Outcome::new(
        max <= 1e-12,
        format!("max moment deviation {max:.2e} (limit 1e-12)"),
    )
}

fn c2_truncation_2d() -> Outcome {
    let n = 32;
    let w = weights(n, 6.0);
    let v = w.axis().clone();
    let basis = VBasis2D::new(&w, &w).unwrap();
    let mut rng = rng(2002);
    let mut worst = 0.0f64;
    let mut weakest_ablation = f64::INFINITY;
    let mut smallest_loss = f64::INFINITY;
    for i in 0..100 {
        let mut ranks = [0; 6];
        for r in ranks.iter_mut().take(4) {
            *r = rng.gen_range(6..=9);
        }
        ranks[4] = rng.gen_range(6..=12);
        ranks[5] = rng.gen_range(6..=12);
        let f = random_state_2d(&mut rng, [n; 4], ranks, 0.3, 6.0);
        let eps = [1e-2, 3e-3, 1e-3][i % 3] * f.norm();
        let before = f.moments(&v, &v).unwrap();
        let t = conservative_truncate_2d2v(&f, eps, &basis).unwrap();
        let lost = (t.add(&f.scale(-1.0)).unwrap()).norm();
        smallest_loss = smallest_loss.min(lost / eps);
        let dev = t.moments(&v, &v).unwrap().relative_deviation(&before);
        worst = dev.iter().cloned().fold(worst, f64::max);
        let u = conservative_truncate_2d2v_unrepaired(&f, eps, &basis).unwrap();
        let drift = u.moments(&v, &v).unwrap().relative_deviation(&before);
        weakest_ablation = weakest_ablation.min(drift.iter().cloned().fold(0.0, f64::max));
    }
    println!("  100 states on 32^4, smallest truncation error {smallest_loss:.2e} eps");
    println!("  max relative deviation {worst:.2e}");
    println!("  smallest drift without the repair projection {weakest_ablation:.2e}");
    Outcome::new(
        worst <= 1e-11 && weakest_ablation > 1e-8,
        format!(
            "deviation {worst:.2e} (limit 1e-11); ablation drift >= {weakest_ablation:.2e} (must exceed 1e-8)"
        ),
    )
}

/// Plasma dispersion function from its power series (entire, so it also
/// covers the analytically continued lower half plane).
fn plasma_z(z: Complex64) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 1..400 {
        term *= -2.0 * z * z / (2 * n + 1) as f64;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    Complex64::i() * PI.sqrt() * (-z * z).exp() - 2.0 * z * sum
}

/// Least damped root of the Landau dispersion relation for a unit
/// Maxwellian, `1 + (1 + zeta Z(zeta)) / k^2 = 0` with
/// `zeta = omega / (k sqrt 2)`, by Newton's method.
fn landau_root(k: f64) -> Complex64 {
    let s = k * 2f64.sqrt();
    let mut omega = Complex64::new(1.4, -0.15);
    for _ in 0..50 {
        let zeta = omega / s;
        let z = plasma_z(zeta);
        let d = 1.0 + (1.0 + zeta * z) / (k * k);
        let dz = -2.0 * (1.0 + zeta * z);
        let dd = (z + zeta * dz) / (k * k * s);
        let step = d / dd;
        omega -= step;
        if step.norm() < 1e-14 {
            break;
        }
    }
    omega
}

/// Damping rate from a least-squares line through the local maxima of the
/// electric energy in `[t0, t1]`; the energy decays like `exp(-2 gamma t)`.
fn fitted_rate(records: &[DiagnosticsRecord], t0: f64, t1: f64) -> (f64, usize) {
    let e: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.time, r.electric_energy))
        .collect();
    let peaks: Vec<(f64, f64)> = e
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && (t0..=t1).contains(&w[1].0))
        .map(|w| (w[1].0, w[1].1.ln()))
        .collect();
    let n = peaks.len() as f64;
    let mt = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let my = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (-sxy / sxx / 2.0, peaks.len())
}

fn c3_weak_landau_1d() -> Outcome {
    let cfg = preset(Problem::WeakLandau1D);
    let eps = cfg.eps;
    let cons = run(&cfg);
    let plain = run(&SimulationConfig {
        truncation: TruncationMode::Plain,
        ..cfg.clone()
    });
    let mass = max_of(&cons.records, |r| r.mass_dev.abs());
    let momentum = max_of(&cons.records, |r| r.total_momentum[0].abs());
    let plain_mass = max_of(&plain.records, |r| r.mass_dev.abs());
    let oracle = -landau_root(cfg.k).im;
    let (gamma, peaks) = fitted_rate(&cons.records, 5.0, 25.0);
    let (gamma_plain, _) = fitted_rate(&plain.records, 5.0, 25.0);
    let mass_ok = mass <= 1e-12;
    let momentum_ok = momentum <= 1e-11;
    let plain_ok = (0.01 * eps..=100.0 * eps).contains(&plain_mass);
    let rate_ok = (gamma - oracle).abs() <= 0.1 * oracle;
    println!(
        "  conservative: {} steps, max |mass dev| {mass:.2e} [{}], max |momentum| {momentum:.2e} [{}]",
        cons.steps_done,
        verdict(mass_ok),
        verdict(momentum_ok)
    );
    println!(
        "  plain: max |mass dev| {plain_mass:.2e} = {:.2e} eps, window [0.01, 100] eps [{}]",
        plain_mass / eps,
        verdict(plain_ok)
    );
    println!(
        "  damping: oracle gamma {oracle:.5}, fitted {gamma:.5} over {peaks} peaks ({:+.1}%) [{}], plain run {gamma_plain:.5}",
        100.0 * (gamma - oracle) / oracle,
        verdict(rate_ok)
    );
    Outcome::new(
        mass_ok && momentum_ok && plain_ok && rate_ok,
        format!(
            "mass {mass:.1e}, momentum {momentum:.1e}, plain mass {plain_mass:.1e}, gamma {gamma:.4} vs {oracle:.4}"
        ),
    )
}

fn c4_energy_refinement() -> Outcome {
    let mut devs = Vec::new();
    for (nx, nv) in [(32, 64), (64, 128), (128, 256)] {
        let out = run(&SimulationConfig {
            nx,
            nv,
            output_every: usize::MAX,
            ..preset(Problem::WeakLandau1D)
        });
        let last = out.records.last().unwrap();
        println!(
            "  {nx}x{nv}: energy deviation at t = {} is {:+.3e}",
            last.time, last.energy_dev
        );
        devs.push(last.energy_dev.abs());
    }
    let ok = devs.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        ok,
        format!(
            "|energy dev| {:.2e} -> {:.2e} -> {:.2e}",
            devs[0], devs[1], devs[2]
        ),
    )
}

fn c5_strong_landau() -> Outcome {
    let cfg = SimulationConfig {
        t_end: 30.0,
        ..preset(Problem::StrongLandau1D)
    };
    let coarse = run(&SimulationConfig {
        eps: 1e-3,
        ..cfg.clone()
    });
    let reference = run(&SimulationConfig {
        eps: 1e-5,
        ..cfg.clone()
    });
    let plain = run(&SimulationConfig {
        eps: 1e-3,
        truncation: TruncationMode::Plain,
        ..cfg.clone()
    });
    let gap = |a: &RunOutput| {
        a.records
            .iter()
            .zip(&reference.records)
            .filter(|(r, _)| r.time <= 30.0 + 1e-9)
            .map(|(r, s)| (r.electric_energy.log10() - s.electric_energy.log10()).abs())
            .fold(0.0, f64::max)
    };
    let d = gap(&coarse);
    let d_plain = gap(&plain);
    let mut cons_ok = d <= 0.5;
    for (name, out) in [("eps 1e-3", &coarse), ("eps 1e-5", &reference)] {
        let mass = max_of(&out.records, |r| r.mass_dev.abs());
        let momentum = max_of(&out.records, |r| r.total_momentum[0].abs());
        let ok = mass <= 1e-12 && momentum <= 1e-11;
        cons_ok &= ok;
        println!(
            "  conservative {name}: max rank {}, max |mass dev| {mass:.2e}, max |momentum| {momentum:.2e} [{}]",
            out.records.iter().map(|r| r.ranks.max()).max().unwrap(),
            verdict(ok)
        );
    }
    println!("  max |log10 E_el difference| vs eps 1e-5: conservative eps 1e-3 {d:.3} (limit 0.5)");
    println!("  plain eps 1e-3 (recorded only): {d_plain:.3}");
    Outcome::new(
        cons_ok,
        format!("log10 E_el gap {d:.3} (plain {d_plain:.3})"),
    )
}

fn c6_weak_landau_2d() -> Outcome {
    let cfg = preset(Problem::WeakLandau2D);
    let out = run(&cfg);
    let mass = max_of(&out.records, |r| r.mass_dev.abs());
    let j1 = max_of(&out.records, |r| r.momentum_dev[0].abs());
    let j2 = max_of(&out.records, |r| r.momentum_dev[1].abs());
    let ranks: Vec<(usize, [usize; 6])> = out
        .records
        .iter()
        .map(|r| match &r.ranks {
            Ranks::Tree(t) => (r.step, t.as_array()),
            Ranks::Matrix(_) => unreachable!("2D run"),
        })
        .collect();
    let max_rank = ranks
        .iter()
        .flat_map(|(_, r)| r.iter().copied())
        .max()
        .unwrap();
    let last = ranks.last().unwrap();
    println!(
        "  {} steps, max |mass dev| {mass:.2e}, |J1| {j1:.2e}, |J2| {j2:.2e}",
        out.steps_done
    );
    println!(
        "  final ranks {:?}, max {max_rank} (ceiling {})",
        last.1, cfg.rank_ceiling
    );
    let invariants_ok = mass <= 1e-11 && j1 <= 1e-11 && j2 <= 1e-11;
    let ranks_ok = max_rank < cfg.rank_ceiling;

    let text: String = std::iter::once("step,r1,r2,r3,r4,r12,r34\n".to_string())
        .chain(
            ranks
                .iter()
                .map(|(s, r)| format!("{s},{}\n", r.map(|x| x.to_string()).join(","))),
        )
        .collect();
    let path = fixture("weak_landau_2d_ranks.csv");
    let fixture_ok = if bless() || !path.exists() {
        std::fs::write(&path, &text).unwrap();
        println!("  wrote rank fixture {}", path.display());
        true
    } else {
        let golden = std::fs::read_to_string(&path).unwrap();
        let same = golden == text;
        if !same {
            let first = golden.lines().zip(text.lines()).position(|(a, b)| a != b);
            println!("  rank trajectory differs from fixture (first differing line {first:?})");
        } else {
            println!(
                "  rank trajectory matches fixture ({} records)",
                ranks.len()
            );
        }
        same
    };
    Outcome::new(
        invariants_ok && ranks_ok && fixture_ok,
        format!(
            "mass {mass:.1e}, J1 {j1:.1e}, J2 {j2:.1e}, max rank {max_rank}, fixture {}",
            if fixture_ok { "ok" } else { "differs" }
        ),
    )
}

/// `u_t + u_x = 0` with an exact spatial derivative, so only the time
/// discretization errs.
struct Advection {
    axis: AxisGrid,
}

impl Model for Advection {
    type State = DVector<f64>;
    type Field = ();

    fn field(&self, _: &DVector<f64>) -> lowrank_vp::Result<()> {
        Ok(())
    }

    fn combine(
        &self,
        f: &DVector<f64>,
        _: &(),
        a: f64,
        b: f64,
        extra: Option<(&DVector<f64>, f64)>,
    ) -> lowrank_vp::Result<DVector<f64>> {
        let mut out = f * a - spectral_derivative(f, &self.axis)? * b;
        if let Some((g, c)) = extra {
            out += g * c;
        }
        Ok(out)
    }

    fn truncate(&self, f: &DVector<f64>, _: &TruncationPolicy) -> lowrank_vp::Result<DVector<f64>> {
        Ok(f.clone())
    }

    fn max_rank(&self, _: &DVector<f64>) -> usize {
        1
    }

    fn is_finite(&self, f: &DVector<f64>) -> bool {
        f.iter().all(|x| x.is_finite())
    }
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

fn c7_orders() -> Outcome {
    let u = |x: f64| (x.sin()).exp();
    let du = |x: f64| x.cos() * (x.sin()).exp();
    let mut stencil_ok = true;
    for dir in [Direction::Plus, Direction::Minus] {
        let errors: Vec<f64> = [40, 80, 160, 320]
            .iter()
            .map(|&n| {
                let axis = AxisGrid::periodic(n, 2.0 * PI).unwrap();
                let op = UpwindOperator::for_axis(&axis, dir);
                (op.apply(&axis.map(u)).unwrap() - axis.map(du)).amax()
            })
            .collect();
        let p = orders(&errors);
        stencil_ok &= p.iter().all(|&q| (q - 5.0).abs() <= 0.3);
        println!("  upwind {dir:?}: errors {}, orders {p:.3?}", sci(&errors));
    }

    let axis = AxisGrid::periodic(32, 2.0 * PI).unwrap();
    let model = Advection { axis: axis.clone() };
    let integ = Integrator::new(&model, TruncationPolicy::plain(1.0), 10).unwrap();
    let t_end = 2.0;
    let errors: Vec<f64> = [40, 80, 160, 320]
        .iter()
        .map(|&steps| {
            let dt = t_end / steps as f64;
            let mut s = integ.init(axis.map(f64::sin), dt).unwrap();
            for _ in 0..steps {
                s = integ.advance(s).unwrap();
            }
            (s.solution - axis.map(|x| (x - t_end).sin())).amax()
        })
        .collect();
    let p = orders(&errors);
    let time_ok = p.iter().all(|&q| (q - 2.0).abs() <= 0.2);
    println!("  multistep: errors {}, orders {p:.3?}", sci(&errors));
    Outcome::new(
        stencil_ok && time_ok,
        format!(
            "stencil order 5 +- 0.3 {}, time order 2 +- 0.2 {}",
            verdict(stencil_ok),
            verdict(time_ok)
        ),
    )
}

const ORACLE_TOL: f64 = 1e-11;

struct Oracles {
    worst: f64,
    failures: Vec<String>,
}

impl Oracles {
    fn check(&mut self, name: &str, err: f64, tol: f64) {
        println!("  {name:<40} {err:.2e}");
        if err.is_finite() && err <= tol {
            // checks with their own bound (e.g. the error-to-threshold ratio)
            // stay out of the headline figure
            if tol <= ORACLE_TOL {
                self.worst = self.worst.max(err);
            }
        } else {
            self.failures.push(format!("{name} ({err:.1e})"));
        }
    }
}

fn dense_projection_1d(f: &DMatrix<f64>, basis: &VBasis1D) -> DMatrix<f64> {
    let w = basis.weights();
    let h = w.axis().spacing();
    let mut out = DMatrix::zeros(f.nrows(), f.ncols());
    for (phi, norm) in basis.vectors().iter().zip(basis.norms()) {
        for i in 0..f.nrows() {
            let c: f64 =
                (0..f.ncols()).map(|j| f[(i, j)] * phi[j] * h).sum::<f64>() / (norm * norm);
            for j in 0..f.ncols() {
                out[(i, j)] += c * phi[j] * w.pointwise()[j];
            }
        }
    }
    out
}

fn dense_poisson(rho: &DVector<f64>, axis: &AxisGrid) -> DVector<f64> {
    let n = rho.len();
    let rho0 = rho.mean();
    let base = 2.0 * PI / axis.length();
    let mut e = DVector::zeros(n);
    for m in 1..n {
        if 2 * m == n {
            continue;
        }
        let k = base
            * if m <= n / 2 {
                m as f64
            } else {
                m as f64 - n as f64
            };
        let hat: Complex64 = (0..n)
            .map(|j| {
                (rho[j] - rho0) * Complex64::from_polar(1.0, -2.0 * PI * (m * j) as f64 / n as f64)
            })
            .sum();
        let e_hat = Complex64::new(0.0, -1.0 / k) * hat;
        for j in 0..n {
            e[j] += (e_hat * Complex64::from_polar(1.0, 2.0 * PI * (m * j) as f64 / n as f64)).re
                / n as f64;
        }
    }
    e
}

fn c8_dense_oracles() -> Outcome {
    let mut o = Oracles {
        worst: 0.0,
        failures: Vec::new(),
    };
    let tol = ORACLE_TOL;
    let mut rng = rng(8008);

    // 1D1V at 32 x 32
    let x = AxisGrid::periodic(32, 4.0 * PI).unwrap();
    let w = weights(32, 6.0);
    let v = w.axis().clone();
    let f = random_state_1d(&mut rng, &x, &v, 6);
    let g = random_state_1d(&mut rng, &x, &v, 4);
    let (df, dg) = (dense_1d(&f), dense_1d(&g));
    o.check("matrix: to_dense", rel(&f.to_dense(), &df), tol);
    o.check(
        "matrix: add",
        rel(&f.add(&g).unwrap().to_dense(), &(&df + &dg)),
        tol,
    );
    o.check(
        "matrix: scale",
        rel(&f.scale(-2.5).to_dense(), &(&df * -2.5)),
        tol,
    );
    let a = x.map(|s| 1.0 + s.sin());
    let b = v.map(|s| s * s);
    o.check(
        "matrix: scale_x / scale_v",
        rel(
            &f.scale_x(&a).unwrap().scale_v(&b).unwrap().to_dense(),
            &DMatrix::from_fn(32, 32, |i, j| a[i] * df[(i, j)] * b[j]),
        ),
        tol,
    );
    let dxp = UpwindOperator::for_axis(&x, Direction::Plus);
    o.check(
        "matrix: x operator",
        rel(
            &f.map_x(|c| dxp.apply(c).unwrap()).to_dense(),
            &(dxp.to_dense() * &df),
        ),
        tol,
    );
    let s = f.add(&g).unwrap();
    let ds = dense_1d(&s);
    let eps = 1e-3 * ds.norm();
    o.check(
        "matrix: svd truncation",
        rel(&s.truncate_svd(eps).to_dense(), &dense_truncate(&ds, eps)),
        tol,
    );
    let m = f.moments(&v).unwrap();
    let h = v.spacing();
    let vp = v.points();
    let rho = DVector::from_fn(32, |i, _| (0..32).map(|j| df[(i, j)] * h).sum());
    let cur = DVector::from_fn(32, |i, _| (0..32).map(|j| df[(i, j)] * vp[j] * h).sum());
    let kap = DVector::from_fn(32, |i, _| {
        (0..32).map(|j| df[(i, j)] * 0.5 * vp[j] * vp[j] * h).sum()
    });
    let mrel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).norm() / b.norm();
    o.check(
        "matrix: moments",
        mrel(&m.rho, &rho)
            .max(mrel(&m.current, &cur))
            .max(mrel(&m.kappa, &kap)),
        tol,
    );
    let basis = VBasis1D::new(&w, ProjectorLevel::Full).unwrap();
    let p = dense_projection_1d(&ds, &basis);
    o.check(
        "matrix: moment projection",
        rel(&basis.project(&s).unwrap().to_dense(), &p),
        tol,
    );
    let rem = &ds - &p;
    let sq = w.sqrt_w();
    let scaled = DMatrix::from_fn(32, 32, |i, j| rem[(i, j)] / sq[j]);
    let t = dense_truncate(&scaled, eps);
    let expected = &p + DMatrix::from_fn(32, 32, |i, j| t[(i, j)] * sq[j]);
    o.check(
        "matrix: conservative truncation",
        rel(
            &conservative_truncate(&s, eps, &basis).unwrap().to_dense(),
            &expected,
        ),
        tol,
    );
    let model = VlasovPoisson1D::new(&x, &w).unwrap();
    let field = model.field(&f).unwrap();
    o.check(
        "Poisson 1D vs explicit DFT",
        mrel(&field.e, &dense_poisson(&rho, &x)),
        tol,
    );
    let mats = |axis: &AxisGrid| {
        [Direction::Plus, Direction::Minus].map(|d| UpwindOperator::for_axis(axis, d).to_dense())
    };
    let ([dxp, dxm], [dvp, dvm]) = (mats(&x), mats(&v));
    let e = &field.e;
    let (ap, am) = (&dxp * &df, &dxm * &df);
    let (bp, bm) = (&df * dvp.transpose(), &df * dvm.transpose());
    let expected = DMatrix::from_fn(32, 32, |i, j| {
        -(vp[j].max(0.0) * ap[(i, j)]
            + vp[j].min(0.0) * am[(i, j)]
            + e[i].max(0.0) * bp[(i, j)]
            + e[i].min(0.0) * bm[(i, j)])
    });
    o.check(
        "matrix: Vlasov right-hand side",
        rel(&rhs_1d1v(&model, &f, &field).unwrap().to_dense(), &expected),
        tol,
    );

    // 2D2V at 16^4
    let dims = [16; 4];
    let x = AxisGrid::periodic(16, 4.0 * PI).unwrap();
    let w = weights(16, 6.0);
    let v = w.axis().clone();
    let f = random_state_2d(&mut rng, dims, [3, 4, 3, 2, 5, 4], 0.3, 6.0);
    let g = random_state_2d(&mut rng, dims, [2, 2, 3, 3, 3, 3], 0.3, 6.0);
    let (df, dg) = (dense_2d(&f), dense_2d(&g));
    o.check("tree: to_dense", rel(&f.to_dense().unwrap(), &df), tol);
    o.check(
        "tree: add",
        rel(&f.add(&g).unwrap().to_dense().unwrap(), &(&df + &dg)),
        tol,
    );
    o.check(
        "tree: scale",
        rel(&f.scale(0.75).to_dense().unwrap(), &(&df * 0.75)),
        tol,
    );
    let op = uniform(&mut rng, 16, 16);
    let mut worst_leaf: f64 = 0.0;
    for mode in 0..4 {
        let got = f
            .leaf_apply(mode, LeafOp::Matrix(&op))
            .unwrap()
            .to_dense()
            .unwrap();
        worst_leaf = worst_leaf.max(rel(&got, &mode_apply(&df, dims, mode, &op)));
    }
    o.check("tree: leaf operators", worst_leaf, tol);
    let a1 = v.map(|s| 1.0 + s * s);
    let a2 = v.map(|s| s.cos());
    let scaled = mode_apply(
        &mode_apply(&df, dims, 2, &DMatrix::from_diagonal(&a1)),
        dims,
        3,
        &DMatrix::from_diagonal(&a2),
    );
    o.check(
        "tree: velocity scaling",
        rel(&f.scale_v(&a1, &a2).unwrap().to_dense().unwrap(), &scaled),
        tol,
    );
    o.check(
        "tree: orthogonalize",
        rel(&f.orthogonalize().to_dense().unwrap(), &df),
        tol,
    );
    o.check(
        "tree: lossless truncation",
        rel(&f.truncate(1e-14 * f.norm()).to_dense().unwrap(), &df),
        tol,
    );
    let norm = df.norm();
    o.check("tree: norm", (f.norm() - norm).abs() / norm, tol);
    let eps = 1e-2 * norm;
    let trunc_err = (dense_2d(&f.truncate(eps)) - &df).norm();
    o.check("tree: truncation error / threshold", trunc_err / eps, 1.0);

    let h2 = v.spacing() * v.spacing();
    let vp = v.points();
    let contract = |q: &dyn Fn(usize, usize) -> f64| {
        DMatrix::from_fn(16, 16, |i1, i2| {
            let mut acc = 0.0;
            for i4 in 0..16 {
                for i3 in 0..16 {
                    acc += df[(i1 + 16 * i2, i3 + 16 * i4)] * q(i3, i4) * h2;
                }
            }
            acc
        })
    };
    let m = f.moments(&v, &v).unwrap();
    let expected = [
        contract(&|_, _| 1.0),
        contract(&|a, _| vp[a]),
        contract(&|_, b| vp[b]),
        contract(&|a, b| 0.5 * (vp[a] * vp[a] + vp[b] * vp[b])),
    ];
    let worst_moment = m
        .as_array()
        .iter()
        .zip(&expected)
        .map(|(got, exp)| rel(&got.to_dense(), exp))
        .fold(0.0, f64::max);
    o.check("tree: moments", worst_moment, tol);
    o.check(
        "tree: density",
        rel(&f.density(&v, &v).unwrap().to_dense(), &expected[0]),
        tol,
    );
    let slice = DMatrix::from_fn(16, 16, |i3, i4| df[(3 + 16 * 5, i3 + 16 * i4)]);
    o.check(
        "tree: velocity slice",
        rel(&f.v_slice(3, 5).unwrap(), &slice),
        tol,
    );

    let basis = VBasis2D::new(&w, &w).unwrap();
    let pw = w.pointwise();
    let mut proj = DMatrix::zeros(256, 256);
    for k in 0..4 {
        let e = basis.element(k);
        for row in 0..256 {
            let mut c = 0.0;
            for i4 in 0..16 {
                for i3 in 0..16 {
                    c += df[(row, i3 + 16 * i4)] * e[(i3, i4)] * h2;
                }
            }
            for i4 in 0..16 {
                for i3 in 0..16 {
                    proj[(row, i3 + 16 * i4)] += c * e[(i3, i4)] * pw[i3] * pw[i4];
                }
            }
        }
    }
    o.check(
        "tree: moment projection",
        rel(&basis.project(&f).unwrap().to_dense().unwrap(), &proj),
        tol,
    );
    o.check(
        "tree: lossless conservative truncation",
        rel(
            &conservative_truncate_2d2v(&f, 1e-14 * norm, &basis)
                .unwrap()
                .to_dense()
                .unwrap(),
            &df,
        ),
        tol,
    );

    let model = VlasovPoisson2D::new(&x, &x, &w, &w).unwrap();
    let field = model.field(&f).unwrap();
    let got = rhs_2d2v(&model, &f, &field).unwrap().to_dense().unwrap();
    let mut expected = DMatrix::zeros(256, 256);
    let efield = [&field.e1, &field.e2];
    for c in 0..2 {
        for (s, dir) in [Direction::Plus, Direction::Minus].into_iter().enumerate() {
            let pick = |z: f64| if s == 0 { z.max(0.0) } else { z.min(0.0) };
            let ax = mode_apply(&df, dims, c, &UpwindOperator::for_axis(&x, dir).to_dense());
            let av = mode_apply(
                &df,
                dims,
                2 + c,
                &UpwindOperator::for_axis(&v, dir).to_dense(),
            );
            for i2 in 0..16 {
                for i1 in 0..16 {
                    for i4 in 0..16 {
                        for i3 in 0..16 {
                            let (r, col) = (i1 + 16 * i2, i3 + 16 * i4);
                            let vc = [vp[i3], vp[i4]][c];
                            expected[(r, col)] -=
                                pick(vc) * ax[(r, col)] + pick(efield[c][(i1, i2)]) * av[(r, col)];
                        }
                    }
                }
            }
        }
    }
    o.check("tree: Vlasov right-hand side", rel(&got, &expected), tol);

    let path = std::env::temp_dir().join(format!("lrvp-acceptance-{}.ht", std::process::id()));
    f.save(&path).unwrap();
    let back = HTensor::load(&path).unwrap();
    let _ = std::fs::remove_file(&path);
    o.check(
        "tree: binary round trip",
        if back == f { 0.0 } else { f64::INFINITY },
        0.0,
    );

    if o.failures.is_empty() {
        Outcome::new(
            true,
            format!("worst relative difference {:.2e} (limit 1e-11)", o.worst),
        )
    } else {
        Outcome::new(false, format!("mismatches: {}", o.failures.join(", ")))
    }
}

fn fixture_bump_on_tail() -> Outcome {
    let cfg = SimulationConfig {
        t_end: 30.0,
        snapshot_times: vec![30.0],
        ..preset(Problem::BumpOnTail)
    };
    let out = run(&cfg);
    let Solution::Matrix(f) = &out.snapshots[0].solution else {
        unreachable!("1D run")
    };
    let path = fixture("bump_on_tail_t30.csv");
    if bless() || !path.exists() {
        let x = AxisGrid::periodic(cfg.nx, cfg.length()).unwrap();
        let v = AxisGrid::velocity(cfg.nv, cfg.l_v).unwrap();
        write_snapshot_1d(f, &x, &v, &path).unwrap();
        return Outcome::new(true, format!("wrote {}", path.display()));
    }
    let golden = read_grid_csv(&path).unwrap();
    let diff = (f.to_dense() - &golden.values).amax();
    let mass = max_of(&out.records, |r| r.mass_dev.abs());
    println!("  rank {} at t = 30, max |mass dev| {mass:.2e}", f.rank());
    Outcome::new(
        diff <= 1e-9,
        format!("max |f - golden| {diff:.2e} (limit 1e-9)"),
    )
}
