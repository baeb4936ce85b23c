//! Simulation configuration: a flat `key = value` file on top of a problem
//! preset, plus command-line overrides.
//!
//! ```text
//! # comments start with '#'
//! problem = weak_landau_1d
//! nx = 64
//! eps = 1e-5
//! ```
//!
//! The preset named by `problem` supplies every default; other keys override
//! it. Unknown keys, malformed values and constraint violations are errors
//! that name the key.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lowrank::ProjectorLevel;
use crate::stepper::{TruncationMode, TruncationPolicy, DEFAULT_RANK_CEILING};

use super::MomentumReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    WeakLandau1D,
    StrongLandau1D,
    BumpOnTail,
    WeakLandau2D,
    TwoStream2D,
}

impl Problem {
    pub const ALL: [Problem; 5] = [
        Problem::WeakLandau1D,
        Problem::StrongLandau1D,
        Problem::BumpOnTail,
        Problem::WeakLandau2D,
        Problem::TwoStream2D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Problem::WeakLandau1D => "weak_landau_1d",
            Problem::StrongLandau1D => "strong_landau_1d",
            Problem::BumpOnTail => "bump_on_tail",
            Problem::WeakLandau2D => "weak_landau_2d",
            Problem::TwoStream2D => "two_stream_2d",
        }
    }

    /// Number of spatial (and velocity) dimensions.
    pub fn dims(self) -> usize {
        match self {
            Problem::WeakLandau2D | Problem::TwoStream2D => 2,
            _ => 1,
        }
    }

    /// Absolute momentum for data symmetric in `v`, relative otherwise.
    pub fn momentum_report(self) -> MomentumReport {
        match self {
            Problem::BumpOnTail => MomentumReport::Relative,
            _ => MomentumReport::Absolute,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Problem::ALL.iter().map(|p| p.name()).collect();
                format!(
                    "unknown problem `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub problem: Problem,
    /// Points per spatial direction.
    pub nx: usize,
    /// Points per velocity direction.
    pub nv: usize,
    /// Wave number; the spatial period is `2 pi / k`.
    pub k: f64,
    pub alpha: f64,
    /// Beam drift velocity (two-stream).
    pub v0: f64,
    /// Bulk and beam densities, beam velocity and width (bump-on-tail).
    pub n_p: f64,
    pub n_b: f64,
    pub u: f64,
    pub v_t: f64,
    /// Velocity domain `[-l_v, l_v]`.
    pub l_v: f64,
    /// Weight `exp(-v^2 / (2 sigma^2))`.
    pub sigma: f64,
    pub eps: f64,
    pub truncation: TruncationMode,
    pub projector_level: ProjectorLevel,
    pub cfl: f64,
    pub e_bound: f64,
    pub t_end: f64,
    /// Record diagnostics every this many steps (the final step is always
    /// recorded).
    pub output_every: usize,
    /// Progress line on stderr every this many steps.
    pub log_every: usize,
    pub snapshot_times: Vec<f64>,
    /// Spatial indices of the exported 2D2V velocity slice.
    pub slice_x1: usize,
    pub slice_x2: usize,
    pub rank_ceiling: usize,
    pub outdir: PathBuf,
}

/// Keys in serialization order.
pub const KEYS: [&str; 25] = [
    "problem",
    "nx",
    "nv",
    "k",
    "alpha",
    "v0",
    "n_p",
    "n_b",
    "u",
    "v_t",
    "l_v",
    "sigma",
    "eps",
    "truncation",
    "projector_level",
    "cfl",
    "e_bound",
    "t_end",
    "output_every",
    "log_every",
    "snapshot_times",
    "slice_x1",
    "slice_x2",
    "rank_ceiling",
    "outdir",
];

fn parse_value<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("expected {what}, got `{value}`")))
}

impl SimulationConfig {
    /// The preset with its published parameters.
    pub fn preset(problem: Problem) -> Self {
        let inv_sqrt_2pi = 1.0 / (2.0 * PI).sqrt();
        let base = Self {
            problem,
            nx: 64,
            nv: 128,
            k: 0.5,
            alpha: 0.01,
            v0: 2.4,
            n_p: 9.0 / 10.0 * inv_sqrt_2pi,
            n_b: 2.0 / 10.0 * inv_sqrt_2pi,
            u: 4.5,
            v_t: 0.5,
            l_v: 6.0,
            sigma: 1.0,
            eps: 1e-5,
            truncation: TruncationMode::Conservative,
            projector_level: ProjectorLevel::Full,
            cfl: 0.3,
            e_bound: 1.0,
            t_end: 40.0,
            output_every: 1,
            log_every: 100,
            snapshot_times: Vec::new(),
            slice_x1: 0,
            slice_x2: 0,
            rank_ceiling: DEFAULT_RANK_CEILING,
            outdir: PathBuf::from("output"),
        };
        match problem {
            Problem::WeakLandau1D => base,
            Problem::StrongLandau1D => Self {
                alpha: 0.5,
                eps: 1e-3,
                ..base
            },
            Problem::BumpOnTail => Self {
                alpha: 0.04,
                k: 0.3,
                l_v: 8.0,
                sigma: 1.5f64.sqrt(),
                eps: 1e-4,
                snapshot_times: vec![30.0],
                ..base
            },
            Problem::WeakLandau2D => Self {
                nx: 32,
                nv: 64,
                t_end: 20.0,
                ..base
            },
            Problem::TwoStream2D => Self {
                nx: 32,
                nv: 64,
                alpha: 1e-3,
                k: 0.2,
                l_v: 8.0,
                ..base
            },
        }
    }

    pub fn dims(&self) -> usize {
        self.problem.dims()
    }

    /// Spatial period `2 pi / k`.
    pub fn length(&self) -> f64 {
        2.0 * PI / self.k
    }

    pub fn policy(&self) -> TruncationPolicy {
        TruncationPolicy {
            mode: self.truncation,
            eps: self.eps,
            level: self.projector_level,
        }
    }

    /// Set one key from its textual value. `problem` cannot be changed here
    /// because it selects the defaults; see [`SimulationConfig::from_pairs`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let float = |v: &str| parse_value::<f64>(key, v, "a number");
        let uint = |v: &str| parse_value::<usize>(key, v, "a non-negative integer");
        match key {
            "problem" => {
                let p: Problem = value.parse().map_err(|e: String| Error::config(key, e))?;
                if p != self.problem {
                    return Err(Error::config(
                        key,
                        "the problem preset is fixed once chosen",
                    ));
                }
            }
            "nx" => self.nx = uint(value)?,
            "nv" => self.nv = uint(value)?,
            "k" => self.k = float(value)?,
            "alpha" => self.alpha = float(value)?,
            "v0" => self.v0 = float(value)?,
            "n_p" => self.n_p = float(value)?,
            "n_b" => self.n_b = float(value)?,
            "u" => self.u = float(value)?,
            "v_t" => self.v_t = float(value)?,
            "l_v" => self.l_v = float(value)?,
            "sigma" => self.sigma = float(value)?,
            "eps" => self.eps = float(value)?,
            "truncation" => {
                self.truncation = match value {
                    "conservative" => TruncationMode::Conservative,
                    "plain" => TruncationMode::Plain,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected `conservative` or `plain`, got `{value}`"),
                        ))
                    }
                }
            }
            "projector_level" => {
                let level: u8 = parse_value(key, value, "1, 2 or 3")?;
                self.projector_level = ProjectorLevel::from_index(level).ok_or_else(|| {
                    Error::config(key, format!("expected 1, 2 or 3, got {level}"))
                })?;
            }
            "cfl" => self.cfl = float(value)?,
            "e_bound" => self.e_bound = float(value)?,
            "t_end" => self.t_end = float(value)?,
            "output_every" => self.output_every = uint(value)?,
            "log_every" => self.log_every = uint(value)?,
            "snapshot_times" => {
                self.snapshot_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(float)
                    .collect::<Result<_>>()?
            }
            "slice_x1" => self.slice_x1 = uint(value)?,
            "slice_x2" => self.slice_x2 = uint(value)?,
            "rank_ceiling" => self.rank_ceiling = uint(value)?,
            "outdir" => {
                if value.is_empty() {
                    return Err(Error::config(key, "empty path"));
                }
                self.outdir = PathBuf::from(value)
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Build from `(key, value)` pairs; later pairs win. `problem` is
    /// required.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let problem = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "problem")
            .ok_or_else(|| Error::config("problem", "missing (choose a preset)"))?;
        let problem: Problem = problem
            .1
            .trim()
            .parse()
            .map_err(|e: String| Error::config("problem", e))?;
        let mut cfg = Self::preset(problem);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "problem") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// `key=value` lines with all keys in a fixed order.
    pub fn serialize(&self) -> String {
        let times: Vec<String> = self.snapshot_times.iter().map(|t| t.to_string()).collect();
        let values: [String; 25] = [
            self.problem.to_string(),
            self.nx.to_string(),
            self.nv.to_string(),
            self.k.to_string(),
            self.alpha.to_string(),
            self.v0.to_string(),
            self.n_p.to_string(),
            self.n_b.to_string(),
            self.u.to_string(),
            self.v_t.to_string(),
            self.l_v.to_string(),
            self.sigma.to_string(),
            self.eps.to_string(),
            match self.truncation {
                TruncationMode::Conservative => "conservative".into(),
                TruncationMode::Plain => "plain".into(),
            },
            self.projector_level.index().to_string(),
            self.cfl.to_string(),
            self.e_bound.to_string(),
            self.t_end.to_string(),
            self.output_every.to_string(),
            self.log_every.to_string(),
            times.join(","),
            self.slice_x1.to_string(),
            self.slice_x2.to_string(),
            self.rank_ceiling.to_string(),
            self.outdir.display().to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be non-negative and finite, got {v}"),
                ))
            }
        };
        if self.nx < 8 {
            return Err(Error::config(
                "nx",
                format!("need at least 8 points, got {}", self.nx),
            ));
        }
        if self.nv < 8 {
            return Err(Error::config(
                "nv",
                format!("need at least 8 points, got {}", self.nv),
            ));
        }
        for (key, v) in [
            ("k", self.k),
            ("l_v", self.l_v),
            ("sigma", self.sigma),
            ("eps", self.eps),
            ("cfl", self.cfl),
            ("e_bound", self.e_bound),
            ("v_t", self.v_t),
        ] {
            positive(key, v)?;
        }
        for (key, v) in [
            ("alpha", self.alpha),
            ("t_end", self.t_end),
            ("n_p", self.n_p),
            ("n_b", self.n_b),
            ("v0", self.v0),
        ] {
            non_negative(key, v)?;
        }
        if !self.u.is_finite() {
            return Err(Error::config("u", "must be finite"));
        }
        if self.output_every == 0 {
            return Err(Error::config("output_every", "must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every", "must be at least 1"));
        }
        if self.rank_ceiling == 0 {
            return Err(Error::config("rank_ceiling", "must be at least 1"));
        }
        for &t in &self.snapshot_times {
            if !(0.0..=self.t_end).contains(&t) {
                return Err(Error::config(
                    "snapshot_times",
                    format!("{t} is outside [0, t_end = {}]", self.t_end),
                ));
            }
        }
        if self.dims() == 2 {
            if self.truncation == TruncationMode::Conservative
                && self.projector_level != ProjectorLevel::Full
            {
                return Err(Error::config(
                    "projector_level",
                    "2D2V conservative truncation supports level 3 only",
                ));
            }
            if self.slice_x1 >= self.nx {
                return Err(Error::config(
                    "slice_x1",
                    format!("must be below nx = {}", self.nx),
                ));
            }
            if self.slice_x2 >= self.nx {
                return Err(Error::config(
                    "slice_x2",
                    format!("must be below nx = {}", self.nx),
                ));
            }
        }
        Ok(())
    }
}

/// `key = value` pairs of a config text, skipping blanks and `#` comments.
fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_pair(line)
            .ok_or_else(|| Error::Format(format!("line {}: expected `key = value`", n + 1)))?;
        pairs.push((k, v));
    }
    Ok(pairs)
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

/// Read a config file and apply `key=value` overrides on top.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = parse_pairs(&text)?;
    for o in overrides {
        let pair = split_pair(o)
            .ok_or_else(|| Error::Format(format!("override `{o}`: expected `key=value`")))?;
        pairs.push(pair);
    }
    SimulationConfig::from_pairs(&pairs)
}
