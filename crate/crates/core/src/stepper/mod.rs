//! Time integration with a truncation after every step.
//!
//! The multistep scheme is the three-step, second-order SSP method
//! `u[n+1] = 3/4 u[n] + 1/4 u[n-2] + 3/2 dt F(u[n])`, started with two
//! forward-Euler steps. The combination is formed by exact rank
//! concatenation and truncated once.

mod vp1d;
mod vp2d;

pub use vp1d::{rhs_1d1v, FieldMode, VlasovPoisson1D};
pub use vp2d::{rhs_2d2v, VlasovPoisson2D};

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lowrank::ProjectorLevel;

/// Weight of `u[n]` in the multistep update.
pub const SSPML2_A0: f64 = 0.75;
/// Weight of `u[n-2]`.
pub const SSPML2_A2: f64 = 0.25;
/// Weight of `dt F(u[n])`.
pub const SSPML2_B: f64 = 1.5;
/// Forward-Euler steps taken before the multistep history is available.
pub const BOOTSTRAP_STEPS: usize = 2;
pub const DEFAULT_RANK_CEILING: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationMode {
    /// Moment-preserving truncation.
    Conservative,
    /// Plain SVD / hierarchical SVD truncation.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub mode: TruncationMode,
    pub eps: f64,
    pub level: ProjectorLevel,
}

impl TruncationPolicy {
    pub fn conservative(eps: f64) -> Self {
        Self {
            mode: TruncationMode::Conservative,
            eps,
            level: ProjectorLevel::Full,
        }
    }

    pub fn plain(eps: f64) -> Self {
        Self {
            mode: TruncationMode::Plain,
            eps,
            level: ProjectorLevel::Full,
        }
    }

    pub fn with_level(mut self, level: ProjectorLevel) -> Self {
        self.level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "truncation threshold must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// A semi-discrete system `df/dt = F(f)` in some compressed format.
pub trait Model {
    type State: Clone;
    type Field;

    /// Field consistent with the state (e.g. from a Poisson solve).
    fn field(&self, f: &Self::State) -> Result<Self::Field>;

    /// `a f + b F(f) + c g` without truncation, where `F` uses `field`.
    fn combine(
        &self,
        f: &Self::State,
        field: &Self::Field,
        a: f64,
        b: f64,
        extra: Option<(&Self::State, f64)>,
    ) -> Result<Self::State>;

    fn truncate(&self, f: &Self::State, policy: &TruncationPolicy) -> Result<Self::State>;

    /// Largest rank of the representation.
    fn max_rank(&self, f: &Self::State) -> usize;

    fn is_finite(&self, f: &Self::State) -> bool;
}

/// Solution, multistep history and the field of the current solution.
#[derive(Debug, Clone)]
pub struct StepperState<S, F> {
    pub solution: S,
    /// Earlier solutions, most recent first (`u[n-1]`, `u[n-2]`).
    pub history: VecDeque<S>,
    pub field: F,
    pub step: usize,
    pub time: f64,
    pub dt: f64,
}

/// Drives a [`Model`] with a fixed truncation policy and rank ceiling.
pub struct Integrator<'m, M: Model> {
    model: &'m M,
    policy: TruncationPolicy,
    rank_ceiling: usize,
}

pub type State<M> = StepperState<<M as Model>::State, <M as Model>::Field>;

impl<'m, M: Model> Integrator<'m, M> {
    pub fn new(model: &'m M, policy: TruncationPolicy, rank_ceiling: usize) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            model,
            policy,
            rank_ceiling,
        })
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn model(&self) -> &M {
        self.model
    }

    /// State at `t = 0`; the initial condition is used as given.
    pub fn init(&self, initial: M::State, dt: f64) -> Result<State<M>> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid time step {dt}")));
        }
        let field = self.model.field(&initial)?;
        Ok(StepperState {
            solution: initial,
            history: VecDeque::with_capacity(2),
            field,
            step: 0,
            time: 0.0,
            dt,
        })
    }

    fn finish(&self, mut state: State<M>, next: M::State) -> Result<State<M>> {
        let next = self.model.truncate(&next, &self.policy)?;
        let step = state.step + 1;
        if !self.model.is_finite(&next) {
            return Err(Error::NonFinite { step });
        }
        let rank = self.model.max_rank(&next);
        if rank > self.rank_ceiling {
            return Err(Error::RankCeiling {
                rank,
                ceiling: self.rank_ceiling,
                step,
            });
        }
        state.field = self.model.field(&next)?;
        let prev = std::mem::replace(&mut state.solution, next);
        state.history.push_front(prev);
        state.history.truncate(2);
        state.step = step;
        state.time = step as f64 * state.dt;
        Ok(state)
    }

    /// `u[n+1] = T(u[n] + dt F(u[n]))`.
    pub fn step_forward_euler(&self, state: State<M>) -> Result<State<M>> {
        let next = self
            .model
            .combine(&state.solution, &state.field, 1.0, state.dt, None)?;
        self.finish(state, next)
    }

    /// `u[n+1] = T(3/4 u[n] + 1/4 u[n-2] + 3/2 dt F(u[n]))`.
    pub fn step_sspml2(&self, state: State<M>) -> Result<State<M>> {
        let oldest = state.history.get(1).ok_or_else(|| {
            Error::InvalidArgument("multistep step needs two earlier solutions".into())
        })?;
        let next = self.model.combine(
            &state.solution,
            &state.field,
            SSPML2_A0,
            SSPML2_B * state.dt,
            Some((oldest, SSPML2_A2)),
        )?;
        self.finish(state, next)
    }

    /// Bootstrap with forward Euler, then the multistep method.
    pub fn advance(&self, state: State<M>) -> Result<State<M>> {
        if state.step < BOOTSTRAP_STEPS {
            self.step_forward_euler(state)
        } else {
            self.step_sspml2(state)
        }
    }
}
