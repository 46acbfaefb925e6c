//! The structured stochastic zeroth-order descent loop.
//!
//! Each step draws a fresh direction matrix `P_k`, samples a fresh noise
//! realization `z_k`, builds the finite-difference surrogate and moves
//!
//! ```text
//! x_{k+1} = x_k − α_{k+1} · P_k D_(P_k, h_{k+1}) F(x_k, z_k).
//! ```
//!
//! Schedules are power laws evaluated from `k = 1` (the `k = 0` step uses
//! `α(1), h(1)`, since `α/k^c` is undefined at zero). A step-size-weighted
//! running average of the iterates is maintained alongside the iterate
//! itself; the average starts at `x_0` with weight `α(1)`.

use nalgebra::DVector;
use thiserror::Error;

use crate::directions::{make_direction_matrix, DirectionKind, DirectionMatrix};
use crate::oracle::{
    finite_differences_with_floor, EvalCounter, NoiseSample, OracleError, StochasticObjective,
    DEFAULT_H_FLOOR,
};
use crate::run::Optimizer;
use crate::Prng;

/// Power-law step-size and discretization schedules:
/// `α(k) = α₀·k^(−c)` (optionally clamped) and `h(k) = h₀·k^(−r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alpha0: f64,
    pub c_exp: f64,
    pub h0: f64,
    pub r_exp: f64,
    /// Optional hard clamp `ᾱ`; `α(k) = min(α₀·k^(−c), ᾱ)`.
    pub alpha_cap: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("schedule constants must be positive (alpha0={alpha0}, h0={h0})")]
    NonPositive { alpha0: f64, h0: f64 },
}

impl Schedule {
    pub fn new(
        alpha0: f64,
        c_exp: f64,
        h0: f64,
        r_exp: f64,
        alpha_cap: Option<f64>,
    ) -> Result<Self, ScheduleError> {
        if alpha0 <= 0.0 || h0 <= 0.0 || alpha_cap.map_or(false, |a| a <= 0.0) {
            return Err(ScheduleError::NonPositive { alpha0, h0 });
        }
        Ok(Self {
            alpha0,
            c_exp,
            h0,
            r_exp,
            alpha_cap,
        })
    }

    /// Step size at iteration `k ≥ 1`.
    pub fn alpha(&self, k: u64) -> f64 {
        debug_assert!(k >= 1, "schedules are evaluated from k = 1");
        let a = self.alpha0 * (k as f64).powf(-self.c_exp);
        match self.alpha_cap {
            Some(cap) => a.min(cap),
            None => a,
        }
    }

    /// Discretization at iteration `k ≥ 1`.
    pub fn h(&self, k: u64) -> f64 {
        debug_assert!(k >= 1, "schedules are evaluated from k = 1");
        self.h0 * (k as f64).powf(-self.r_exp)
    }
}

/// Soft diagnostics for a schedule against the convergence theory.
/// These never stop a run: practical experiments routinely use heuristic
/// constants outside the proven regime.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleWarning {
    /// `α(1) ≥ l/(d·λ)`: the theory's step-size cap is violated.
    StepCapExceeded { alpha1: f64, cap: f64 },
    /// `c ∉ (1/2, 1]`.
    ExponentCOutOfRange { c: f64 },
    /// `r < 1/2`.
    ExponentRTooSmall { r: f64 },
    /// `c + r ≤ 1`, so `α_k·h_k` is not summable.
    ProductNotSummable { c: f64, r: f64 },
}

impl std::fmt::Display for ScheduleWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleWarning::StepCapExceeded { alpha1, cap } => {
                write!(f, "alpha(1)={alpha1:.3e} >= theoretical cap l/(d*lambda)={cap:.3e}")
            }
            ScheduleWarning::ExponentCOutOfRange { c } => {
                write!(f, "step exponent c={c} outside (1/2, 1]")
            }
            ScheduleWarning::ExponentRTooSmall { r } => {
                write!(f, "discretization exponent r={r} below 1/2")
            }
            ScheduleWarning::ProductNotSummable { c, r } => {
                write!(f, "c+r={} <= 1: alpha_k*h_k is not summable", c + r)
            }
        }
    }
}

/// Checks a schedule against the summability and step-cap conditions the
/// convergence results assume. `lambda` is the smoothness constant of the
/// stochastic objective when known.
pub fn validate_schedule(
    sched: &Schedule,
    d: usize,
    l: usize,
    lambda: Option<f64>,
) -> Vec<ScheduleWarning> {
    let mut warnings = Vec::new();
    if let Some(lambda) = lambda {
        let cap = l as f64 / (d as f64 * lambda);
        let alpha1 = sched.alpha(1);
        if alpha1 >= cap {
            warnings.push(ScheduleWarning::StepCapExceeded { alpha1, cap });
        }
    }
    let c = sched.c_exp;
    let r = sched.r_exp;
    if !(c > 0.5 && c <= 1.0) {
        warnings.push(ScheduleWarning::ExponentCOutOfRange { c });
    }
    if r < 0.5 {
        warnings.push(ScheduleWarning::ExponentRTooSmall { r });
    }
    if c + r <= 1.0 {
        warnings.push(ScheduleWarning::ProductNotSummable { c, r });
    }
    warnings
}

/// Iterate, iteration counter, and the running weighted sums behind the
/// averaged iterate `x̄_k = (Σ α_i x_i)/(Σ α_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: DVector<f64>,
    pub k: u64,
    weighted_sum: DVector<f64>,
    weight_total: f64,
}

impl OptimizerState {
    pub fn new(x0: DVector<f64>) -> Self {
        let d = x0.len();
        Self {
            x: x0,
            k: 0,
            weighted_sum: DVector::zeros(d),
            weight_total: 0.0,
        }
    }

    /// The averaged iterate, or `None` before the first step.
    pub fn averaged(&self) -> Option<DVector<f64>> {
        if self.weight_total > 0.0 {
            Some(&self.weighted_sum / self.weight_total)
        } else {
            None
        }
    }

    fn absorb_current(&mut self, weight: f64) {
        self.weighted_sum.axpy(weight, &self.x, 1.0);
        self.weight_total += weight;
    }
}

/// One update with an explicit direction matrix and noise sample. The
/// public stepper draws both; this entry point exists so the update
/// arithmetic can be pinned down in tests.
pub fn sszd_step_with(
    state: &mut OptimizerState,
    obj: &dyn StochasticObjective,
    p: &DirectionMatrix,
    z: &NoiseSample,
    alpha: f64,
    h: f64,
    h_floor: f64,
    counter: &mut EvalCounter,
) -> Result<(), OracleError> {
    let surrogate = finite_differences_with_floor(obj, &state.x, z, p, h, h_floor, counter)?;
    state.absorb_current(alpha);
    state.x.axpy(-alpha, &surrogate.vector, 1.0);
    state.k += 1;
    Ok(())
}

/// The structured stochastic zeroth-order descent optimizer.
#[derive(Debug, Clone)]
pub struct Sszd {
    kind: DirectionKind,
    l: usize,
    schedule: Schedule,
    h_floor: f64,
    state: OptimizerState,
}

impl Sszd {
    pub fn new(kind: DirectionKind, l: usize, schedule: Schedule, x0: DVector<f64>) -> Self {
        assert!(l >= 1 && l <= x0.len(), "need 1 <= l <= d");
        Self {
            kind,
            l,
            schedule,
            h_floor: DEFAULT_H_FLOOR,
            state: OptimizerState::new(x0),
        }
    }

    pub fn with_h_floor(mut self, h_floor: f64) -> Self {
        self.h_floor = h_floor;
        self
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn num_directions(&self) -> usize {
        self.l
    }
}

impl Optimizer for Sszd {
    fn max_step_cost(&self) -> u64 {
        self.l as u64 + 1
    }

    fn x(&self) -> &DVector<f64> {
        &self.state.x
    }

    fn x_averaged(&self) -> Option<DVector<f64>> {
        self.state.averaged()
    }

    fn k(&self) -> u64 {
        self.state.k
    }

    fn step(
        &mut self,
        obj: &dyn StochasticObjective,
        rng: &mut Prng,
        counter: &mut EvalCounter,
    ) -> Result<(), OracleError> {
        let p = make_direction_matrix(self.kind, obj.dim(), self.l, rng)
            .expect("dimensions validated at construction");
        let z = obj.sample_noise(rng);
        let k_next = self.state.k + 1;
        sszd_step_with(
            &mut self.state,
            obj,
            &p,
            &z,
            self.schedule.alpha(k_next),
            self.schedule.h(k_next),
            self.h_floor,
            counter,
        )
    }
}
