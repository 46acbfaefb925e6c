//! Budgeted optimization runs and their traces.
//!
//! All optimizers in this crate implement [`Optimizer`] and are driven by
//! [`run_with_budget`], which enforces a shared cost model: a step is
//! taken only if its worst-case evaluation cost still fits in the budget,
//! so the counter never exceeds the budget and ends within one step cost
//! of it. The trace records one row per oracle evaluation, repeating the
//! last known noiseless value until the iterate updates, which puts
//! methods with different per-step costs on a common x-axis.

use nalgebra::DVector;

use crate::oracle::{EvalCounter, OracleError, StochasticObjective};
use crate::Prng;

/// A method driven by the run loop. One run owns one optimizer, one RNG
/// stream, and one counter; cross-run parallelism only.
pub trait Optimizer {
    /// Upper bound on the oracle evaluations a single step may consume.
    fn max_step_cost(&self) -> u64;

    /// Current iterate.
    fn x(&self) -> &DVector<f64>;

    /// Step-size-weighted averaged iterate, when the method tracks one.
    fn x_averaged(&self) -> Option<DVector<f64>> {
        None
    }

    /// Completed iterations.
    fn k(&self) -> u64;

    /// Performs one iteration, charging every evaluation to `counter`.
    fn step(
        &mut self,
        obj: &dyn StochasticObjective,
        rng: &mut Prng,
        counter: &mut EvalCounter,
    ) -> Result<(), OracleError>;
}

/// One row per oracle evaluation: the evaluation index (1-based), the
/// iteration whose value is shown, and the noiseless objective value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRow {
    pub eval: u64,
    pub k: u64,
    pub f_true: f64,
}

/// One row per iteration (plus an initial `k = 0` row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub k: u64,
    /// Noiseless value at the iterate.
    pub f_x: f64,
    /// Noiseless value at the averaged iterate, when tracked.
    pub f_xbar: Option<f64>,
    /// Distance to the known minimizer, when one exists.
    pub dist: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Record per-evaluation rows. Disable for very large budgets where
    /// only per-iteration data is needed.
    pub record_evals: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_evals: true }
    }
}

/// Everything observable about one run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<EvalRow>,
    pub steps: Vec<StepRow>,
    pub final_x: DVector<f64>,
    pub final_x_bar: Option<DVector<f64>>,
    /// Oracle evaluations actually consumed (≤ budget).
    pub evals: u64,
    /// Set when the run aborted on an oracle failure; the trace holds
    /// everything recorded up to that point.
    pub error: Option<String>,
}

impl RunTrace {
    pub fn initial_f(&self) -> f64 {
        self.steps.first().map(|s| s.f_x).unwrap_or(f64::NAN)
    }

    pub fn final_f(&self) -> f64 {
        self.steps.last().map(|s| s.f_x).unwrap_or(f64::NAN)
    }
}

/// Runs `opt` until the next step could exceed `budget` oracle
/// evaluations. Failed steps stop the run; the partial trace is returned
/// with the error annotated.
pub fn run_with_budget(
    opt: &mut dyn Optimizer,
    obj: &dyn StochasticObjective,
    budget: u64,
    rng: &mut Prng,
    options: RunOptions,
) -> RunTrace {
    let minimizer = obj.minimizer();
    let dist_to_min = |x: &DVector<f64>| minimizer.as_ref().map(|m| (x - m).norm());

    let mut counter = EvalCounter::new();
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    let mut error = None;

    let mut f_prev = obj.true_value(opt.x());
    steps.push(StepRow {
        k: 0,
        f_x: f_prev,
        f_xbar: None,
        dist: dist_to_min(opt.x()),
    });

    while counter.count() + opt.max_step_cost() <= budget {
        let before = counter.count();
        let k_prev = opt.k();
        if let Err(e) = opt.step(obj, rng, &mut counter) {
            error = Some(e.to_string());
            break;
        }
        let cost = counter.count() - before;
        let f_new = obj.true_value(opt.x());
        if options.record_evals {
            for j in 1..cost {
                rows.push(EvalRow {
                    eval: before + j,
                    k: k_prev,
                    f_true: f_prev,
                });
            }
            rows.push(EvalRow {
                eval: counter.count(),
                k: opt.k(),
                f_true: f_new,
            });
        }
        let f_xbar = opt.x_averaged().map(|xb| obj.true_value(&xb));
        steps.push(StepRow {
            k: opt.k(),
            f_x: f_new,
            f_xbar,
            dist: dist_to_min(opt.x()),
        });
        f_prev = f_new;
    }

    RunTrace {
        rows,
        steps,
        final_x: opt.x().clone(),
        final_x_bar: opt.x_averaged(),
        evals: counter.count(),
        error,
    }
}
