//! Stochastic zeroth-order optimization on structured random directions.
//!
//! The central algorithm approximates a stochastic gradient by forward
//! finite differences along the columns of a random direction matrix
//! `P ∈ R^{d×l}` with `PᵀP = (d/l)·I` almost surely and `E[PPᵀ] = I`,
//! then descends along `P · D_{(P,h)}F(x, z)`. The crate also ships the
//! direct-search and smoothing baselines that the benchmark harness
//! compares against, and a synthetic testbed of stochastic objectives
//! with known minima and analytic gradients for validation.
//!
//! Everything is deterministic given a seed: all randomness flows through
//! an injected [`rand_chacha::ChaCha8Rng`], and repeated runs with the
//! same seed produce bit-identical traces.
//!
//! The `parallel` feature (on by default) backs [`exec`] with rayon so
//! callers can fan independent runs out over threads; with the feature
//! disabled the same entry points run serially.

pub mod baselines;
pub mod directions;
pub mod exec;
pub mod oracle;
pub mod run;
pub mod sszd;
pub mod testbed;

pub use directions::{
    make_coordinate, make_direction_matrix, make_spherical, verify_structure, DirectionError,
    DirectionKind, DirectionMatrix,
};
pub use oracle::{
    counted_eval, exact_directional_projection, finite_differences, finite_differences_with_floor,
    smoothed_gradient_gaussian, smoothed_gradient_sphere, EvalCounter, NoiseSample, OracleError,
    StochasticObjective, SurrogateGradient, DEFAULT_H_FLOOR,
};
pub use run::{run_with_budget, EvalRow, Optimizer, RunOptions, RunTrace, StepRow};
pub use sszd::{validate_schedule, OptimizerState, Schedule, ScheduleWarning, Sszd};

/// Seeded PRNG used throughout the crate. ChaCha8 has a stable stream
/// across platforms and versions, which is what makes traces reproducible.
pub type Seed = u64;
pub type Prng = rand_chacha::ChaCha8Rng;

/// Builds the crate-wide PRNG from a seed.
pub fn rng_from_seed(seed: Seed) -> Prng {
    use rand::SeedableRng;
    Prng::seed_from_u64(seed)
}
