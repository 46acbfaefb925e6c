//! Synthetic stochastic objectives with known structure.
//!
//! Every instance provides the noiseless value, analytic gradients where
//! they exist in closed form, the minimum (when known), and a per-sample
//! smoothness constant, so the surrogate-gradient machinery can be
//! validated end to end. Instances are immutable after construction and
//! safe for shared concurrent reads.

mod holdout;
mod quadratic;
mod regression;

pub use holdout::{make_holdout_tune, HoldoutTuneInstance};
pub use quadratic::{
    make_f1, make_f2, make_f3, PlNonConvexInstance, QuadraticInstance, TestbedError,
};
pub use regression::{make_linreg, make_logistic, LinRegInstance, LogisticInstance};
