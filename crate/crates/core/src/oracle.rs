//! Stochastic function-value oracles and surrogate gradients.
//!
//! An objective exposes noisy values `F(x, z)` with `E_Z[F(x, Z)] = f(x)`.
//! The optimizers never see gradients; they build the surrogate
//!
//! ```text
//! ∇_(P,h) F(x, z) = P · D_(P,h)F(x, z),
//! [D_(P,h)F(x, z)]_i = (F(x + h·p^(i), z) − F(x, z)) / h,
//! ```
//!
//! paying exactly `l + 1` oracle evaluations per call (the base value is
//! computed once and shared across all `l` differences). Every evaluation
//! goes through [`counted_eval`] so budget accounting is airtight.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::directions::DirectionMatrix;
use crate::Prng;

/// Below this discretization, forward differences on 64-bit floats are
/// dominated by rounding noise and the run must abort rather than produce
/// garbage silently.
pub const DEFAULT_H_FLOOR: f64 = 1e-12;

/// Objective-specific noise realization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoiseSample {
    /// The objective is deterministic (or the sample is irrelevant).
    Deterministic,
    /// A single data/row index.
    Index(usize),
    /// A mini-batch of indices.
    Indices(Vec<usize>),
}

/// A stochastic objective `F(x, z)` with mean `f(x) = E_Z[F(x, Z)]`.
///
/// `eval` must be pure: repeated calls with identical `(x, z)` return
/// identical values, and implementations must be safe for concurrent
/// read-only evaluation. `true_value`, gradients, and minimizers exist for
/// tracing and validation only; optimizers never call them.
pub trait StochasticObjective: Send + Sync {
    fn dim(&self) -> usize;

    /// Draws a fresh i.i.d. noise realization.
    fn sample_noise(&self, rng: &mut Prng) -> NoiseSample;

    /// The stochastic value `F(x, z)`.
    fn eval(&self, x: &DVector<f64>, z: &NoiseSample) -> f64;

    /// The noiseless value `f(x)`.
    fn true_value(&self, x: &DVector<f64>) -> f64;

    /// `∇F(x, z)` when the objective is differentiable in closed form.
    fn analytic_grad(&self, _x: &DVector<f64>, _z: &NoiseSample) -> Option<DVector<f64>> {
        None
    }

    /// `min f` when known.
    fn min_value(&self) -> Option<f64> {
        None
    }

    /// A smoothness constant `λ` such that every `F(·, z)` has a
    /// `λ`-Lipschitz gradient, when known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// A minimizer `x*` when known and unique (or canonical).
    fn minimizer(&self) -> Option<DVector<f64>> {
        None
    }
}

/// Counts oracle evaluations. Incremented exactly once per `F(x, z)` call.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct EvalCounter {
    count: u64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn tick(&mut self) {
        self.count += 1;
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("discretization h={h:e} at or below the floor {floor:e}")]
    DiscretizationUnderflow { h: f64, floor: f64 },
    #[error("oracle returned a non-finite value at direction {direction:?} (x and z attached)")]
    NonFinite {
        x: DVector<f64>,
        z: NoiseSample,
        /// `None` for the base evaluation, `Some(i)` for direction `i`.
        direction: Option<usize>,
    },
    #[error("objective does not provide an analytic gradient")]
    MissingGradient,
}

/// Evaluates `F(x, z)`, ticks the counter, and rejects non-finite values.
pub fn counted_eval(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    direction: Option<usize>,
    counter: &mut EvalCounter,
) -> Result<f64, OracleError> {
    counter.tick();
    let value = obj.eval(x, z);
    if !value.is_finite() {
        return Err(OracleError::NonFinite {
            x: x.clone(),
            z: z.clone(),
            direction,
        });
    }
    Ok(value)
}

/// The finite-difference surrogate gradient and its raw coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGradient {
    /// `P · fd_coeffs ∈ R^d`.
    pub vector: DVector<f64>,
    /// The forward differences `[D_(P,h)F]_i ∈ R^l`.
    pub fd_coeffs: DVector<f64>,
    /// `F(x, z)`, reused across all differences.
    pub base_value: f64,
}

/// Forward-difference surrogate along the columns of `P`, sharing one
/// noise realization `z` across all evaluations. Costs exactly `l + 1`
/// oracle calls.
pub fn finite_differences(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    p: &DirectionMatrix,
    h: f64,
    counter: &mut EvalCounter,
) -> Result<SurrogateGradient, OracleError> {
    finite_differences_with_floor(obj, x, z, p, h, DEFAULT_H_FLOOR, counter)
}

/// As [`finite_differences`] with an explicit discretization floor.
pub fn finite_differences_with_floor(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    p: &DirectionMatrix,
    h: f64,
    h_floor: f64,
    counter: &mut EvalCounter,
) -> Result<SurrogateGradient, OracleError> {
    assert_eq!(p.dim(), obj.dim(), "direction matrix dimension mismatch");
    if h <= h_floor {
        return Err(OracleError::DiscretizationUnderflow { h, floor: h_floor });
    }
    let base_value = counted_eval(obj, x, z, None, counter)?;
    let l = p.num_directions();
    let mut fd_coeffs = DVector::<f64>::zeros(l);
    let mut shifted = x.clone();
    for i in 0..l {
        shifted.copy_from(x);
        shifted.axpy(h, &p.column(i), 1.0);
        let fi = counted_eval(obj, &shifted, z, Some(i), counter)?;
        fd_coeffs[i] = (fi - base_value) / h;
    }
    let vector = p.apply_coeffs(&fd_coeffs);
    Ok(SurrogateGradient {
        vector,
        fd_coeffs,
        base_value,
    })
}

/// Gaussian-smoothing gradient estimate averaged over `m` directions:
/// `(1/m)·Σ_j [(F(x + h·g_j, z) − F(x, z))/h]·g_j` with `g_j ~ N(0, I)`.
/// Since `E[g gᵀ] = I` no extra normalization is applied. Costs `m + 1`
/// evaluations.
pub fn smoothed_gradient_gaussian(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    h: f64,
    m: usize,
    rng: &mut Prng,
    counter: &mut EvalCounter,
) -> Result<DVector<f64>, OracleError> {
    smoothed_gradient(obj, x, z, h, m, rng, counter, false)
}

/// Uniform-sphere analogue of [`smoothed_gradient_gaussian`]: directions
/// are uniform on the unit sphere and each term is multiplied by `d`,
/// compensating `E[u uᵀ] = I/d`. The cited estimators differ in
/// normalization constants; this is the choice used here, documented
/// rather than claimed faithful to any one of them.
pub fn smoothed_gradient_sphere(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    h: f64,
    m: usize,
    rng: &mut Prng,
    counter: &mut EvalCounter,
) -> Result<DVector<f64>, OracleError> {
    smoothed_gradient(obj, x, z, h, m, rng, counter, true)
}

#[allow(clippy::too_many_arguments)]
fn smoothed_gradient(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    h: f64,
    m: usize,
    rng: &mut Prng,
    counter: &mut EvalCounter,
    sphere: bool,
) -> Result<DVector<f64>, OracleError> {
    assert!(m >= 1, "need at least one direction");
    if h <= DEFAULT_H_FLOOR {
        return Err(OracleError::DiscretizationUnderflow {
            h,
            floor: DEFAULT_H_FLOOR,
        });
    }
    let d = obj.dim();
    let base = counted_eval(obj, x, z, None, counter)?;
    let mut estimate = DVector::<f64>::zeros(d);
    let mut shifted = x.clone();
    for j in 0..m {
        let mut g = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        if sphere {
            let norm = g.norm();
            if norm > 0.0 {
                g.scale_mut((d as f64) / norm);
                // g is now d·u with u uniform on the unit sphere; the d
                // factor makes (F(x+hu)−F(x))/h·(d·u) unbiased as h→0.
                g.scale_mut(1.0 / (d as f64));
            }
        }
        shifted.copy_from(x);
        shifted.axpy(h, &g, 1.0);
        let fj = counted_eval(obj, &shifted, z, Some(j), counter)?;
        let weight = (fj - base) / h * if sphere { d as f64 } else { 1.0 };
        estimate.axpy(weight / m as f64, &g, 1.0);
    }
    Ok(estimate)
}

/// `P Pᵀ ∇F(x, z)`: the exact projection that finite differences converge
/// to as `h → 0`. Validation only; requires an analytic gradient.
pub fn exact_directional_projection(
    obj: &dyn StochasticObjective,
    x: &DVector<f64>,
    z: &NoiseSample,
    p: &DirectionMatrix,
) -> Result<DVector<f64>, OracleError> {
    let grad = obj
        .analytic_grad(x, z)
        .ok_or(OracleError::MissingGradient)?;
    Ok(p.apply_coeffs(&p.project_transpose(&grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::make_spherical;
    use crate::rng_from_seed;

    /// `F(x, z) = cᵀx` regardless of z.
    struct Linear {
        c: DVector<f64>,
    }

    impl StochasticObjective for Linear {
        fn dim(&self) -> usize {
            self.c.len()
        }
        fn sample_noise(&self, _rng: &mut Prng) -> NoiseSample {
            NoiseSample::Deterministic
        }
        fn eval(&self, x: &DVector<f64>, _z: &NoiseSample) -> f64 {
            self.c.dot(x)
        }
        fn true_value(&self, x: &DVector<f64>) -> f64 {
            self.c.dot(x)
        }
        fn analytic_grad(&self, _x: &DVector<f64>, _z: &NoiseSample) -> Option<DVector<f64>> {
            Some(self.c.clone())
        }
    }

    #[test]
    fn counter_increments_l_plus_one() {
        let mut rng = rng_from_seed(1);
        let obj = Linear {
            c: DVector::from_element(6, 1.0),
        };
        let p = make_spherical(6, 4, &mut rng).unwrap();
        let mut counter = EvalCounter::new();
        let x = DVector::zeros(6);
        finite_differences(&obj, &x, &NoiseSample::Deterministic, &p, 1e-6, &mut counter).unwrap();
        assert_eq!(counter.count(), 5);
    }

    #[test]
    fn linear_function_gives_exact_projections() {
        let mut rng = rng_from_seed(2);
        let d = 8;
        let c = DVector::from_fn(d, |i, _| (i as f64 + 1.0) / d as f64);
        let obj = Linear { c: c.clone() };
        let p = make_spherical(d, d, &mut rng).unwrap();
        let mut counter = EvalCounter::new();
        let x = DVector::from_element(d, 0.5);
        let sg =
            finite_differences(&obj, &x, &NoiseSample::Deterministic, &p, 1e-7, &mut counter)
                .unwrap();
        // fd_coeffs[i] = cᵀ p_i exactly up to rounding.
        for i in 0..d {
            let expected = c.dot(&p.column(i));
            assert!((sg.fd_coeffs[i] - expected).abs() < 1e-6);
        }
        // With l = d, PPᵀ = I so the surrogate recovers c.
        assert!((sg.vector - &c).norm() < 1e-6);
    }

    #[test]
    fn underflow_guard_trips() {
        let obj = Linear {
            c: DVector::from_element(3, 1.0),
        };
        let mut rng = rng_from_seed(3);
        let p = make_spherical(3, 2, &mut rng).unwrap();
        let mut counter = EvalCounter::new();
        let x = DVector::zeros(3);
        let err = finite_differences(&obj, &x, &NoiseSample::Deterministic, &p, 1e-13, &mut counter)
            .unwrap_err();
        assert!(matches!(err, OracleError::DiscretizationUnderflow { .. }));
        assert_eq!(counter.count(), 0);
    }

    struct SometimesNan;

    impl StochasticObjective for SometimesNan {
        fn dim(&self) -> usize {
            2
        }
        fn sample_noise(&self, _rng: &mut Prng) -> NoiseSample {
            NoiseSample::Deterministic
        }
        fn eval(&self, x: &DVector<f64>, _z: &NoiseSample) -> f64 {
            if x[0] > 0.5 {
                f64::NAN
            } else {
                x[0]
            }
        }
        fn true_value(&self, x: &DVector<f64>) -> f64 {
            x[0]
        }
    }

    #[test]
    fn non_finite_value_aborts_with_context() {
        let obj = SometimesNan;
        let mut rng = rng_from_seed(4);
        let p = make_spherical(2, 2, &mut rng).unwrap();
        let mut counter = EvalCounter::new();
        let x = DVector::from_element(2, 0.45);
        let err = finite_differences(&obj, &x, &NoiseSample::Deterministic, &p, 0.5, &mut counter)
            .unwrap_err();
        match err {
            OracleError::NonFinite { direction, .. } => assert!(direction.is_some()),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn projection_requires_gradient() {
        struct NoGrad;
        impl StochasticObjective for NoGrad {
            fn dim(&self) -> usize {
                2
            }
            fn sample_noise(&self, _rng: &mut Prng) -> NoiseSample {
                NoiseSample::Deterministic
            }
            fn eval(&self, x: &DVector<f64>, _z: &NoiseSample) -> f64 {
                x.norm_squared()
            }
            fn true_value(&self, x: &DVector<f64>) -> f64 {
                x.norm_squared()
            }
        }
        let mut rng = rng_from_seed(5);
        let p = make_spherical(2, 1, &mut rng).unwrap();
        let err = exact_directional_projection(
            &NoGrad,
            &DVector::zeros(2),
            &NoiseSample::Deterministic,
            &p,
        )
        .unwrap_err();
        assert_eq!(err, OracleError::MissingGradient);
    }
}
