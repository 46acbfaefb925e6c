//! Hold-out hyper-parameter tuning as a black-box objective.
//!
//! The outer variables are log-scale: one length-scale per feature plus a
//! ridge regularizer, `θ = (log σ_1, …, log σ_p, log λ)`. The inner
//! problem fits ridge regression on features scaled by `1/σ` in closed
//! form using the training split; the outer objective is the validation
//! mean squared error of that fit. The stochastic oracle evaluates the
//! loss on a random validation mini-batch, so its mean over batches is
//! exactly the full validation loss.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::oracle::{NoiseSample, StochasticObjective};
use crate::Prng;

pub const HOLDOUT_FEATURES: usize = 6;
pub const HOLDOUT_TRAIN: usize = 200;
pub const HOLDOUT_VAL: usize = 50;
pub const HOLDOUT_BATCH: usize = 10;
/// Regularizer floor applied inside the inner solve.
pub const REG_FLOOR: f64 = 1e-10;
/// Log-parameters are clamped to this magnitude inside `eval` so the
/// objective stays finite for every real input.
const LOG_CLAMP: f64 = 150.0;

#[derive(Debug, Clone)]
pub struct HoldoutTuneInstance {
    x_train: DMatrix<f64>,
    y_train: DVector<f64>,
    x_val: DMatrix<f64>,
    y_val: DVector<f64>,
    /// Cached `XᵀX` and `Xᵀy` of the training split; per-feature scaling
    /// only rescales these, so the inner solve is O(p³) per call.
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    batch: usize,
}

/// Synthetic tuning problem: heterogeneous feature scales and mixed
/// relevance, so the unit initialization over-shrinks the informative
/// features and tuning has real headroom.
pub fn make_holdout_tune(rng: &mut Prng) -> HoldoutTuneInstance {
    let p = HOLDOUT_FEATURES;
    let scales = [0.5, 1.0, 2.0, 4.0, 1.0, 0.5];
    let coeffs = [2.0, 1.0, 0.5, 0.0, 0.0, -1.0];
    let noise_std = 0.3;
    let n = HOLDOUT_TRAIN + HOLDOUT_VAL;
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut y = DVector::<f64>::zeros(n);
    for i in 0..n {
        let mut target = 0.0;
        for j in 0..p {
            let v: f64 = rng.sample(StandardNormal);
            let v = v * scales[j];
            x[(i, j)] = v;
            target += coeffs[j] * v;
        }
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = target + noise_std * eps;
    }
    let x_train = x.rows(0, HOLDOUT_TRAIN).into_owned();
    let y_train = y.rows(0, HOLDOUT_TRAIN).into_owned();
    let x_val = x.rows(HOLDOUT_TRAIN, HOLDOUT_VAL).into_owned();
    let y_val = y.rows(HOLDOUT_TRAIN, HOLDOUT_VAL).into_owned();
    HoldoutTuneInstance::from_parts(x_train, y_train, x_val, y_val, HOLDOUT_BATCH)
}

impl HoldoutTuneInstance {
    pub fn from_parts(
        x_train: DMatrix<f64>,
        y_train: DVector<f64>,
        x_val: DMatrix<f64>,
        y_val: DVector<f64>,
        batch: usize,
    ) -> Self {
        assert_eq!(x_train.nrows(), y_train.len());
        assert_eq!(x_val.nrows(), y_val.len());
        assert_eq!(x_train.ncols(), x_val.ncols());
        assert!(batch >= 1 && batch <= y_val.len());
        let gram = x_train.tr_mul(&x_train);
        let moment = x_train.tr_mul(&y_train);
        Self {
            x_train,
            y_train,
            x_val,
            y_val,
            gram,
            moment,
            batch,
        }
    }

    pub fn num_features(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn validation_targets(&self) -> &DVector<f64> {
        &self.y_val
    }

    /// Solves the scaled ridge problem and returns the weights expressed
    /// against the *raw* features (scaling folded in).
    fn effective_weights(&self, theta: &DVector<f64>) -> DVector<f64> {
        let p = self.num_features();
        let n = self.x_train.nrows() as f64;
        let inv_scale =
            DVector::<f64>::from_fn(p, |j, _| (-theta[j].clamp(-LOG_CLAMP, LOG_CLAMP)).exp());
        let lambda = theta[p].clamp(-LOG_CLAMP, LOG_CLAMP).exp().max(REG_FLOOR);
        // (1/n)·D⁻¹ Xᵀ X D⁻¹ + λI, with D = diag(σ).
        let mut system = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                system[(i, j)] = self.gram[(i, j)] * inv_scale[i] * inv_scale[j] / n;
            }
            system[(i, i)] += lambda;
        }
        let rhs = DVector::<f64>::from_fn(p, |j, _| self.moment[j] * inv_scale[j] / n);
        let w = system
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .unwrap_or_else(|| {
                system
                    .lu()
                    .solve(&rhs)
                    .unwrap_or_else(|| DVector::zeros(p))
            });
        // Predictions use w·(x/σ) = (D⁻¹w)·x.
        DVector::from_fn(p, |j, _| w[j] * inv_scale[j])
    }

    fn val_residual(&self, w_eff: &DVector<f64>, i: usize) -> f64 {
        let mut pred = 0.0;
        for j in 0..self.num_features() {
            pred += self.x_val[(i, j)] * w_eff[j];
        }
        pred - self.y_val[i]
    }
}

impl StochasticObjective for HoldoutTuneInstance {
    fn dim(&self) -> usize {
        self.num_features() + 1
    }

    fn sample_noise(&self, rng: &mut Prng) -> NoiseSample {
        let n = self.y_val.len();
        NoiseSample::Indices((0..self.batch).map(|_| rng.random_range(0..n)).collect())
    }

    fn eval(&self, theta: &DVector<f64>, z: &NoiseSample) -> f64 {
        let idx = match z {
            NoiseSample::Indices(idx) => idx,
            other => panic!("hold-out tuning samples validation batches, got {other:?}"),
        };
        let w_eff = self.effective_weights(theta);
        idx.iter()
            .map(|&i| self.val_residual(&w_eff, i).powi(2))
            .sum::<f64>()
            / idx.len() as f64
    }

    fn true_value(&self, theta: &DVector<f64>) -> f64 {
        let w_eff = self.effective_weights(theta);
        let n = self.y_val.len();
        (0..n)
            .map(|i| self.val_residual(&w_eff, i).powi(2))
            .sum::<f64>()
            / n as f64
    }
}
