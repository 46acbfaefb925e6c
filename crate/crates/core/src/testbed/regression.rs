//! Data-driven convex objectives: logistic classification on two Gaussian
//! blobs and least squares on a synthetic linear model. The noise
//! realization is a uniformly drawn data index and `F` is the per-point
//! loss, so `E_Z[F(w, Z)]` is exactly the mean loss over the dataset.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::oracle::{NoiseSample, StochasticObjective};
use crate::Prng;

fn index_of(z: &NoiseSample, n: usize) -> usize {
    match z {
        NoiseSample::Index(i) if *i < n => *i,
        other => panic!("dataset objectives sample point indices, got {other:?}"),
    }
}

/// Binary logistic regression, 1000 points in 20 dimensions (500 per
/// class, Gaussian blobs at ±μ with unit covariance).
#[derive(Debug, Clone)]
pub struct LogisticInstance {
    points: Vec<DVector<f64>>,
    labels: Vec<f64>,
    lambda_sample: f64,
}

pub const LOGISTIC_DIM: usize = 20;
pub const LOGISTIC_POINTS_PER_CLASS: usize = 500;

pub fn make_logistic(rng: &mut Prng) -> LogisticInstance {
    let d = LOGISTIC_DIM;
    let offset = 0.7 / (d as f64).sqrt();
    let mu = DVector::from_element(d, offset);
    let mut points = Vec::with_capacity(2 * LOGISTIC_POINTS_PER_CLASS);
    let mut labels = Vec::with_capacity(2 * LOGISTIC_POINTS_PER_CLASS);
    for &label in &[1.0f64, -1.0] {
        for _ in 0..LOGISTIC_POINTS_PER_CLASS {
            let noise = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
            points.push(&mu * label + noise);
            labels.push(label);
        }
    }
    let lambda_sample = points
        .iter()
        .map(|x| x.norm_squared() / 4.0)
        .fold(0.0f64, f64::max);
    LogisticInstance {
        points,
        labels,
        lambda_sample,
    }
}

fn logistic_loss(margin: f64) -> f64 {
    // ln(1 + e^(−m)), stable for both signs.
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticInstance {
    fn point_loss(&self, w: &DVector<f64>, i: usize) -> f64 {
        logistic_loss(self.labels[i] * self.points[i].dot(w))
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }
}

impl StochasticObjective for LogisticInstance {
    fn dim(&self) -> usize {
        LOGISTIC_DIM
    }

    fn sample_noise(&self, rng: &mut Prng) -> NoiseSample {
        NoiseSample::Index(rng.random_range(0..self.points.len()))
    }

    fn eval(&self, w: &DVector<f64>, z: &NoiseSample) -> f64 {
        self.point_loss(w, index_of(z, self.points.len()))
    }

    fn true_value(&self, w: &DVector<f64>) -> f64 {
        let n = self.points.len();
        (0..n).map(|i| self.point_loss(w, i)).sum::<f64>() / n as f64
    }

    fn analytic_grad(&self, w: &DVector<f64>, z: &NoiseSample) -> Option<DVector<f64>> {
        let i = index_of(z, self.points.len());
        let y = self.labels[i];
        let margin = y * self.points[i].dot(w);
        Some(&self.points[i] * (-y * sigmoid(-margin)))
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.lambda_sample)
    }
}

/// Least squares on `y = wᵀx + ε`, 1000 points in 100 dimensions,
/// `ε ~ N(0, 0.01)`.
#[derive(Debug, Clone)]
pub struct LinRegInstance {
    points: Vec<DVector<f64>>,
    targets: Vec<f64>,
    ground_truth: DVector<f64>,
    ols_solution: DVector<f64>,
    ols_value: f64,
    lambda_sample: f64,
}

pub const LINREG_DIM: usize = 100;
pub const LINREG_POINTS: usize = 1000;
pub const LINREG_NOISE_STD: f64 = 0.1;

pub fn make_linreg(rng: &mut Prng) -> LinRegInstance {
    let d = LINREG_DIM;
    let n = LINREG_POINTS;
    let ground_truth = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
    let mut points = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let eps: f64 = rng.sample(StandardNormal);
        targets.push(ground_truth.dot(&x) + LINREG_NOISE_STD * eps);
        points.push(x);
    }
    // Exact minimizer of the empirical MSE, for traces and diagnostics.
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut moment = DVector::<f64>::zeros(d);
    for (x, &y) in points.iter().zip(&targets) {
        gram.syger(1.0, x, x, 1.0);
        moment.axpy(y, x, 1.0);
    }
    gram.fill_upper_triangle_with_lower_triangle();
    let ols_solution = gram
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&moment))
        .unwrap_or_else(|| gram.lu().solve(&moment).expect("gram is invertible"));
    let lambda_sample = points
        .iter()
        .map(|x| 2.0 * x.norm_squared())
        .fold(0.0f64, f64::max);
    let mut inst = LinRegInstance {
        points,
        targets,
        ground_truth,
        ols_solution,
        ols_value: 0.0,
        lambda_sample,
    };
    inst.ols_value = inst.true_value(&inst.ols_solution.clone());
    inst
}

impl LinRegInstance {
    fn residual(&self, w: &DVector<f64>, i: usize) -> f64 {
        self.points[i].dot(w) - self.targets[i]
    }

    pub fn ground_truth(&self) -> &DVector<f64> {
        &self.ground_truth
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }
}

impl StochasticObjective for LinRegInstance {
    fn dim(&self) -> usize {
        LINREG_DIM
    }

    fn sample_noise(&self, rng: &mut Prng) -> NoiseSample {
        NoiseSample::Index(rng.random_range(0..self.points.len()))
    }

    fn eval(&self, w: &DVector<f64>, z: &NoiseSample) -> f64 {
        let r = self.residual(w, index_of(z, self.points.len()));
        r * r
    }

    fn true_value(&self, w: &DVector<f64>) -> f64 {
        let n = self.points.len();
        (0..n).map(|i| self.residual(w, i).powi(2)).sum::<f64>() / n as f64
    }

    fn analytic_grad(&self, w: &DVector<f64>, z: &NoiseSample) -> Option<DVector<f64>> {
        let i = index_of(z, self.points.len());
        Some(&self.points[i] * (2.0 * self.residual(w, i)))
    }

    fn min_value(&self) -> Option<f64> {
        Some(self.ols_value)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.lambda_sample)
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        Some(self.ols_solution.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn logistic_at_zero_is_ln_two() {
        let mut rng = rng_from_seed(1);
        let inst = make_logistic(&mut rng);
        let w = DVector::zeros(LOGISTIC_DIM);
        assert!((inst.true_value(&w) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((inst.eval(&w, &NoiseSample::Index(3)) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn linreg_noise_floor_near_variance() {
        let mut rng = rng_from_seed(2);
        let inst = make_linreg(&mut rng);
        let at_truth = inst.true_value(&inst.ground_truth().clone());
        // Residuals at the ground truth are exactly the ε draws.
        let var = LINREG_NOISE_STD * LINREG_NOISE_STD;
        assert!(
            (at_truth - var).abs() < 0.2 * var,
            "residual variance {at_truth} vs {var}"
        );
        // The empirical minimizer is at least as good.
        assert!(inst.min_value().unwrap() <= at_truth);
    }

    #[test]
    fn linreg_at_zero_matches_brute_force() {
        let mut rng = rng_from_seed(3);
        let inst = make_linreg(&mut rng);
        let w = DVector::zeros(LINREG_DIM);
        let brute: f64 = (0..inst.num_points())
            .map(|i| inst.eval(&w, &NoiseSample::Index(i)))
            .sum::<f64>()
            / inst.num_points() as f64;
        assert!((inst.true_value(&w) - brute).abs() < 1e-9 * brute);
    }
}
