//! Quadratic targets `f(x) = (1/d)·‖Ax‖²` (full-rank and rank-deficient)
//! and the non-convex variant `f(x) = (1/d)·‖Ax‖² + 3·sin²(cᵀx)` with
//! `Ac = c`.
//!
//! The stochastic model: the noise realization is a uniformly random row
//! index `i`, and `F(x, i) = (a_iᵀx)²` (plus the deterministic sine term
//! for the non-convex case), the minimal completion with
//! `E_Z[F(x, Z)] = f(x)`.
//!
//! Matrices are drawn as `U·diag(σ)·Vᵀ` with Haar-orthogonal factors and
//! singular values linearly spaced at a fixed condition number, scaled so
//! `Σσ² = d²` (the Frobenius mass of a standard Gaussian matrix). A raw
//! Gaussian draw has a heavy mass of near-zero singular values at these
//! sizes, which parks the iterate error on modes no budget can touch;
//! the controlled spectrum keeps desk-scale convergence observable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::directions::make_spherical;
use crate::oracle::{NoiseSample, StochasticObjective};
use crate::Prng;

/// Condition number of the synthetic quadratics' singular spectrum.
pub const SPECTRUM_CONDITION: f64 = 3.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TestbedError {
    #[error("rank {rank} must satisfy 1 <= rank < d (d={d})")]
    InvalidRank { d: usize, rank: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Haar-orthogonal `d×d` factor.
fn haar_orthogonal(d: usize, rng: &mut Prng) -> DMatrix<f64> {
    make_spherical(d, d, rng)
        .expect("square draw cannot fail")
        .matrix()
        .clone()
}

/// `U·diag(σ)·Vᵀ` with σ linearly spaced in `[s, cond·s]` and `Σσ² = d²`.
fn conditioned_square(d: usize, cond: f64, rng: &mut Prng) -> DMatrix<f64> {
    if d == 1 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return DMatrix::from_element(1, 1, sign);
    }
    let u = haar_orthogonal(d, rng);
    let v = haar_orthogonal(d, rng);
    let mut ratios = Vec::with_capacity(d);
    let mut sum_sq = 0.0;
    for i in 0..d {
        let t = i as f64 / (d as f64 - 1.0);
        let r = 1.0 + (cond - 1.0) * t;
        sum_sq += r * r;
        ratios.push(r);
    }
    let s = ((d * d) as f64 / sum_sq).sqrt();
    let sigma = DVector::from_iterator(d, ratios.iter().map(|r| r * s));
    let mut scaled = v.transpose();
    for i in 0..d {
        let mut row = scaled.row_mut(i);
        row *= sigma[i];
    }
    u * scaled
}

fn rows_of(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..a.nrows()).map(|i| a.row(i).transpose()).collect()
}

fn max_row_norm_sq(rows: &[DVector<f64>]) -> f64 {
    rows.iter()
        .map(|r| r.norm_squared())
        .fold(0.0f64, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticKind {
    FullRank,
    RankDeficient,
}

/// `f(x) = (1/d)·‖Ax‖²`, sampled by rows.
#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    a: DMatrix<f64>,
    rows: Vec<DVector<f64>>,
    kind: QuadraticKind,
    /// Per-sample smoothness: `max_i 2‖a_i‖²` (the Hessian of `F(·, i)`
    /// is `2·a_i a_iᵀ`).
    lambda_sample: f64,
    /// Smoothness of the mean objective: `2·σ_max(A)²/d`.
    lambda_mean: f64,
}

impl QuadraticInstance {
    pub fn with_matrix(a: DMatrix<f64>, kind: QuadraticKind) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "A must be square");
        let rows = rows_of(&a);
        let lambda_sample = 2.0 * max_row_norm_sq(&rows);
        let sigma_max = a.singular_values().max();
        let lambda_mean = 2.0 * sigma_max * sigma_max / a.nrows() as f64;
        Self {
            a,
            rows,
            kind,
            lambda_sample,
            lambda_mean,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn kind(&self) -> QuadraticKind {
        self.kind
    }

    /// Smoothness of `f` itself, used by schedule validation.
    pub fn mean_smoothness(&self) -> f64 {
        self.lambda_mean
    }

    fn row(&self, z: &NoiseSample) -> &DVector<f64> {
        match z {
            NoiseSample::Index(i) => &self.rows[*i],
            other => panic!("quadratic objectives sample row indices, got {other:?}"),
        }
    }
}

impl StochasticObjective for QuadraticInstance {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn sample_noise(&self, rng: &mut Prng) -> NoiseSample {
        NoiseSample::Index(rng.random_range(0..self.a.nrows()))
    }

    fn eval(&self, x: &DVector<f64>, z: &NoiseSample) -> f64 {
        let t = self.row(z).dot(x);
        t * t
    }

    fn true_value(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x).norm_squared() / self.a.nrows() as f64
    }

    fn analytic_grad(&self, x: &DVector<f64>, z: &NoiseSample) -> Option<DVector<f64>> {
        let a = self.row(z);
        Some(a * (2.0 * a.dot(x)))
    }

    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.lambda_sample)
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        match self.kind {
            QuadraticKind::FullRank => Some(DVector::zeros(self.dim())),
            // The minimizer set is an affine subspace; no canonical point.
            QuadraticKind::RankDeficient => None,
        }
    }
}

/// Full-rank strongly convex quadratic.
pub fn make_f1(d: usize, rng: &mut Prng) -> Result<QuadraticInstance, TestbedError> {
    if d == 0 {
        return Err(TestbedError::ZeroDimension);
    }
    let a = conditioned_square(d, SPECTRUM_CONDITION, rng);
    Ok(QuadraticInstance::with_matrix(a, QuadraticKind::FullRank))
}

/// Rank-deficient quadratic: `A = B·Π` with `Π` an orthogonal projector
/// onto a random `rank`-dimensional subspace.
pub fn make_f2(d: usize, rank: usize, rng: &mut Prng) -> Result<QuadraticInstance, TestbedError> {
    if d == 0 {
        return Err(TestbedError::ZeroDimension);
    }
    if rank < 1 || rank >= d {
        return Err(TestbedError::InvalidRank { d, rank });
    }
    let b = conditioned_square(d, SPECTRUM_CONDITION, rng);
    let basis = make_spherical(d, rank, rng).expect("dims validated");
    let scale = (rank as f64 / d as f64).sqrt();
    let v = basis.matrix() * scale; // orthonormal columns
    let projector = &v * v.transpose();
    Ok(QuadraticInstance::with_matrix(
        b * projector,
        QuadraticKind::RankDeficient,
    ))
}

/// `f(x) = (1/d)·‖Ax‖² + 3·sin²(cᵀx)` with `Ac = c` for a random unit `c`.
#[derive(Debug, Clone)]
pub struct PlNonConvexInstance {
    quad: QuadraticInstance,
    c: DVector<f64>,
}

impl PlNonConvexInstance {
    pub fn eigenvector(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.quad.matrix()
    }

    pub fn mean_smoothness(&self) -> f64 {
        // Sine-term Hessian is bounded by 6‖c‖² = 6.
        self.quad.mean_smoothness() + 6.0
    }

    fn sine(&self, x: &DVector<f64>) -> f64 {
        let t = self.c.dot(x);
        3.0 * t.sin() * t.sin()
    }
}

impl StochasticObjective for PlNonConvexInstance {
    fn dim(&self) -> usize {
        self.quad.dim()
    }

    fn sample_noise(&self, rng: &mut Prng) -> NoiseSample {
        self.quad.sample_noise(rng)
    }

    fn eval(&self, x: &DVector<f64>, z: &NoiseSample) -> f64 {
        self.quad.eval(x, z) + self.sine(x)
    }

    fn true_value(&self, x: &DVector<f64>) -> f64 {
        self.quad.true_value(x) + self.sine(x)
    }

    fn analytic_grad(&self, x: &DVector<f64>, z: &NoiseSample) -> Option<DVector<f64>> {
        let mut grad = self.quad.analytic_grad(x, z)?;
        let t = self.c.dot(x);
        grad.axpy(3.0 * (2.0 * t).sin(), &self.c, 1.0);
        Some(grad)
    }

    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn smoothness(&self) -> Option<f64> {
        self.quad.smoothness().map(|l| l + 6.0)
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        // A is full rank, so the quadratic part vanishes only at 0, where
        // the sine term vanishes too.
        Some(DVector::zeros(self.dim()))
    }
}

/// Non-convex PL target. `A` acts as the identity on `span(c)` and as a
/// scaled rotation on the orthogonal complement, so `Ac = c` holds to
/// machine precision and the complement curvature is uniform.
pub fn make_f3(d: usize, rng: &mut Prng) -> Result<PlNonConvexInstance, TestbedError> {
    if d == 0 {
        return Err(TestbedError::ZeroDimension);
    }
    let mut c = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
    while c.norm() == 0.0 {
        c = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
    }
    c /= c.norm();

    let a = if d == 1 {
        DMatrix::from_element(1, 1, 1.0)
    } else {
        // Orthonormal basis of the complement of c: project a Gaussian
        // block off c and orthonormalize.
        let mut g = DMatrix::<f64>::from_fn(d, d - 1, |_, _| rng.sample(StandardNormal));
        for j in 0..d - 1 {
            let proj = c.dot(&g.column(j).into_owned());
            let mut col = g.column_mut(j);
            col.axpy(-proj, &c, 1.0);
        }
        let q2 = g.qr().q();
        let rot = haar_orthogonal(d - 1, rng);
        let scale = (d as f64).sqrt();
        &c * c.transpose() + scale * &q2 * rot * q2.transpose()
    };
    Ok(PlNonConvexInstance {
        quad: QuadraticInstance::with_matrix(a, QuadraticKind::FullRank),
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn identity_instance_hand_values() {
        let inst =
            QuadraticInstance::with_matrix(DMatrix::identity(2, 2), QuadraticKind::FullRank);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(inst.true_value(&x), 1.0);
        assert_eq!(inst.eval(&x, &NoiseSample::Index(0)), 1.0);
        assert_eq!(inst.eval(&x, &NoiseSample::Index(1)), 1.0);
        assert_eq!(inst.true_value(&DVector::zeros(2)), 0.0);
    }

    #[test]
    fn f1_minimum_at_origin() {
        let mut rng = rng_from_seed(1);
        let inst = make_f1(10, &mut rng).unwrap();
        let zero = DVector::zeros(10);
        assert_eq!(inst.true_value(&zero), 0.0);
        for i in 0..10 {
            assert_eq!(inst.eval(&zero, &NoiseSample::Index(i)), 0.0);
        }
    }

    #[test]
    fn row_average_equals_true_value() {
        let mut rng = rng_from_seed(2);
        let inst = make_f1(8, &mut rng).unwrap();
        let x = DVector::from_fn(8, |i, _| (i as f64 - 3.0) / 2.0);
        let avg: f64 = (0..8)
            .map(|i| inst.eval(&x, &NoiseSample::Index(i)))
            .sum::<f64>()
            / 8.0;
        assert!((avg - inst.true_value(&x)).abs() < 1e-12 * (1.0 + avg.abs()));
    }

    #[test]
    fn spectrum_is_conditioned_and_scaled() {
        let mut rng = rng_from_seed(3);
        let inst = make_f1(20, &mut rng).unwrap();
        let sv = inst.matrix().singular_values();
        let cond = sv.max() / sv.min();
        assert!((cond - SPECTRUM_CONDITION).abs() < 1e-8);
        let frob_sq: f64 = sv.iter().map(|s| s * s).sum();
        assert!((frob_sq - 400.0).abs() < 1e-6);
    }

    #[test]
    fn f2_rank_and_validation() {
        let mut rng = rng_from_seed(4);
        assert_eq!(
            make_f2(6, 0, &mut rng).unwrap_err(),
            TestbedError::InvalidRank { d: 6, rank: 0 }
        );
        assert_eq!(
            make_f2(6, 6, &mut rng).unwrap_err(),
            TestbedError::InvalidRank { d: 6, rank: 6 }
        );
        let inst = make_f2(6, 3, &mut rng).unwrap();
        let rank = inst.matrix().rank(1e-9);
        assert_eq!(rank, 3);
        assert_eq!(inst.minimizer(), None);
    }

    #[test]
    fn f3_eigen_constraint_and_consistency() {
        let mut rng = rng_from_seed(5);
        let inst = make_f3(12, &mut rng).unwrap();
        let c = inst.eigenvector().clone();
        let residual = (inst.matrix() * &c - &c).norm();
        assert!(residual < 1e-10, "Ac = c residual {residual}");

        // Along t·c both evaluation paths reduce to t²/d + 3·sin²(t).
        for &t in &[0.3f64, 1.0, 2.5] {
            let x = &c * t;
            let expected = t * t / 12.0 + 3.0 * t.sin() * t.sin();
            assert!((inst.true_value(&x) - expected).abs() < 1e-9);
            let avg: f64 = (0..12)
                .map(|i| inst.eval(&x, &NoiseSample::Index(i)))
                .sum::<f64>()
                / 12.0;
            assert!((avg - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn sample_smoothness_dominates_row_hessians() {
        let mut rng = rng_from_seed(6);
        let inst = make_f1(15, &mut rng).unwrap();
        let lambda = inst.smoothness().unwrap();
        for i in 0..15 {
            let row = inst.matrix().row(i).transpose();
            assert!(2.0 * row.norm_squared() <= lambda + 1e-12);
        }
        // The mean objective is smoother than the worst sample.
        assert!(inst.mean_smoothness() <= lambda);
    }
}
