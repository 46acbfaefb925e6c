//! Structured random direction matrices.
//!
//! A direction matrix `P ∈ R^{d×l}` (columns are the search directions)
//! must satisfy, for `1 ≤ l ≤ d`,
//!
//! ```text
//! PᵀP = (d/l)·I_l   almost surely,      E[PPᵀ] = I_d .
//! ```
//!
//! Two constructions are provided:
//!
//! * **Coordinate**: `l` distinct canonical basis vectors sampled without
//!   replacement, each sign-flipped with probability 1/2 and scaled by
//!   `√(d/l)`.
//! * **Spherical**: the first `l` columns of a Haar-distributed random
//!   orthogonal matrix, scaled by `√(d/l)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::Prng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DirectionError {
    #[error("direction count l={l} must satisfy 1 <= l <= d (d={d})")]
    InvalidDimensions { d: usize, l: usize },
    #[error("random factor stayed rank-deficient after {attempts} attempts")]
    DegenerateDraw { attempts: usize },
}

/// The two direction-generation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionKind {
    Coordinate,
    Spherical,
}

impl DirectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DirectionKind::Coordinate => "coordinate",
            DirectionKind::Spherical => "spherical",
        }
    }
}

impl std::str::FromStr for DirectionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "coordinate" => Ok(DirectionKind::Coordinate),
            "spherical" => Ok(DirectionKind::Spherical),
            other => Err(format!(
                "unknown direction kind '{other}' (expected 'coordinate' or 'spherical')"
            )),
        }
    }
}

impl std::fmt::Display for DirectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A `d×l` matrix whose column `i` is the search direction `p^(i)`.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMatrix {
    entries: DMatrix<f64>,
}

impl DirectionMatrix {
    /// Wraps an explicit matrix. Only the shape is validated here; use
    /// [`verify_structure`] to check the orthogonality invariant.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self, DirectionError> {
        let (d, l) = entries.shape();
        if l < 1 || l > d {
            return Err(DirectionError::InvalidDimensions { d, l });
        }
        Ok(Self { entries })
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of directions `l`.
    pub fn num_directions(&self) -> usize {
        self.entries.ncols()
    }

    /// The common squared column norm `d/l`.
    pub fn scale(&self) -> f64 {
        self.dim() as f64 / self.num_directions() as f64
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.entries.column(i).into_owned()
    }

    /// `P v` for coefficients `v ∈ R^l`.
    pub fn apply_coeffs(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }

    /// `Pᵀ w` for `w ∈ R^d`.
    pub fn project_transpose(&self, w: &DVector<f64>) -> DVector<f64> {
        self.entries.tr_mul(w)
    }

    /// The Gram matrix `PᵀP`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.entries.tr_mul(&self.entries)
    }

    /// The outer product `PPᵀ`.
    pub fn outer(&self) -> DMatrix<f64> {
        &self.entries * self.entries.transpose()
    }
}

/// Returns true iff `max |PᵀP − (d/l)·I| ≤ tol` entrywise.
pub fn verify_structure(p: &DirectionMatrix, tol: f64) -> bool {
    let gram = p.gram();
    let scale = p.scale();
    let l = p.num_directions();
    let mut worst = 0.0f64;
    for i in 0..l {
        for j in 0..l {
            let target = if i == j { scale } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst <= tol
}

fn check_dims(d: usize, l: usize) -> Result<(), DirectionError> {
    if d == 0 || l < 1 || l > d {
        return Err(DirectionError::InvalidDimensions { d, l });
    }
    Ok(())
}

/// Coordinate directions: `l` distinct signed scaled basis vectors.
///
/// Index selection is a Fisher–Yates prefix shuffle of `[0, d)`, so the
/// draw is uniform over index subsets; each selected column is
/// `±√(d/l)·e_j` with an independent fair sign.
pub fn make_coordinate(d: usize, l: usize, rng: &mut Prng) -> Result<DirectionMatrix, DirectionError> {
    check_dims(d, l)?;
    let mut indices: Vec<usize> = (0..d).collect();
    for i in 0..l {
        let j = rng.random_range(i..d);
        indices.swap(i, j);
    }
    let scale = ((d as f64) / (l as f64)).sqrt();
    let mut entries = DMatrix::<f64>::zeros(d, l);
    for (col, &idx) in indices[..l].iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        entries[(idx, col)] = sign * scale;
    }
    let p = DirectionMatrix { entries };
    debug_assert!(verify_structure(&p, 1e-12));
    Ok(p)
}

/// Spherical directions: orthonormal columns uniform on the Stiefel
/// manifold, scaled by `√(d/l)`.
///
/// Draws a `d×l` block of i.i.d. standard normals and takes the thin QR
/// factor. Raw QR is not Haar-distributed: the factorization is only
/// unique up to column signs, so each column of `Q` is multiplied by
/// `sign(R_jj)` (with `sign(0) = +1`), which pins the representative with
/// a positive-diagonal `R` and makes the law exactly Haar. The first `l`
/// columns of a full `d×d` factorization depend only on the first `l`
/// columns of the input, so factoring the `d×l` block directly yields the
/// same distribution as truncating a full square factorization.
pub fn make_spherical(d: usize, l: usize, rng: &mut Prng) -> Result<DirectionMatrix, DirectionError> {
    check_dims(d, l)?;
    const MAX_ATTEMPTS: usize = 5;
    for _ in 0..MAX_ATTEMPTS {
        let z = DMatrix::<f64>::from_fn(d, l, |_, _| rng.sample(StandardNormal));
        let qr = z.qr();
        let r = qr.r();
        // A zero on R's diagonal means the Gaussian block was rank
        // deficient (probability zero); redraw.
        if (0..l).any(|j| r[(j, j)] == 0.0 || !r[(j, j)].is_finite()) {
            continue;
        }
        let mut q = qr.q();
        let scale = ((d as f64) / (l as f64)).sqrt();
        for j in 0..l {
            let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
            let mut col = q.column_mut(j);
            col *= sign * scale;
        }
        let p = DirectionMatrix { entries: q };
        debug_assert!(verify_structure(&p, 1e-9));
        return Ok(p);
    }
    Err(DirectionError::DegenerateDraw {
        attempts: MAX_ATTEMPTS,
    })
}

/// Dispatches on [`DirectionKind`].
pub fn make_direction_matrix(
    kind: DirectionKind,
    d: usize,
    l: usize,
    rng: &mut Prng,
) -> Result<DirectionMatrix, DirectionError> {
    match kind {
        DirectionKind::Coordinate => make_coordinate(d, l, rng),
        DirectionKind::Spherical => make_spherical(d, l, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn coordinate_d1_is_signed_unit() {
        for seed in 0..16 {
            let mut rng = rng_from_seed(seed);
            let p = make_coordinate(1, 1, &mut rng).unwrap();
            let v = p.matrix()[(0, 0)];
            assert!(v == 1.0 || v == -1.0, "got {v}");
        }
    }

    #[test]
    fn spherical_d1_is_signed_unit() {
        let mut seen_pos = false;
        let mut seen_neg = false;
        for seed in 0..32 {
            let mut rng = rng_from_seed(seed);
            let p = make_spherical(1, 1, &mut rng).unwrap();
            let v = p.matrix()[(0, 0)];
            assert!((v.abs() - 1.0).abs() < 1e-14, "got {v}");
            seen_pos |= v > 0.0;
            seen_neg |= v < 0.0;
        }
        assert!(seen_pos && seen_neg, "sign correction killed one sign");
    }

    #[test]
    fn coordinate_columns_are_signed_scaled_basis_vectors() {
        let mut rng = rng_from_seed(7);
        let p = make_coordinate(4, 2, &mut rng).unwrap();
        let scale = 2.0f64.sqrt();
        let mut support = Vec::new();
        for col in 0..2 {
            let mut nonzero = Vec::new();
            for row in 0..4 {
                let v = p.matrix()[(row, col)];
                if v != 0.0 {
                    nonzero.push((row, v));
                }
            }
            assert_eq!(nonzero.len(), 1, "column {col} must touch one coordinate");
            let (row, v) = nonzero[0];
            assert!((v.abs() - scale).abs() < 1e-15);
            support.push(row);
        }
        support.dedup();
        assert_eq!(support.len(), 2, "indices sampled without replacement");
        // PᵀP = (d/l)·I exactly for coordinate constructions.
        let gram = p.gram();
        assert_eq!(gram[(0, 0)], 2.0);
        assert_eq!(gram[(1, 1)], 2.0);
        assert_eq!(gram[(0, 1)], 0.0);
    }

    #[test]
    fn square_spherical_is_orthogonal() {
        let mut rng = rng_from_seed(3);
        let p = make_spherical(10, 10, &mut rng).unwrap();
        let outer = p.outer();
        for i in 0..10 {
            for j in 0..10 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((outer[(i, j)] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_dims() {
        let mut rng = rng_from_seed(0);
        assert_eq!(
            make_coordinate(3, 4, &mut rng).unwrap_err(),
            DirectionError::InvalidDimensions { d: 3, l: 4 }
        );
        assert_eq!(
            make_spherical(3, 0, &mut rng).unwrap_err(),
            DirectionError::InvalidDimensions { d: 3, l: 0 }
        );
        assert!(DirectionMatrix::from_matrix(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn verify_structure_flags_zeroed_column() {
        let mut rng = rng_from_seed(11);
        let p = make_coordinate(6, 3, &mut rng).unwrap();
        assert!(verify_structure(&p, 1e-10));
        let mut broken = p.matrix().clone();
        broken.column_mut(1).fill(0.0);
        let broken = DirectionMatrix::from_matrix(broken).unwrap();
        assert!(!verify_structure(&broken, 1e-10));
    }
}
