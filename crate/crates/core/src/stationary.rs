//! Stationary distributions and the two solvers used to compute them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{NecError, Result};

/// How a stationary vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    Numeric,
    Empirical,
}

/// A probability vector over a fixed state indexing (graphs of a
/// [`StateSpace`](crate::graph::StateSpace) or node counts `1..=n_max`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probs: Vec<f64>,
    pub provenance: Provenance,
    /// Final L1 residual of the solver, when one was run.
    pub residual: Option<f64>,
}

impl StationaryDistribution {
    pub fn new(probs: Vec<f64>, provenance: Provenance) -> Self {
        Self {
            probs,
            provenance,
            residual: None,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.probs.iter().zip(other).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn linf_distance(&self, other: &[f64]) -> f64 {
        self.probs
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Iterates `pi <- pi P` until the L1 change drops below `tol`.
///
/// `left_multiply(pi, out)` must write `pi P` into `out`.
pub fn power_iteration<F>(
    init: &[f64],
    mut left_multiply: F,
    tol: f64,
    max_iterations: usize,
) -> Result<StationaryDistribution>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let total: f64 = init.iter().sum();
    if init.is_empty() || !(total > 0.0) || init.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(NecError::arg(
            "power iteration needs a non-negative, non-zero starting vector",
        ));
    }
    let mut pi: Vec<f64> = init.iter().map(|x| x / total).collect();
    let mut next = vec![0.0; pi.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        left_multiply(&pi, &mut next);
        let mass: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= mass);
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < tol {
            return Ok(StationaryDistribution {
                probs: pi,
                provenance: Provenance::Numeric,
                residual: Some(residual),
            });
        }
    }
    Err(NecError::NoConvergence {
        what: "power iteration",
        iterations: max_iterations,
        residual,
    })
}

/// Solves `pi G = 0`, `sum(pi) = 1` for a square `G` whose rows sum to zero
/// (a rate matrix, or `P - I` for a stochastic `P`).
pub fn solve_null_vector(generator: &DMatrix<f64>) -> Result<StationaryDistribution> {
    let n = generator.nrows();
    if n == 0 || generator.ncols() != n {
        return Err(NecError::arg("generator must be a non-empty square matrix"));
    }
    let mut a = generator.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| NecError::Numeric("stationary system is singular".into()))?;
    if x.iter().any(|&v| v < -1e-10 || !v.is_finite()) {
        return Err(NecError::Numeric(
            "stationary solve produced negative mass; is the chain irreducible?".into(),
        ));
    }
    let mut probs: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let pi = DVector::from_column_slice(&probs);
    let residual = (generator.transpose() * pi).lp_norm(1);
    Ok(StationaryDistribution {
        probs,
        provenance: Provenance::Numeric,
        residual: Some(residual),
    })
}
