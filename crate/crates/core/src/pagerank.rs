//! PageRank measure over an SDFG's vertex set.
//!
//! The row-stochastic transition matrix spreads each vertex's mass uniformly
//! over its out-neighbors (dangling rows are repaired to the uniform row),
//! a transport term mixes in the uniform distribution, and power iteration
//! from the uniform start vector finds the stationary distribution.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sdfg::Sdfg;

/// Default transport probability.
pub const DEFAULT_TRANSPORT_P: f64 = 0.15;
/// Default L1 stopping tolerance for power iteration.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Residual above which a non-converged result is a hard error.
const MAX_RESIDUAL: f64 = 1e-6;

/// Sparse row-stochastic transition matrix.
#[derive(Debug, Clone)]
pub struct TransitionMatrix<R: Real> {
    pub dimension: usize,
    /// Per-row `(column, probability)` entries; every row sums to 1.
    pub rows: Vec<Vec<(usize, R)>>,
}

impl<R: Real> TransitionMatrix<R> {
    pub fn row(&self, i: usize) -> &[(usize, R)] {
        &self.rows[i]
    }
}

/// Stationary probability measure over graph vertices.
#[derive(Debug, Clone)]
pub struct PageRankMeasure<R: Real> {
    pub probabilities: Vec<R>,
    pub transport_p: R,
    pub iterations_used: usize,
    /// L1 change of the final iteration.
    pub residual: R,
}

impl<R: Real> PageRankMeasure<R> {
    /// Wraps an externally supplied probability vector; used by tests and by
    /// callers evaluating integrals against a fixed measure.
    pub fn from_probabilities(probabilities: Vec<R>, transport_p: R) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let sum: R = probabilities.iter().copied().sum();
        let one = R::one();
        if (sum - one).abs() > R::from_config(1e-9) {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(PageRankMeasure {
            probabilities,
            transport_p,
            iterations_used: 0,
            residual: R::zero(),
        })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Builds the transition matrix of `g`, repairing dangling rows to uniform.
pub fn transition_matrix<R: Real>(g: &Sdfg) -> Result<TransitionMatrix<R>> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut out_neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &g.edges {
        out_neighbors[a].push(b);
    }
    let uniform = R::one() / R::from_usize(n).unwrap();
    let rows = out_neighbors
        .into_iter()
        .map(|neighbors| {
            if neighbors.is_empty() {
                (0..n).map(|j| (j, uniform)).collect()
            } else {
                let share = R::one() / R::from_usize(neighbors.len()).unwrap();
                neighbors.into_iter().map(|j| (j, share)).collect()
            }
        })
        .collect();
    Ok(TransitionMatrix { dimension: n, rows })
}

/// Computes the PageRank measure of `g` by power iteration.
pub fn pagerank<R: Real>(
    g: &Sdfg,
    transport_p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PageRankMeasure<R>> {
    let matrix = transition_matrix::<R>(g)?;
    pagerank_of_matrix(&matrix, transport_p, tol, max_iter)
}

/// Power iteration on a prebuilt transition matrix.
pub fn pagerank_of_matrix<R: Real>(
    matrix: &TransitionMatrix<R>,
    transport_p: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PageRankMeasure<R>> {
    if !(transport_p > 0.0 && transport_p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "transport probability must lie in (0, 1), got {transport_p}"
        )));
    }
    let n = matrix.dimension;
    let p = R::from_config(transport_p);
    let keep = R::one() - p;
    let uniform = R::one() / R::from_usize(n).unwrap();
    let tol = R::from_config(tol);

    let mut current = vec![uniform; n];
    let mut next = vec![R::zero(); n];
    let mut iterations = 0usize;
    let mut residual = R::infinity();

    while iterations < max_iter {
        // next = current * ((1 - p) T + p B)
        let transported = p * uniform;
        for x in next.iter_mut() {
            *x = transported;
        }
        for (i, row) in matrix.rows.iter().enumerate() {
            let mass = keep * current[i];
            for &(j, t) in row {
                next[j] = next[j] + mass * t;
            }
        }
        iterations += 1;
        residual = current
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (*a - *b).abs())
            .sum();
        std::mem::swap(&mut current, &mut next);
        if residual < tol {
            break;
        }
    }

    if residual.to_report() > MAX_RESIDUAL {
        return Err(Error::PageRankDiverged {
            residual: residual.to_report(),
            iterations,
        });
    }

    // Kill rounding drift so the measure sums to 1 exactly enough for the
    // downstream integrals.
    let sum: R = current.iter().copied().sum();
    for x in current.iter_mut() {
        *x = *x / sum;
    }

    Ok(PageRankMeasure {
        probabilities: current,
        transport_p: p,
        iterations_used: iterations,
        residual,
    })
}
