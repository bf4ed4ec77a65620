//! Lp similarity between integration vectorizations of labeled graphs.
//!
//! A graph maps to the concatenation of its catalog antiderivatives
//! (catalog-major, threshold-minor); the similarity of two graphs under one
//! schema is the Lp distance between their vectors. The map is not injective,
//! so this is a similarity measure rather than a metric: graphs the catalog
//! cannot distinguish sit at distance zero.

use crate::config::VectorizeConfig;
use crate::error::{Error, Result};
use crate::integrate::antiderivative;
use crate::pagerank::pagerank;
use crate::scalar::Real;
use crate::sdfg::Sdfg;
use crate::vectorize::FileVector;

/// Integration vectorization of a single graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphVector<R: Real> {
    pub graph_id: String,
    pub schema_hash: String,
    /// `|catalog| * |partition|` coordinates.
    pub values: Vec<R>,
}

/// Maps one graph to its antiderivative coordinates under `cfg`.
pub fn vectorize_graph<R: Real>(g: &Sdfg, cfg: &VectorizeConfig) -> Result<GraphVector<R>> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let catalog = cfg.catalog::<R>();
    let partition = cfg.partition_checked::<R>()?;
    let mu = pagerank::<R>(g, cfg.transport_p, cfg.pagerank_tol, cfg.pagerank_max_iter)?;
    let mut values = Vec::with_capacity(catalog.len() * partition.len());
    for f in &catalog {
        values.extend(antiderivative(g, &mu, f, &partition).values);
    }
    Ok(GraphVector {
        graph_id: g.function_name.clone(),
        schema_hash: cfg.schema_hash(),
        values,
    })
}

/// Lp distance between two graph vectorizations under the same schema.
pub fn graph_similarity<R: Real>(a: &GraphVector<R>, b: &GraphVector<R>, p: f64) -> Result<R> {
    if a.schema_hash != b.schema_hash {
        return Err(Error::SchemaMismatch {
            expected: a.schema_hash.clone(),
            found: b.schema_hash.clone(),
        });
    }
    lp_distance(&a.values, &b.values, p)
}

/// File-level convenience variant: the same norm applied to file vectors.
pub fn file_similarity<R: Real>(a: &FileVector<R>, b: &FileVector<R>, p: f64) -> Result<R> {
    if a.schema_hash != b.schema_hash {
        return Err(Error::SchemaMismatch {
            expected: a.schema_hash.clone(),
            found: b.schema_hash.clone(),
        });
    }
    lp_distance(&a.values, &b.values, p)
}

fn lp_distance<R: Real>(a: &[R], b: &[R], p: f64) -> Result<R> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "norm order must satisfy p >= 1, got {p}"
        )));
    }
    debug_assert_eq!(a.len(), b.len());
    let exponent = R::from_config(p);
    let total: R = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs().powf(exponent))
        .sum();
    Ok(total.powf(R::one() / exponent))
}
