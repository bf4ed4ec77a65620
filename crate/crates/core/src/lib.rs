//! Graph-integration vectorization of decompiler AST documents.
//!
//! The pipeline turns a per-file set of function ASTs into a fixed-length
//! feature vector: each function's AST is traversed into a shortsighted
//! data-flow graph (SDFG), a PageRank measure is computed over its vertices,
//! and hand-engineered node functions are integrated against that measure at
//! a fixed partition of thresholds (PMIV). A uniform-measure baseline (UMIV),
//! a graph similarity measure, a function-call-graph feature block, and an
//! embedded random-forest classifier round out the toolkit.

pub mod ast;
pub mod callgraph;
pub mod config;
pub mod error;
pub mod forest;
pub mod integrate;
pub mod pagerank;
pub mod scalar;
pub mod sdfg;
pub mod similarity;
pub mod synth;
pub mod vectorize;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar type for the shipped pipeline.
pub type Scalar = f64;

pub type TransitionMatrix = pagerank::TransitionMatrix<Scalar>;
pub type PageRankMeasure = pagerank::PageRankMeasure<Scalar>;
pub type FeatureFunction = integrate::FeatureFunction<Scalar>;
pub type Partition = integrate::Partition<Scalar>;
pub type Antiderivative = integrate::Antiderivative<Scalar>;
pub type FileVector = vectorize::FileVector<Scalar>;
pub type GraphVector = similarity::GraphVector<Scalar>;
pub type ForestModel = forest::ForestModel<Scalar>;
