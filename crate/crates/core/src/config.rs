//! Vectorization configuration and the schema digest that identifies a
//! feature space.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::callgraph::DEFAULT_CRYPTO_SUBSTRINGS;
use crate::error::Result;
use crate::integrate::{self, Partition, DEFAULT_EXPECTED_TYPE_KINDS, DEFAULT_PARTITION};
use crate::pagerank::{DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_TRANSPORT_P};
use crate::scalar::Real;
use crate::sdfg::DEFAULT_MAX_PATHS;

/// Which measure the integrals are taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pmiv,
    Umiv,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Pmiv => f.write_str("pmiv"),
            Mode::Umiv => f.write_str("umiv"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "pmiv" => Ok(Mode::Pmiv),
            "umiv" => Ok(Mode::Umiv),
            other => Err(crate::Error::InvalidConfig(format!(
                "unknown mode {other:?}; expected pmiv or umiv"
            ))),
        }
    }
}

/// Everything that determines how a file becomes a vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VectorizeConfig {
    pub mode: Mode,
    pub partition: Vec<f64>,
    pub expected_type_kinds: Vec<String>,
    pub crypto_substrings: Vec<String>,
    pub transport_p: f64,
    pub pagerank_tol: f64,
    pub pagerank_max_iter: usize,
    pub max_paths: usize,
}

impl Default for VectorizeConfig {
    fn default() -> Self {
        VectorizeConfig {
            mode: Mode::Pmiv,
            partition: DEFAULT_PARTITION.to_vec(),
            expected_type_kinds: DEFAULT_EXPECTED_TYPE_KINDS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            crypto_substrings: DEFAULT_CRYPTO_SUBSTRINGS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            transport_p: DEFAULT_TRANSPORT_P,
            pagerank_tol: DEFAULT_TOL,
            pagerank_max_iter: DEFAULT_MAX_ITER,
            max_paths: DEFAULT_MAX_PATHS,
        }
    }
}

impl VectorizeConfig {
    pub fn with_mode(mode: Mode) -> Self {
        VectorizeConfig {
            mode,
            ..Self::default()
        }
    }

    /// Validates ranges and the partition shape.
    pub fn validate(&self) -> Result<()> {
        self.partition_checked::<f64>()?;
        if !(self.transport_p > 0.0 && self.transport_p < 1.0) {
            return Err(crate::Error::InvalidConfig(format!(
                "transport_p must lie in (0, 1), got {}",
                self.transport_p
            )));
        }
        if self.max_paths == 0 {
            return Err(crate::Error::InvalidConfig("max_paths must be at least 1".into()));
        }
        if self.pagerank_max_iter == 0 {
            return Err(crate::Error::InvalidConfig(
                "pagerank_max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn partition_checked<R: Real>(&self) -> Result<Partition<R>> {
        Partition::from_config(&self.partition)
    }

    /// Catalog under this configuration.
    pub fn catalog<R: Real>(&self) -> Vec<integrate::FeatureFunction<R>> {
        integrate::catalog_with_kinds(&self.expected_type_kinds)
    }

    /// Names of the catalog functions, in schema order.
    pub fn catalog_names(&self) -> Vec<String> {
        self.catalog::<f64>().into_iter().map(|f| f.name).collect()
    }

    /// Digest of (catalog, partition, mode): two vectors are comparable only
    /// when their schema hashes agree.
    pub fn schema_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"mode=");
        hasher.update(self.mode.to_string().as_bytes());
        hasher.update(b";partition=");
        for q in &self.partition {
            hasher.update(q.to_bits().to_le_bytes());
        }
        hasher.update(b";catalog=");
        for name in self.catalog_names() {
            hasher.update(name.as_bytes());
            hasher.update(b",");
        }
        hex::encode(hasher.finalize())
    }

    /// Vector length under this configuration, including the call-graph
    /// block.
    pub fn vector_len(&self) -> usize {
        let functions = self.catalog_names().len();
        let per_function = match self.mode {
            Mode::Pmiv => self.partition.len() * 2,
            Mode::Umiv => 2,
        };
        functions * per_function + crate::callgraph::FcgFeatures::LEN
    }
}
