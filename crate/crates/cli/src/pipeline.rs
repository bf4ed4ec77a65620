//! Shared plumbing: input discovery, parallel vectorization, and the trained
//! model bundle format.

use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pmiv::ast::{parse_file_document, FileDocument};
use pmiv::config::VectorizeConfig;
use pmiv::forest::ForestModel;
use pmiv::vectorize::{FileVector, Vectorizer};

/// Collects input documents: JSON files from directories (recursive, sorted)
/// or explicit file paths.
pub fn collect_input_paths(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in walkdir::WalkDir::new(input).sort_by_file_name() {
                let entry = entry?;
                if entry.file_type().is_file()
                    && entry.path().extension().is_some_and(|e| e == "json")
                    && entry.path().file_name().is_some_and(|n| n != "manifest.json")
                {
                    paths.push(entry.path().to_path_buf());
                }
            }
        } else if input.is_file() {
            paths.push(input.clone());
        } else {
            anyhow::bail!("input path {} does not exist", input.display());
        }
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}

pub fn read_document(path: &Path) -> anyhow::Result<FileDocument> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_file_document(&bytes).with_context(|| format!("cannot parse {}", path.display()))
}

/// Parses and vectorizes every input in parallel, preserving input order.
/// Per-file failures are reported and skipped.
pub fn vectorize_inputs(
    paths: &[PathBuf],
    vectorizer: &Vectorizer<f64>,
) -> (Vec<FileVector<f64>>, usize) {
    let results: Vec<Result<FileVector<f64>, String>> = paths
        .par_iter()
        .map(|path| {
            read_document(path)
                .and_then(|doc| Ok(vectorizer.vectorize(&doc)?))
                .map_err(|e| format!("{}: {e:#}", path.display()))
        })
        .collect();
    let mut vectors = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for result in results {
        match result {
            Ok(v) => vectors.push(v),
            Err(message) => {
                failures += 1;
                eprintln!("warning: skipping {message}");
            }
        }
    }
    (vectors, failures)
}

// ---------------------------------------------------------------------------
// Trained model bundle

const BUNDLE_FORMAT: &str = "pmiv-model";
const BUNDLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BundleFile {
    format: String,
    version: u32,
    vector_config: VectorizeConfig,
    forest: Box<serde_json::value::RawValue>,
}

/// A trained forest together with the vectorization configuration that
/// produced its feature space; self-contained for scoring raw documents.
pub struct TrainedBundle {
    pub vector_config: VectorizeConfig,
    pub model: ForestModel<f64>,
}

impl TrainedBundle {
    pub fn to_bytes(&self) -> anyhow::Result<Vec<u8>> {
        let forest_bytes = pmiv::forest::save(&self.model);
        let forest_json = String::from_utf8(forest_bytes)?;
        let bundle = BundleFile {
            format: BUNDLE_FORMAT.to_string(),
            version: BUNDLE_VERSION,
            vector_config: self.vector_config.clone(),
            forest: serde_json::value::RawValue::from_string(forest_json.trim_end().to_string())?,
        };
        let mut bytes = serde_json::to_vec(&bundle)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> anyhow::Result<Self> {
        let bundle: BundleFile =
            serde_json::from_slice(bytes).context("invalid model bundle")?;
        if bundle.format != BUNDLE_FORMAT {
            anyhow::bail!("unexpected model bundle format {:?}", bundle.format);
        }
        if bundle.version != BUNDLE_VERSION {
            anyhow::bail!("unsupported model bundle version {}", bundle.version);
        }
        let model = pmiv::forest::load::<f64>(bundle.forest.get().as_bytes())?;
        if model.schema_hash != bundle.vector_config.schema_hash() {
            anyhow::bail!("model bundle is inconsistent: schema hash does not match its vector config");
        }
        Ok(TrainedBundle {
            vector_config: bundle.vector_config,
            model,
        })
    }
}

/// Median and 95th percentile of a duration sample, in milliseconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingSummary {
    pub files: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub total_ms: f64,
}

pub fn timing_summary(mut per_file_ms: Vec<f64>, total_ms: f64) -> TimingSummary {
    per_file_ms.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let files = per_file_ms.len();
    let pick = |q: f64| -> f64 {
        if files == 0 {
            return 0.0;
        }
        let idx = ((files as f64 - 1.0) * q).round() as usize;
        per_file_ms[idx.min(files - 1)]
    };
    TimingSummary {
        files,
        median_ms: pick(0.5),
        p95_ms: pick(0.95),
        total_ms,
    }
}
