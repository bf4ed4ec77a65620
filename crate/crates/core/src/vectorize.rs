//! File-level vectorization, the output schema, and the dedup digest.
//!
//! A file maps to a fixed-length vector: for each catalog function, the mean
//! and standard deviation across the file's nonempty SDFGs of its per-graph
//! integral values (per threshold under PMIV, a single uniform average under
//! UMIV), followed by the seven call-graph features. Population statistics
//! are computed over value-sorted lists, so reordering the file's functions
//! leaves the vector bit-identical.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::{AstDocument, AttrValue, FileDocument};
use crate::callgraph::{build_call_graph_with, call_graph_features, FcgFeatures};
use crate::config::{Mode, VectorizeConfig};
use crate::error::{Error, Result};
use crate::integrate::{
    antiderivative_counting, uniform_integral_counting, FeatureFunction, Partition,
    WarningCounter,
};
use crate::pagerank::pagerank;
use crate::scalar::Real;
use crate::sdfg::{build_sdfg_flagged, Sdfg};

/// Per-file vectorization bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorMetadata {
    pub function_count: usize,
    /// Nonempty SDFGs that entered the statistics.
    pub integrated_sdfg_count: usize,
    pub empty_sdfg_count: usize,
    /// Functions whose path enumeration hit the cap.
    pub truncated_functions: usize,
    /// Attribute values with the wrong shape encountered during evaluation.
    pub eval_warnings: u64,
    /// Set when the file had no nonempty SDFG at all.
    pub no_sdfgs: bool,
}

/// Fixed-length feature vector for one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FileVector<R: Real> {
    pub file_id: String,
    pub mode: Mode,
    pub schema_hash: String,
    pub values: Vec<R>,
    pub metadata: VectorMetadata,
}

impl<R: Real> FileVector<R> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reusable vectorization context: catalog, partition, and schema digest
/// built once per configuration.
pub struct Vectorizer<R: Real> {
    cfg: VectorizeConfig,
    catalog: Vec<FeatureFunction<R>>,
    partition: Partition<R>,
    schema_hash: String,
}

impl<R: Real> Vectorizer<R> {
    pub fn new(cfg: VectorizeConfig) -> Result<Self> {
        cfg.validate()?;
        let catalog = cfg.catalog();
        let partition = cfg.partition_checked()?;
        let schema_hash = cfg.schema_hash();
        Ok(Vectorizer {
            cfg,
            catalog,
            partition,
            schema_hash,
        })
    }

    pub fn config(&self) -> &VectorizeConfig {
        &self.cfg
    }

    pub fn schema_hash(&self) -> &str {
        &self.schema_hash
    }

    pub fn catalog(&self) -> &[FeatureFunction<R>] {
        &self.catalog
    }

    pub fn vectorize(&self, doc: &FileDocument) -> Result<FileVector<R>> {
        let warnings = WarningCounter::new();
        let mut graphs: Vec<Sdfg> = Vec::with_capacity(doc.functions.len());
        let mut truncated_functions = 0usize;
        for function in &doc.functions {
            let (graph, truncated) = build_sdfg_flagged(function, self.cfg.max_paths);
            if truncated {
                truncated_functions += 1;
            }
            graphs.push(graph);
        }
        let nonempty: Vec<&Sdfg> = graphs.iter().filter(|g| !g.is_empty()).collect();
        let empty_sdfg_count = graphs.len() - nonempty.len();

        let integration_len = self.cfg.vector_len() - FcgFeatures::LEN;
        let mut values: Vec<R> = Vec::with_capacity(self.cfg.vector_len());
        if nonempty.is_empty() {
            values.resize(integration_len, R::zero());
        } else {
            match self.cfg.mode {
                Mode::Pmiv => self.integrate_pmiv(&nonempty, &warnings, &mut values)?,
                Mode::Umiv => self.integrate_umiv(&nonempty, &warnings, &mut values)?,
            }
        }

        let call_graph = build_call_graph_with(doc, &self.cfg.crypto_substrings);
        let fcg = call_graph_features(&call_graph);
        values.extend(fcg.values().into_iter().map(R::from_config));
        debug_assert_eq!(values.len(), self.cfg.vector_len());

        Ok(FileVector {
            file_id: doc.file_id.clone(),
            mode: self.cfg.mode,
            schema_hash: self.schema_hash.clone(),
            values,
            metadata: VectorMetadata {
                function_count: doc.functions.len(),
                integrated_sdfg_count: nonempty.len(),
                empty_sdfg_count,
                truncated_functions,
                eval_warnings: warnings.count(),
                no_sdfgs: nonempty.is_empty(),
            },
        })
    }

    fn integrate_pmiv(
        &self,
        graphs: &[&Sdfg],
        warnings: &WarningCounter,
        values: &mut Vec<R>,
    ) -> Result<()> {
        let thresholds = self.partition.len();
        // per graph, per function: antiderivative values over thresholds
        let mut per_graph: Vec<Vec<Vec<R>>> = Vec::with_capacity(graphs.len());
        for g in graphs {
            let mu = pagerank::<R>(
                g,
                self.cfg.transport_p,
                self.cfg.pagerank_tol,
                self.cfg.pagerank_max_iter,
            )?;
            let rows = self
                .catalog
                .iter()
                .map(|f| antiderivative_counting(g, &mu, f, &self.partition, Some(warnings)).values)
                .collect();
            per_graph.push(rows);
        }
        let mut samples = Vec::with_capacity(graphs.len());
        for f_idx in 0..self.catalog.len() {
            let mut means = Vec::with_capacity(thresholds);
            let mut stds = Vec::with_capacity(thresholds);
            for j in 0..thresholds {
                samples.clear();
                samples.extend(per_graph.iter().map(|rows| rows[f_idx][j]));
                let (mean, std) = sorted_mean_std(&mut samples);
                means.push(mean);
                stds.push(std);
            }
            values.extend(means);
            values.extend(stds);
        }
        Ok(())
    }

    fn integrate_umiv(
        &self,
        graphs: &[&Sdfg],
        warnings: &WarningCounter,
        values: &mut Vec<R>,
    ) -> Result<()> {
        let mut samples = Vec::with_capacity(graphs.len());
        for f in &self.catalog {
            samples.clear();
            for g in graphs {
                samples.push(uniform_integral_counting(g, f, Some(warnings))?);
            }
            let (mean, std) = sorted_mean_std(&mut samples);
            values.push(mean);
            values.push(std);
        }
        Ok(())
    }
}

/// Vectorizes under the PageRank measure.
pub fn vectorize_file_pmiv<R: Real>(
    doc: &FileDocument,
    cfg: &VectorizeConfig,
) -> Result<FileVector<R>> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Pmiv;
    Vectorizer::new(cfg)?.vectorize(doc)
}

/// Vectorizes under the uniform measure.
pub fn vectorize_file_umiv<R: Real>(
    doc: &FileDocument,
    cfg: &VectorizeConfig,
) -> Result<FileVector<R>> {
    let mut cfg = cfg.clone();
    cfg.mode = Mode::Umiv;
    Vectorizer::new(cfg)?.vectorize(doc)
}

/// Population mean and standard deviation over a value-sorted sample, making
/// the result independent of input order.
fn sorted_mean_std<R: Real>(samples: &mut [R]) -> (R, R) {
    if samples.is_empty() {
        return (R::zero(), R::zero());
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("feature values are finite"));
    let n = R::from_usize(samples.len()).unwrap();
    let mean = samples.iter().copied().sum::<R>() / n;
    let variance = samples
        .iter()
        .map(|&x| {
            let d = x - mean;
            d * d
        })
        .sum::<R>()
        / n;
    (mean, variance.sqrt())
}

// ---------------------------------------------------------------------------
// Output schema

/// Sidecar description of one feature space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorSchema {
    pub schema_hash: String,
    pub mode: Mode,
    pub partition: Vec<f64>,
    pub catalog: Vec<String>,
    pub columns: Vec<String>,
}

/// Human-readable threshold label: `0.6` becomes `60`, `0.125` becomes `12.5`.
fn threshold_label(q: f64) -> String {
    let pct = q * 100.0;
    if (pct - pct.round()).abs() < 1e-6 {
        format!("{}", pct.round() as i64)
    } else {
        format!("{pct}")
    }
}

/// Column names in vector order for the given configuration.
pub fn column_names(cfg: &VectorizeConfig) -> Vec<String> {
    let mut columns = Vec::with_capacity(cfg.vector_len());
    for name in cfg.catalog_names() {
        match cfg.mode {
            Mode::Pmiv => {
                for stat in ["mean", "std"] {
                    for &q in &cfg.partition {
                        columns.push(format!("{name}_{}_{stat}", threshold_label(q)));
                    }
                }
            }
            Mode::Umiv => {
                columns.push(format!("{name}_mean"));
                columns.push(format!("{name}_std"));
            }
        }
    }
    columns.extend(FcgFeatures::column_names().into_iter().map(String::from));
    columns
}

/// Builds the sidecar schema record for a configuration.
pub fn schema_for(cfg: &VectorizeConfig) -> VectorSchema {
    VectorSchema {
        schema_hash: cfg.schema_hash(),
        mode: cfg.mode,
        partition: cfg.partition.clone(),
        catalog: cfg.catalog_names(),
        columns: column_names(cfg),
    }
}

// ---------------------------------------------------------------------------
// Writers and readers

/// Writes one JSON record per vector.
pub fn write_jsonl<R: Real, W: Write>(vectors: &[FileVector<R>], mut out: W) -> Result<()> {
    for v in vectors {
        serde_json::to_writer(&mut out, v).map_err(io_error)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads vectors back from JSONL.
pub fn read_jsonl<R: Real, B: BufRead>(input: B) -> Result<Vec<FileVector<R>>> {
    let mut vectors = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: FileVector<R> =
            serde_json::from_str(&line).map_err(|e| Error::from_json(e, line.as_bytes()))?;
        vectors.push(v);
    }
    Ok(vectors)
}

/// Writes a CSV with a header derived from the schema.
pub fn write_csv<R: Real, W: Write>(
    vectors: &[FileVector<R>],
    schema: &VectorSchema,
    out: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(schema.columns.len() + 1);
    header.push("file_id".to_string());
    header.extend(schema.columns.iter().cloned());
    writer.write_record(&header).map_err(csv_error)?;
    for v in vectors {
        if v.schema_hash != schema.schema_hash {
            return Err(Error::SchemaMismatch {
                expected: schema.schema_hash.clone(),
                found: v.schema_hash.clone(),
            });
        }
        let mut record = Vec::with_capacity(v.values.len() + 1);
        record.push(v.file_id.clone());
        record.extend(v.values.iter().map(|x| format!("{x}")));
        writer.write_record(&record).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn io_error(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

// ---------------------------------------------------------------------------
// Dedup digest

/// Attribute carrying a node's identity for the canonical digest, first match
/// wins.
const SALIENT_ATTRS: &[&str] = &[
    "fnName",
    "ctorType",
    "varType",
    "fieldName",
    "name",
    "whichOpCode",
    "testedType",
    "castedType",
    "elemType",
    "localIdx",
    "value",
    "expr",
];

/// Content digest of one file: per-function canonical graph digests, sorted
/// and re-hashed, so function order and node renumbering do not matter.
pub fn dedup_hash(doc: &FileDocument) -> String {
    let mut digests: Vec<String> = doc
        .functions
        .iter()
        .map(|function| {
            let (graph, _) = build_sdfg_flagged(function, crate::sdfg::DEFAULT_MAX_PATHS);
            canonical_graph_digest(function, &graph)
        })
        .collect();
    digests.sort();
    let mut hasher = Sha256::new();
    for digest in &digests {
        hasher.update(digest.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Renumber-invariant digest of one SDFG: sorted node summaries plus sorted
/// kind-pair edges.
fn canonical_graph_digest(function: &AstDocument, graph: &Sdfg) -> String {
    let mut summaries: Vec<String> = graph
        .nodes
        .iter()
        .map(|node| format!("{}\u{1f}{}", node.kind, salient_render(function, node)))
        .collect();
    summaries.sort();
    let mut edge_pairs: Vec<String> = graph
        .edges
        .iter()
        .map(|&(a, b)| format!("{}\u{1f}{}", graph.nodes[a].kind, graph.nodes[b].kind))
        .collect();
    edge_pairs.sort();

    let mut hasher = Sha256::new();
    hasher.update(b"nodes\n");
    for s in &summaries {
        hasher.update(s.as_bytes());
        hasher.update(b"\n");
    }
    hasher.update(b"edges\n");
    for e in &edge_pairs {
        hasher.update(e.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Renders the salient attribute without leaking node numbering: references
/// collapse to the referenced kind, lists to their length.
fn salient_render(function: &AstDocument, node: &crate::ast::AstNode) -> String {
    for attr in SALIENT_ATTRS {
        match node.attr(attr) {
            Some(AttrValue::Str(s)) => {
                return match function.node(s) {
                    Some(target) => format!("@{}", target.kind),
                    None => s.clone(),
                }
            }
            Some(AttrValue::Num(x)) => return format!("{x}"),
            Some(AttrValue::List(items)) => return format!("#{}", items.len()),
            None => continue,
        }
    }
    String::new()
}
