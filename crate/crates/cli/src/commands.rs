//! Subcommand implementations.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pmiv::callgraph::build_call_graph_with;
use pmiv::forest::{self, confusion_metrics, Label, MetricsReport};
use pmiv::sdfg::build_sdfg_with;
use pmiv::similarity::file_similarity;
use pmiv::synth::{self, CorpusManifest};
use pmiv::vectorize::{
    dedup_hash, read_jsonl, schema_for, write_csv, write_jsonl, FileVector, Vectorizer,
};

use crate::config::PipelineConfig;
use crate::pipeline::{
    collect_input_paths, read_document, timing_summary, vectorize_inputs, TrainedBundle,
};
use crate::{CliError, OutputFormat, Preset};

fn nonempty_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let paths = collect_input_paths(inputs).map_err(CliError::Usage)?;
    if paths.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "no .json input documents found"
        )));
    }
    Ok(paths)
}

fn require_survivors<T>(vectors: &[T], failures: usize) -> Result<(), CliError> {
    if vectors.is_empty() && failures > 0 {
        return Err(CliError::Parse(anyhow::anyhow!(
            "all {failures} input documents failed to parse or vectorize"
        )));
    }
    Ok(())
}

pub fn vectorize(
    inputs: &[PathBuf],
    out: &Path,
    format: OutputFormat,
    cfg: &PipelineConfig,
    schema_out: Option<PathBuf>,
    dump_dot: Option<PathBuf>,
) -> Result<(), CliError> {
    let paths = nonempty_inputs(inputs)?;
    let vectorizer = Vectorizer::<f64>::new(cfg.vectorize.clone()).map_err(|e| CliError::Usage(e.into()))?;
    let (vectors, failures) = vectorize_inputs(&paths, &vectorizer);
    require_survivors(&vectors, failures)?;

    let schema = schema_for(&cfg.vectorize);
    let file = std::fs::File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(CliError::Data)?;
    let mut writer = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Jsonl => write_jsonl(&vectors, &mut writer).map_err(|e| CliError::Data(e.into()))?,
        OutputFormat::Csv => {
            write_csv(&vectors, &schema, &mut writer).map_err(|e| CliError::Data(e.into()))?
        }
    }
    writer.flush().map_err(|e| CliError::Data(e.into()))?;

    let schema_path = schema_out.unwrap_or_else(|| sidecar_path(out));
    std::fs::write(
        &schema_path,
        serde_json::to_vec_pretty(&schema).expect("schema serializes"),
    )
    .map_err(|e| CliError::Data(e.into()))?;

    if let Some(dot_dir) = dump_dot {
        dump_dot_graphs(&paths, &dot_dir, cfg)?;
    }

    println!(
        "vectorized {} files ({failures} failures) -> {} [schema {}]",
        vectors.len(),
        out.display(),
        schema.schema_hash
    );
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".schema.json");
    out.with_file_name(name)
}

fn dump_dot_graphs(paths: &[PathBuf], dot_dir: &Path, cfg: &PipelineConfig) -> Result<(), CliError> {
    for path in paths {
        let Ok(doc) = read_document(path) else { continue };
        let dir = dot_dir.join(&doc.file_id);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Data(e.into()))?;
        for (i, function) in doc.functions.iter().enumerate() {
            let graph = build_sdfg_with(function, cfg.vectorize.max_paths);
            let file = dir.join(format!("{i:03}_{}.dot", sanitize(&function.function_name)));
            std::fs::write(file, graph.to_dot()).map_err(|e| CliError::Data(e.into()))?;
        }
        let call_graph = build_call_graph_with(&doc, &cfg.vectorize.crypto_substrings);
        std::fs::write(dir.join("callgraph.dot"), call_graph.to_dot())
            .map_err(|e| CliError::Data(e.into()))?;
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TrainReport<'a> {
    seed: u64,
    train_size: usize,
    validation_size: usize,
    test_size: usize,
    validation: Option<&'a MetricsReport>,
    test: &'a MetricsReport,
}

pub fn train(
    vectors_path: &Path,
    labels_path: &Path,
    model_out: &Path,
    report_out: Option<PathBuf>,
    mut cfg: PipelineConfig,
) -> Result<(), CliError> {
    let file = std::fs::File::open(vectors_path)
        .with_context(|| format!("cannot open vectors {}", vectors_path.display()))
        .map_err(CliError::Usage)?;
    let vectors: Vec<FileVector<f64>> = read_jsonl(std::io::BufReader::new(file))
        .map_err(|e| CliError::Parse(e.into()))?;
    if vectors.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no vectors to train on")));
    }

    // The vectors pin the feature space; the config must describe it so the
    // model bundle can re-vectorize at scoring time.
    cfg.vectorize.mode = vectors[0].mode;
    if cfg.vectorize.schema_hash() != vectors[0].schema_hash {
        return Err(CliError::Usage(anyhow::anyhow!(
            "configuration does not match the vectors' schema; pass the --config used for vectorization"
        )));
    }

    let labels_map = load_labels(labels_path)?;
    let labels: Vec<Label> = vectors
        .iter()
        .map(|v| {
            labels_map.get(&v.file_id).copied().ok_or_else(|| {
                CliError::Data(anyhow::anyhow!("no label for file_id {}", v.file_id))
            })
        })
        .collect::<Result<_, _>>()?;

    let (train_idx, val_idx, test_idx) = split_indices(vectors.len(), &cfg);
    let train_vectors: Vec<FileVector<f64>> =
        train_idx.iter().map(|&i| vectors[i].clone()).collect();
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();

    let mut forest_cfg = cfg.forest.clone();
    forest_cfg.seed = cfg.seed;
    let model = forest::train(&train_vectors, &train_labels, &forest_cfg)
        .map_err(|e| CliError::Data(e.into()))?;

    let eval_split = |idx: &[usize]| -> Result<Option<MetricsReport>, CliError> {
        if idx.is_empty() {
            return Ok(None);
        }
        let truth: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
        let predicted: Vec<Label> = idx
            .iter()
            .map(|&i| forest::predict(&model, &vectors[i]).map(|(l, _)| l))
            .collect::<pmiv::Result<_>>()
            .map_err(|e| CliError::Data(e.into()))?;
        Ok(Some(confusion_metrics(&truth, &predicted)))
    };
    let validation_report = eval_split(&val_idx)?;
    let test_report = eval_split(&test_idx)?.expect("test split is never empty");

    if let Some(report) = &validation_report {
        println!("== validation ({} files) ==", val_idx.len());
        print!("{}", report.to_table());
    }
    println!("== test ({} files) ==", test_idx.len());
    print!("{}", test_report.to_table());

    let bundle = TrainedBundle {
        vector_config: cfg.vectorize.clone(),
        model,
    };
    std::fs::write(model_out, bundle.to_bytes().map_err(CliError::Data)?)
        .map_err(|e| CliError::Data(e.into()))?;
    println!("model written to {}", model_out.display());

    if let Some(report_path) = report_out {
        let report = TrainReport {
            seed: cfg.seed,
            train_size: train_idx.len(),
            validation_size: val_idx.len(),
            test_size: test_idx.len(),
            validation: validation_report.as_ref(),
            test: &test_report,
        };
        std::fs::write(
            &report_path,
            serde_json::to_vec_pretty(&report).expect("report serializes"),
        )
        .map_err(|e| CliError::Data(e.into()))?;
    }
    Ok(())
}

fn load_labels(path: &Path) -> Result<BTreeMap<String, Label>, CliError> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read labels {}", path.display()))
        .map_err(CliError::Usage)?;
    if let Ok(manifest) = serde_json::from_slice::<CorpusManifest>(&bytes) {
        return Ok(manifest.labels);
    }
    serde_json::from_slice::<BTreeMap<String, Label>>(&bytes)
        .context("labels must be a corpus manifest or a file_id-to-label map")
        .map_err(CliError::Parse)
}

/// Deterministic shuffled split into train/validation/test index sets.
fn split_indices(n: usize, cfg: &PipelineConfig) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order.shuffle(&mut rng);
    let train_end = ((n as f64) * cfg.split.train).round() as usize;
    let val_end = ((n as f64) * (cfg.split.train + cfg.split.validation)).round() as usize;
    let train_end = train_end.min(n);
    let val_end = val_end.clamp(train_end, n);
    (
        order[..train_end].to_vec(),
        order[train_end..val_end].to_vec(),
        order[val_end..].to_vec(),
    )
}

// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ScoreRecord {
    file_id: String,
    label: Label,
    score: f64,
}

pub fn score(
    inputs: &[PathBuf],
    model_path: &Path,
    out: &Path,
    timing_out: Option<PathBuf>,
) -> Result<(), CliError> {
    let bundle_bytes = std::fs::read(model_path)
        .with_context(|| format!("cannot read model {}", model_path.display()))
        .map_err(CliError::Usage)?;
    let bundle = TrainedBundle::from_bytes(&bundle_bytes).map_err(CliError::Data)?;
    let vectorizer =
        Vectorizer::<f64>::new(bundle.vector_config.clone()).map_err(|e| CliError::Data(e.into()))?;

    let paths = nonempty_inputs(inputs)?;
    let started = Instant::now();
    let results: Vec<Result<(ScoreRecord, f64), String>> = paths
        .par_iter()
        .map(|path| {
            let t0 = Instant::now();
            let outcome = read_document(path)
                .and_then(|doc| Ok(vectorizer.vectorize(&doc)?))
                .and_then(|vector| {
                    let (label, score) = forest::predict(&bundle.model, &vector)?;
                    Ok(ScoreRecord {
                        file_id: vector.file_id,
                        label,
                        score,
                    })
                });
            let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
            outcome
                .map(|record| (record, elapsed_ms))
                .map_err(|e| format!("{}: {e:#}", path.display()))
        })
        .collect();
    let total_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut records = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for result in results {
        match result {
            Ok((record, ms)) => {
                records.push(record);
                timings.push(ms);
            }
            Err(message) => {
                failures += 1;
                eprintln!("warning: skipping {message}");
            }
        }
    }
    require_survivors(&records, failures)?;

    let file = std::fs::File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(CliError::Data)?;
    let mut writer = std::io::BufWriter::new(file);
    for record in &records {
        serde_json::to_writer(&mut writer, record).map_err(|e| CliError::Data(e.into()))?;
        writer.write_all(b"\n").map_err(|e| CliError::Data(e.into()))?;
    }
    writer.flush().map_err(|e| CliError::Data(e.into()))?;

    let summary = timing_summary(timings, total_ms);
    let summary_json = serde_json::to_string(&summary).expect("summary serializes");
    eprintln!("{summary_json}");
    if let Some(timing_path) = timing_out {
        std::fs::write(timing_path, format!("{summary_json}\n"))
            .map_err(|e| CliError::Data(e.into()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn similarity(
    inputs: &[PathBuf],
    out: &Path,
    p: f64,
    cfg: &PipelineConfig,
) -> Result<(), CliError> {
    if p.is_nan() || p < 1.0 {
        return Err(CliError::Usage(anyhow::anyhow!(
            "norm order must satisfy p >= 1, got {p}"
        )));
    }
    let paths = nonempty_inputs(inputs)?;
    let vectorizer = Vectorizer::<f64>::new(cfg.vectorize.clone()).map_err(|e| CliError::Usage(e.into()))?;
    let (vectors, failures) = vectorize_inputs(&paths, &vectorizer);
    require_survivors(&vectors, failures)?;

    let file = std::fs::File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(CliError::Data)?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header = vec!["file_id".to_string()];
    header.extend(vectors.iter().map(|v| v.file_id.clone()));
    writer.write_record(&header).map_err(|e| CliError::Data(e.into()))?;
    for a in &vectors {
        let mut row = vec![a.file_id.clone()];
        for b in &vectors {
            let d = file_similarity(a, b, p).map_err(|e| CliError::Data(e.into()))?;
            row.push(format!("{d}"));
        }
        writer.write_record(&row).map_err(|e| CliError::Data(e.into()))?;
    }
    writer.flush().map_err(|e| CliError::Data(e.into()))?;
    println!("{}x{} distance matrix -> {}", vectors.len(), vectors.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DedupManifest {
    files: BTreeMap<String, String>,
    groups: BTreeMap<String, Vec<String>>,
}

pub fn dedup(inputs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let paths = nonempty_inputs(inputs)?;
    let results: Vec<Result<(String, String), String>> = paths
        .par_iter()
        .map(|path| {
            read_document(path)
                .map(|doc| {
                    let digest = dedup_hash(&doc);
                    (doc.file_id, digest)
                })
                .map_err(|e| format!("{}: {e:#}", path.display()))
        })
        .collect();

    let mut files = BTreeMap::new();
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut failures = 0usize;
    for result in results {
        match result {
            Ok((file_id, digest)) => {
                groups.entry(digest.clone()).or_default().push(file_id.clone());
                files.insert(file_id, digest);
            }
            Err(message) => {
                failures += 1;
                eprintln!("warning: skipping {message}");
            }
        }
    }
    if files.is_empty() && failures > 0 {
        return Err(CliError::Parse(anyhow::anyhow!(
            "all {failures} input documents failed to parse"
        )));
    }
    for ids in groups.values_mut() {
        ids.sort();
    }

    let manifest = DedupManifest { files, groups };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::Data(e.into()))?,
        None => {
            std::io::stdout()
                .write_all(&json)
                .map_err(|e| CliError::Data(e.into()))?;
            println!();
        }
    }
    let duplicates = manifest_duplicate_count(&manifest);
    eprintln!(
        "{} files, {} distinct digests, {duplicates} duplicates",
        manifest.files.len(),
        manifest.groups.len()
    );
    Ok(())
}

fn manifest_duplicate_count(manifest: &DedupManifest) -> usize {
    manifest
        .groups
        .values()
        .map(|ids| ids.len().saturating_sub(1))
        .sum()
}

// ---------------------------------------------------------------------------

pub fn synth(
    out: &Path,
    preset: Preset,
    files: usize,
    seed: u64,
    spec_path: Option<&Path>,
) -> Result<(), CliError> {
    let (spec, preset_name, corpus) = match spec_path {
        Some(path) => {
            let bytes = std::fs::read(path)
                .with_context(|| format!("cannot read spec {}", path.display()))
                .map_err(CliError::Usage)?;
            let spec: synth::CorpusSpec = serde_json::from_slice(&bytes)
                .context("invalid corpus spec")
                .map_err(CliError::Parse)?;
            let corpus = synth::generate(&spec).map_err(|e| CliError::Data(e.into()))?;
            (spec, None, corpus)
        }
        None => match preset {
            Preset::Texture => {
                let spec = synth::texture_spec(files, seed);
                let corpus = synth::generate(&spec).map_err(|e| CliError::Data(e.into()))?;
                (spec, Some("texture".to_string()), corpus)
            }
            Preset::Topology => {
                let spec = synth::topology_spec(files, seed);
                let corpus =
                    synth::generate_topology_only(&spec).map_err(|e| CliError::Data(e.into()))?;
                (spec, Some("topology".to_string()), corpus)
            }
        },
    };

    std::fs::create_dir_all(out).map_err(|e| CliError::Data(e.into()))?;
    let mut labels = BTreeMap::new();
    for (doc, label) in &corpus {
        let path = out.join(format!("{}.json", doc.file_id));
        std::fs::write(&path, pmiv::ast::serialize_file_document(doc))
            .map_err(|e| CliError::Data(e.into()))?;
        labels.insert(doc.file_id.clone(), *label);
    }
    let manifest = CorpusManifest {
        seed: spec.seed,
        preset: preset_name,
        labels,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| CliError::Data(e.into()))?;
    println!("wrote {} documents to {}", corpus.len(), out.display());
    Ok(())
}
