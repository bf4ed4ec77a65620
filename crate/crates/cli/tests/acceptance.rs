//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with the measured numbers.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pmiv::ast::{parse_file_document, AstNode, AttrValue, FileDocument};
use pmiv::callgraph::build_call_graph;
use pmiv::config::{Mode, VectorizeConfig};
use pmiv::forest::{confusion_metrics, predict, train, ForestConfig, Label};
use pmiv::integrate::{antiderivative, default_catalog, Partition};
use pmiv::pagerank::{pagerank, PageRankMeasure};
use pmiv::sdfg::{build_sdfg, Sdfg};
use pmiv::similarity::{graph_similarity, vectorize_graph};
use pmiv::synth;
use pmiv::vectorize::Vectorizer;

// ---------------------------------------------------------------------------
// Shared experiment harness

struct Experiment {
    test_accuracy: f64,
}

/// Vectorize a corpus, split 70/10/20 by seed, train 100 trees, return test
/// accuracy.
fn run_experiment(corpus: &[(FileDocument, Label)], mode: Mode, seed: u64) -> Experiment {
    let vectorizer = Vectorizer::<f64>::new(VectorizeConfig::with_mode(mode)).unwrap();
    let vectors: Vec<_> = corpus
        .par_iter()
        .map(|(doc, _)| vectorizer.vectorize(doc).unwrap())
        .collect();
    let labels: Vec<Label> = corpus.iter().map(|(_, l)| *l).collect();

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n = order.len();
    let train_end = (n as f64 * 0.7).round() as usize;
    let val_end = (n as f64 * 0.8).round() as usize;

    let train_vectors: Vec<_> = order[..train_end].iter().map(|&i| vectors[i].clone()).collect();
    let train_labels: Vec<_> = order[..train_end].iter().map(|&i| labels[i]).collect();
    let cfg = ForestConfig {
        n_estimators: 100,
        seed,
        ..ForestConfig::default()
    };
    let model = train(&train_vectors, &train_labels, &cfg).unwrap();

    let test_idx = &order[val_end..];
    let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    let predicted: Vec<Label> = test_idx
        .iter()
        .map(|&i| predict(&model, &vectors[i]).unwrap().0)
        .collect();
    Experiment {
        test_accuracy: confusion_metrics(&truth, &predicted).accuracy,
    }
}

/// Criterion 1: the texture-preset substitute experiment reaches 95% test
/// accuracy with a 100-tree PMIV forest inside five minutes.
#[test]
fn criterion_1_texture_pmiv_accuracy() {
    let started = Instant::now();
    let corpus = synth::generate(&synth::texture_spec(2000, 1)).unwrap();
    let result = run_experiment(&corpus, Mode::Pmiv, 1);
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        result.test_accuracy >= 0.95,
        "PMIV test accuracy {} below 0.95",
        result.test_accuracy
    );
    assert!(elapsed <= 300.0, "experiment took {elapsed:.1}s, budget is 300s");
    println!(
        "ACCEPTANCE 1 PASS: texture PMIV test accuracy {:.4} (>= 0.95) in {elapsed:.1}s (<= 300s)",
        result.test_accuracy
    );
}

/// Criterion 2: on the topology-only preset PMIV beats UMIV by at least five
/// points on every seed, with UMIV under 0.80 and PMIV over 0.90.
#[test]
fn criterion_2_topology_pmiv_beats_umiv() {
    for seed in [1u64, 2, 3] {
        let corpus =
            synth::generate_topology_only(&synth::topology_spec(2000, seed)).unwrap();
        let pmiv_acc = run_experiment(&corpus, Mode::Pmiv, seed).test_accuracy;
        let umiv_acc = run_experiment(&corpus, Mode::Umiv, seed).test_accuracy;
        assert!(pmiv_acc > 0.90, "seed {seed}: PMIV accuracy {pmiv_acc} not above 0.90");
        assert!(umiv_acc < 0.80, "seed {seed}: UMIV accuracy {umiv_acc} not below 0.80");
        assert!(
            pmiv_acc - umiv_acc >= 0.05,
            "seed {seed}: gap {:.4} below 5 points",
            pmiv_acc - umiv_acc
        );
        println!(
            "ACCEPTANCE 2 PASS (seed {seed}): PMIV {pmiv_acc:.4} vs UMIV {umiv_acc:.4}, gap {:.4}",
            pmiv_acc - umiv_acc
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: PageRank oracle equivalence

fn random_digraph(rng: &mut ChaCha8Rng, max_nodes: usize) -> Sdfg {
    let n = rng.random_range(1..=max_nodes);
    let kinds: Vec<&str> = (0..n).map(|_| "Call").collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if rng.random_bool(0.3) {
                edges.push((a, b));
            }
        }
    }
    Sdfg::from_kinds("g", &kinds, edges)
}

/// Dense brute-force stationary vector, written independently of the sparse
/// implementation: explicit matrix assembly and multiplication to a much
/// tighter tolerance.
fn dense_stationary(g: &Sdfg, p: f64) -> Vec<f64> {
    let n = g.node_count();
    let mut out_degree = vec![0usize; n];
    for &(a, _) in &g.edges {
        out_degree[a] += 1;
    }
    let mut matrix = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        if out_degree[i] == 0 {
            for j in 0..n {
                matrix[i][j] = 1.0 / n as f64;
            }
        }
    }
    for &(a, b) in &g.edges {
        matrix[a][b] = 1.0 / out_degree[a] as f64;
    }
    for row in matrix.iter_mut() {
        for cell in row.iter_mut() {
            *cell = (1.0 - p) * *cell + p / n as f64;
        }
    }
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..50_000 {
        let mut next = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += x[i] * matrix[i][j];
            }
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

#[test]
fn criterion_3_pagerank_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let transport = 0.15;
    for case in 0..200 {
        let g = random_digraph(&mut rng, 8);
        let measure = pagerank::<f64>(&g, transport, 1e-12, 2000).unwrap();
        let oracle = dense_stationary(&g, transport);
        for (i, (a, b)) in measure.probabilities.iter().zip(&oracle).enumerate() {
            assert!(
                (a - b).abs() < 1e-8,
                "case {case} entry {i}: {a} vs oracle {b}"
            );
        }
        let sum: f64 = measure.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "case {case}: sum {sum}");
        let floor = transport / g.node_count() as f64 - 1e-12;
        assert!(
            measure.probabilities.iter().all(|&x| x >= floor),
            "case {case}: entry under transport floor"
        );
    }
    println!("ACCEPTANCE 3 PASS: 200 digraphs matched the dense oracle within 1e-8");
}

// ---------------------------------------------------------------------------
// Criterion 4: integration oracle equivalence

#[test]
fn criterion_4_integration_oracle_equivalence() {
    let catalog = default_catalog::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for case in 0..500 {
        let g = attributed_graph(&mut rng);
        let mu = pagerank::<f64>(&g, 0.15, 1e-10, 1000).unwrap();
        let f = &catalog[rng.random_range(0..catalog.len())];
        let thresholds = {
            let mut set = std::collections::BTreeSet::new();
            let len = rng.random_range(1..9usize);
            while set.len() < len {
                set.insert(rng.random_range(1..=1000u32));
            }
            set.into_iter().map(|t| f64::from(t) / 1000.0).collect::<Vec<_>>()
        };
        let partition = Partition::open(thresholds.clone()).unwrap();
        let result = antiderivative(&g, &mu, f, &partition);

        let evaluated: Vec<f64> = g.nodes.iter().map(|v| f.evaluate(v)).collect();
        for (j, &q) in thresholds.iter().enumerate() {
            let mut expected = 0.0f64;
            for (i, &p) in mu.probabilities.iter().enumerate() {
                if p <= q {
                    expected += evaluated[i] * p;
                }
            }
            assert_eq!(
                result.values[j], expected,
                "case {case}: mismatch at threshold {q} for {}",
                f.name
            );
        }
        if f.is_nonnegative() {
            for w in result.values.windows(2) {
                assert!(w[1] >= w[0], "case {case}: {} not monotone", f.name);
            }
        }
    }
    println!("ACCEPTANCE 4 PASS: 500 triples matched the filtered-sum oracle exactly");
}

fn attributed_graph(rng: &mut ChaCha8Rng) -> Sdfg {
    const KINDS: &[&str] = &[
        "Call",
        "BinaryOp",
        "LocalVar",
        "CLRLiteral",
        "Return",
        "StoreLocal",
        "ClassRef",
        "AddressOf",
    ];
    let n = rng.random_range(1..=10usize);
    let nodes: Vec<AstNode> = (0..n)
        .map(|i| {
            let kind = KINDS[rng.random_range(0..KINDS.len())];
            let mut attributes: BTreeMap<String, AttrValue> = BTreeMap::new();
            match rng.random_range(0..4u8) {
                0 => {
                    attributes.insert(
                        "fnName".into(),
                        AttrValue::Str(format!("f{}", rng.random_range(0..20))),
                    );
                }
                1 => {
                    attributes
                        .insert("value".into(), AttrValue::Num(rng.random_range(-30.0..30.0)));
                }
                2 => {
                    let args: Vec<String> = (0..rng.random_range(0..4usize))
                        .map(|j| j.to_string())
                        .collect();
                    attributes.insert("arguments".into(), AttrValue::List(args));
                }
                _ => {}
            }
            AstNode {
                id: i.to_string(),
                kind: kind.into(),
                attributes,
            }
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if rng.random_bool(0.25) {
                edges.push((a, b));
            }
        }
    }
    Sdfg::from_nodes("g", nodes, edges)
}

// ---------------------------------------------------------------------------
// Criterion 5: worked-example regression

#[test]
fn criterion_5_worked_example_regression() {
    let call = |id: &str, argc: usize| AstNode {
        id: id.into(),
        kind: "Call".into(),
        attributes: [(
            "arguments".to_string(),
            AttrValue::List((0..argc).map(|i| format!("x{i}")).collect()),
        )]
        .into_iter()
        .collect(),
    };
    let plain = |id: &str| AstNode {
        id: id.into(),
        kind: "LocalVar".into(),
        attributes: BTreeMap::new(),
    };
    let a1 = 2usize;
    let a4 = 3usize;
    let g = Sdfg::from_nodes(
        "w",
        vec![call("v1", a1), plain("v2"), plain("v3"), call("v4", a4)],
        [(0, 1), (1, 2), (2, 3)],
    );
    let mu = PageRankMeasure::from_probabilities(vec![0.1, 0.15, 0.25, 0.5], 0.15).unwrap();
    let partition = Partition::open(vec![0.05, 0.12, 0.20, 0.95]).unwrap();
    let catalog = default_catalog::<f64>();
    let num_pass = catalog.iter().find(|f| f.name == "NumPass2Call").unwrap();
    let result = antiderivative(&g, &mu, num_pass, &partition);

    // Inclusive filtration: the vertex admitted at the second threshold
    // stays in every later one.
    assert_eq!(result.values[0], 0.0);
    assert_eq!(result.values[1], a1 as f64 * 0.1);
    assert_eq!(result.values[2], a1 as f64 * 0.1);
    assert_eq!(result.values[3], a1 as f64 * 0.1 + a4 as f64 * 0.5);
    println!(
        "ACCEPTANCE 5 PASS: antiderivative ({}, {}, {}, {}) matches the inclusive-filtration definition",
        result.values[0], result.values[1], result.values[2], result.values[3]
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: similarity properties

#[test]
fn criterion_6_similarity_properties() {
    let cfg = VectorizeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let vectors: Vec<_> = (0..50)
        .map(|_| vectorize_graph::<f64>(&attributed_graph(&mut rng), &cfg).unwrap())
        .collect();

    for _ in 0..10_000 {
        let a = &vectors[rng.random_range(0..vectors.len())];
        let b = &vectors[rng.random_range(0..vectors.len())];
        let c = &vectors[rng.random_range(0..vectors.len())];
        let ab = graph_similarity(a, b, 2.0).unwrap();
        let ba = graph_similarity(b, a, 2.0).unwrap();
        assert_eq!(ab, ba, "symmetry must be exact");
        let bc = graph_similarity(b, c, 2.0).unwrap();
        let ac = graph_similarity(a, c, 2.0).unwrap();
        assert!(ac <= ab + bc + 1e-12, "triangle inequality violated");
    }

    // Two-vertex graphs with one shared label and a single-indicator catalog
    // are indistinguishable: similarity is exactly zero.
    let mut counter_cfg = VectorizeConfig::default();
    counter_cfg.expected_type_kinds = vec!["a".to_string()];
    let g = Sdfg::from_kinds("g", &["a", "b"], [(0, 1)]);
    let h = Sdfg::from_kinds("h", &["a", "c"], [(0, 1)]);
    let vg = vectorize_graph::<f64>(&g, &counter_cfg).unwrap();
    let vh = vectorize_graph::<f64>(&h, &counter_cfg).unwrap();
    let distance = graph_similarity(&vg, &vh, 2.0).unwrap();
    assert_eq!(distance, 0.0, "counterexample must sit at exactly zero");
    println!("ACCEPTANCE 6 PASS: symmetry exact, 10000 triangles within 1e-12, counterexample at 0");
}

// ---------------------------------------------------------------------------
// Criterion 7: branch-merge and hello-world regressions

#[test]
fn criterion_7_graph_shape_regressions() {
    // if foo() { bar(); } else { baz(); } bla();
    let raw = br#"{"file_id":"fig","functions":[{
        "name": "branchy",
        "entry": ["5", "4"],
        "nodes": {
            "1": {"type": "Call", "fnName": "foo"},
            "2": {"type": "Call", "fnName": "bar"},
            "3": {"type": "Call", "fnName": "baz"},
            "4": {"type": "Call", "fnName": "bla"},
            "5": {"type": "If", "cond": "1", "then": ["2"], "else": ["3"]}
        }
    }]}"#;
    let doc = parse_file_document(raw).unwrap();
    let g = build_sdfg(&doc.functions[0]);
    assert_eq!(g.node_count(), 4);
    assert_eq!(g.edge_count(), 4);
    let name = |i: usize| {
        g.nodes[i]
            .attr("fnName")
            .and_then(AttrValue::as_str)
            .unwrap()
            .to_string()
    };
    let edges: std::collections::BTreeSet<(String, String)> =
        g.edges.iter().map(|&(a, b)| (name(a), name(b))).collect();
    let expected: std::collections::BTreeSet<(String, String)> = [
        ("foo", "bar"),
        ("foo", "baz"),
        ("bar", "bla"),
        ("baz", "bla"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    assert_eq!(edges, expected);

    // A minimal hello-world: a Main writing one literal plus the implicit
    // constructor. Two linear SDFGs, no intra-file calls.
    let hello = br#"{"file_id":"hello","functions":[
        {"name":"Main","entry":["2"],"nodes":{
            "1":{"type":"CLRLiteral","value":"Hello, World!"},
            "2":{"type":"Call","fnName":"WriteLine","arguments":["1"],"target":"Console"}}},
        {"name":"Hello..ctor","entry":["1","2"],"nodes":{
            "1":{"type":"Call","fnName":"Object..ctor"},
            "2":{"type":"Return"}}}
    ]}"#;
    let hello_doc = parse_file_document(hello).unwrap();
    let call_graph = build_call_graph(&hello_doc);
    assert_eq!(call_graph.edge_count(), 0, "call graph must be empty of edges");
    for function in &hello_doc.functions {
        let graph = build_sdfg(function);
        assert_eq!(
            graph.edge_count(),
            graph.node_count() - 1,
            "{} must be linear",
            function.function_name
        );
        let mut out_degree = vec![0usize; graph.node_count()];
        let mut in_degree = vec![0usize; graph.node_count()];
        for &(a, b) in &graph.edges {
            out_degree[a] += 1;
            in_degree[b] += 1;
        }
        assert!(out_degree.iter().all(|&d| d <= 1));
        assert!(in_degree.iter().all(|&d| d <= 1));
    }
    println!("ACCEPTANCE 7 PASS: 4-node/4-edge branch merge and two linear hello-world SDFGs");
}

// ---------------------------------------------------------------------------
// Criterion 8: end-to-end determinism through the binary

fn pmiv_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmiv"))
}

fn run_bin(cmd: &mut Command) {
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn criterion_8_pipeline_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    run_bin(pmiv_bin()
        .arg("synth")
        .arg("--out")
        .arg(&corpus)
        .args(["--preset", "texture", "--files", "25", "--seed", "8"]));

    let read = |p: &Path| std::fs::read(p).unwrap();
    let run_once = |tag: &str| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        let vectors = tmp.path().join(format!("v_{tag}.jsonl"));
        let model = tmp.path().join(format!("m_{tag}.json"));
        let scores = tmp.path().join(format!("s_{tag}.jsonl"));
        run_bin(pmiv_bin()
            .arg("vectorize")
            .arg(&corpus)
            .arg("--out")
            .arg(&vectors)
            .args(["--mode", "pmiv", "--workers", "2"]));
        run_bin(pmiv_bin()
            .arg("train")
            .arg("--vectors")
            .arg(&vectors)
            .arg("--labels")
            .arg(corpus.join("manifest.json"))
            .arg("--model-out")
            .arg(&model)
            .args(["--seed", "8"]));
        run_bin(pmiv_bin()
            .arg("score")
            .arg(&corpus)
            .arg("--model")
            .arg(&model)
            .arg("--out")
            .arg(&scores)
            .args(["--workers", "2"]));
        (read(&vectors), read(&model), read(&scores))
    };

    let (v1, m1, s1) = run_once("a");
    let (v2, m2, s2) = run_once("b");
    assert_eq!(v1, v2, "vector bytes must be identical across reruns");
    assert_eq!(m1, m2, "model bytes must be identical across reruns");
    assert_eq!(s1, s2, "score bytes must be identical across reruns");

    // Dedup digests are invariant under function permutation.
    let base = br#"{"file_id":"orig","functions":[
        {"name":"a","entry":["1"],"nodes":{"1":{"type":"Call","fnName":"x"}}},
        {"name":"b","entry":["1","2"],"nodes":{
            "1":{"type":"CLRLiteral","value":4.0},
            "2":{"type":"Return"}}}
    ]}"#;
    let permuted = br#"{"file_id":"perm","functions":[
        {"name":"b","entry":["1","2"],"nodes":{
            "1":{"type":"CLRLiteral","value":4.0},
            "2":{"type":"Return"}}},
        {"name":"a","entry":["1"],"nodes":{"1":{"type":"Call","fnName":"x"}}}
    ]}"#;
    let pair_dir = tmp.path().join("pair");
    std::fs::create_dir(&pair_dir).unwrap();
    std::fs::write(pair_dir.join("orig.json"), base).unwrap();
    std::fs::write(pair_dir.join("perm.json"), permuted).unwrap();
    let dedup_out = tmp.path().join("dedup.json");
    run_bin(pmiv_bin().arg("dedup").arg(&pair_dir).arg("--out").arg(&dedup_out));
    let manifest: serde_json::Value = serde_json::from_slice(&read(&dedup_out)).unwrap();
    let files = manifest["files"].as_object().unwrap();
    assert_eq!(files["orig"], files["perm"], "permuted file must share the digest");
    assert_eq!(manifest["groups"].as_object().unwrap().len(), 1);
    println!("ACCEPTANCE 8 PASS: byte-identical vectorize/train/score reruns; dedup permutation-invariant");
}

// ---------------------------------------------------------------------------
// Criterion 9: scoring throughput

#[test]
fn criterion_9_scoring_throughput() {
    let tmp = tempfile::tempdir().unwrap();
    // Files of up to 50 functions.
    let spec = serde_json::json!({
        "files_per_class": 15,
        "functions_per_file": [30, 50],
        "ops_per_function": [6, 24],
        "class_a": {"branch_prob": 0.15, "loop_prob": 0.1},
        "class_b": {"branch_prob": 0.3, "loop_prob": 0.2, "crypto_name_prob": 0.3},
        "seed": 99
    });
    let spec_path = tmp.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_vec(&spec).unwrap()).unwrap();
    let corpus = tmp.path().join("corpus");
    run_bin(pmiv_bin().arg("synth").arg("--out").arg(&corpus).arg("--spec").arg(&spec_path));

    let vectors = tmp.path().join("v.jsonl");
    run_bin(pmiv_bin().arg("vectorize").arg(&corpus).arg("--out").arg(&vectors));
    let model = tmp.path().join("m.json");
    run_bin(pmiv_bin()
        .arg("train")
        .arg("--vectors")
        .arg(&vectors)
        .arg("--labels")
        .arg(corpus.join("manifest.json"))
        .arg("--model-out")
        .arg(&model)
        .args(["--seed", "99"]));

    let scores = tmp.path().join("s.jsonl");
    let timing = tmp.path().join("timing.json");
    run_bin(pmiv_bin()
        .arg("score")
        .arg(&corpus)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&scores)
        .args(["--workers", "1"])
        .arg("--timing-out")
        .arg(&timing));

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&timing).unwrap()).unwrap();
    let median = summary["median_ms"].as_f64().unwrap();
    assert_eq!(summary["files"].as_u64().unwrap(), 30);
    assert!(
        median <= 50.0,
        "median per-file vectorize+score latency {median}ms exceeds 50ms"
    );
    println!(
        "ACCEPTANCE 9 PASS: median per-file latency {median:.2}ms (<= 50ms), p95 {:.2}ms",
        summary["p95_ms"].as_f64().unwrap()
    );
}
