//! Seeded synthetic corpus generation for classifier experiments.
//!
//! Two labeled classes of file documents are produced with controllable
//! structural and textual parameters. Each function first draws a stream of
//! operation nodes (kinds, names, literals, call arguments), then arranges
//! that stream either as a flat statement chain or into `If`/`Loop`
//! structures. Because arrangement happens after the operation draw, two
//! classes with identical textual parameters emit identically distributed
//! node multisets no matter how differently they are wired - which is exactly
//! what the topology-only preset exploits: the uniform-measure baseline sees
//! the same marginals for both classes while the PageRank profiles differ.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ast::{AstDocument, AstNode, AttrValue, FileDocument};
use crate::error::{Error, Result};
use crate::forest::Label;
use crate::sdfg::build_sdfg;

/// Textual and structural knobs for one class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    /// Probability that a statement position opens a two-arm branch.
    pub branch_prob: f64,
    /// Probability that a statement position opens a loop.
    pub loop_prob: f64,
    /// Probability that a generated call targets another in-file function.
    pub call_density: f64,
    /// Probability that a function name carries a crypto token.
    pub crypto_name_prob: f64,
    /// Operation kind distribution as (kind, weight) pairs.
    pub kind_weights: Vec<(String, f64)>,
    /// Normal distribution of numeric literals.
    pub literal_mean: f64,
    pub literal_std: f64,
    /// Call argument count is uniform in 0..=max_call_args.
    pub max_call_args: usize,
    /// External callee name vocabulary.
    pub name_vocab: Vec<String>,
    /// Type-name vocabulary (ctor types, var types, class refs).
    pub type_vocab: Vec<String>,
    /// Field-name vocabulary.
    pub field_vocab: Vec<String>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            branch_prob: 0.2,
            loop_prob: 0.1,
            call_density: 0.3,
            crypto_name_prob: 0.05,
            kind_weights: vec![
                ("Call".into(), 3.0),
                ("BinaryOp".into(), 2.0),
                ("LocalVar".into(), 2.0),
                ("CLRLiteral".into(), 1.5),
                ("StoreLocal".into(), 1.5),
                ("CtorCall".into(), 1.0),
                ("FieldReference".into(), 1.0),
                ("ClassRef".into(), 0.5),
                ("CLRVariableWithInitializer".into(), 0.5),
            ],
            literal_mean: 10.0,
            literal_std: 5.0,
            max_call_args: 3,
            name_vocab: vec![
                "Write".into(),
                "Read".into(),
                "ToString".into(),
                "Parse".into(),
                "GetValue".into(),
                "Dispose".into(),
            ],
            type_vocab: vec![
                "System.String".into(),
                "System.Int32".into(),
                "System.Object".into(),
                "System.IO.Stream".into(),
            ],
            field_vocab: vec!["length".into(), "buffer".into(), "state".into()],
        }
    }
}

/// Full corpus description; class A is labeled benign, class B malicious.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub files_per_class: usize,
    /// Inclusive range of functions per file.
    pub functions_per_file: (usize, usize),
    /// Inclusive range of operation nodes per function.
    pub ops_per_function: (usize, usize),
    pub class_a: GeneratorParams,
    pub class_b: GeneratorParams,
    pub seed: u64,
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        if self.files_per_class == 0 {
            return Err(Error::InvalidConfig("files_per_class must be at least 1".into()));
        }
        let ok_range = |(lo, hi): (usize, usize)| lo >= 1 && lo <= hi;
        if !ok_range(self.functions_per_file) || !ok_range(self.ops_per_function) {
            return Err(Error::InvalidConfig(
                "functions_per_file and ops_per_function must be nonempty ranges".into(),
            ));
        }
        for params in [&self.class_a, &self.class_b] {
            if params.kind_weights.is_empty()
                || params.kind_weights.iter().any(|(_, w)| w.is_nan() || *w <= 0.0)
            {
                return Err(Error::InvalidConfig(
                    "kind_weights must be nonempty with positive weights".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Labels file written next to a generated corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub preset: Option<String>,
    pub labels: BTreeMap<String, Label>,
}

const CRYPTO_TOKENS: &[&str] = &["aes", "rsa", "sha", "md5", "rc4", "crypto", "des"];

/// Generates the labeled corpus described by `spec`; deterministic in the
/// seed.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<(FileDocument, Label)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut corpus = Vec::with_capacity(spec.files_per_class * 2);
    for (class_tag, params, label) in [
        ("a", &spec.class_a, Label::Benign),
        ("b", &spec.class_b, Label::Malicious),
    ] {
        for index in 0..spec.files_per_class {
            let doc = generate_file(spec, params, class_tag, index, &mut rng);
            corpus.push((doc, label));
        }
    }
    Ok(corpus)
}

/// Topology-only variant: class B inherits every textual parameter from
/// class A and differs only in branch and loop probabilities.
pub fn generate_topology_only(spec: &CorpusSpec) -> Result<Vec<(FileDocument, Label)>> {
    let mut spec = spec.clone();
    let mut class_b = spec.class_a.clone();
    class_b.branch_prob = spec.class_b.branch_prob;
    class_b.loop_prob = spec.class_b.loop_prob;
    spec.class_b = class_b;
    generate(&spec)
}

/// Preset with strong textual separation between the classes.
pub fn texture_spec(files_per_class: usize, seed: u64) -> CorpusSpec {
    let class_a = GeneratorParams {
        branch_prob: 0.15,
        loop_prob: 0.1,
        call_density: 0.25,
        crypto_name_prob: 0.02,
        literal_mean: 10.0,
        literal_std: 5.0,
        ..GeneratorParams::default()
    };
    let class_b = GeneratorParams {
        branch_prob: 0.2,
        loop_prob: 0.12,
        call_density: 0.45,
        crypto_name_prob: 0.35,
        literal_mean: 140.0,
        literal_std: 60.0,
        kind_weights: vec![
            ("Call".into(), 4.0),
            ("CtorCall".into(), 2.5),
            ("FieldReference".into(), 2.0),
            ("BinaryOp".into(), 1.0),
            ("CLRLiteral".into(), 1.0),
            ("StoreLocal".into(), 0.5),
            ("LocalVar".into(), 0.5),
            ("TypeCast".into(), 1.0),
        ],
        name_vocab: vec![
            "VirtualAlloc".into(),
            "WriteProcessMemory".into(),
            "DownloadString".into(),
            "Invoke".into(),
            "FromBase64String".into(),
        ],
        type_vocab: vec![
            "System.Reflection.Assembly".into(),
            "System.Net.WebClient".into(),
            "System.Diagnostics.Process".into(),
        ],
        field_vocab: vec!["payload".into(), "key".into(), "stub".into()],
        ..GeneratorParams::default()
    };
    CorpusSpec {
        files_per_class,
        functions_per_file: (2, 6),
        ops_per_function: (6, 24),
        class_a,
        class_b,
        seed,
    }
}

/// Preset where the classes share every textual distribution and differ only
/// in wiring: chains versus branch/loop-heavy structure.
pub fn topology_spec(files_per_class: usize, seed: u64) -> CorpusSpec {
    let shared = GeneratorParams {
        branch_prob: 0.0,
        loop_prob: 0.0,
        call_density: 0.3,
        crypto_name_prob: 0.05,
        ..GeneratorParams::default()
    };
    let mut class_b = shared.clone();
    class_b.branch_prob = 0.45;
    class_b.loop_prob = 0.35;
    CorpusSpec {
        files_per_class,
        functions_per_file: (3, 8),
        ops_per_function: (8, 28),
        class_a: shared,
        class_b,
        seed,
    }
}

fn generate_file(
    spec: &CorpusSpec,
    params: &GeneratorParams,
    class_tag: &str,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> FileDocument {
    let file_id = {
        let mut hasher = Sha256::new();
        hasher.update(spec.seed.to_le_bytes());
        hasher.update(class_tag.as_bytes());
        hasher.update(index.to_le_bytes());
        hex::encode(&Sha256::finalize(hasher)[..8])
    };

    let n_functions = range_sample(rng, spec.functions_per_file);
    let mut function_names = Vec::with_capacity(n_functions);
    for i in 0..n_functions {
        let mut name = format!("fn{index}_{i}");
        if rng.random_bool(params.crypto_name_prob.clamp(0.0, 1.0)) {
            let token = CRYPTO_TOKENS[rng.random_range(0..CRYPTO_TOKENS.len())];
            name = format!("{name}_{token}");
        }
        function_names.push(name);
    }

    let functions = function_names
        .iter()
        .map(|name| generate_function(spec, params, name, &function_names, rng))
        .collect();

    FileDocument {
        file_id,
        functions,
        call_edges: None,
    }
}

/// One function: draw the operation stream first, then arrange it.
fn generate_function(
    spec: &CorpusSpec,
    params: &GeneratorParams,
    name: &str,
    file_functions: &[String],
    rng: &mut ChaCha8Rng,
) -> AstDocument {
    let op_count = range_sample(rng, spec.ops_per_function);
    let mut builder = FunctionBuilder {
        nodes: BTreeMap::new(),
        next_id: 0,
    };
    let ops: Vec<String> = (0..op_count)
        .map(|_| builder.draw_operation(params, file_functions, rng))
        .collect();
    let entry_ids = arrange(&mut builder, &ops, params, rng);
    AstDocument {
        function_name: name.to_string(),
        nodes: builder.nodes,
        entry_ids,
    }
}

struct FunctionBuilder {
    nodes: BTreeMap<String, AstNode>,
    next_id: usize,
}

impl FunctionBuilder {
    fn add(&mut self, kind: &str, attrs: Vec<(&str, AttrValue)>) -> String {
        let id = self.next_id.to_string();
        self.next_id += 1;
        self.nodes.insert(
            id.clone(),
            AstNode {
                id: id.clone(),
                kind: kind.to_string(),
                attributes: attrs
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            },
        );
        id
    }

    /// Draws one operation node (plus any argument leaves) from the class
    /// distribution.
    fn draw_operation(
        &mut self,
        params: &GeneratorParams,
        file_functions: &[String],
        rng: &mut ChaCha8Rng,
    ) -> String {
        let weights = WeightedIndex::new(params.kind_weights.iter().map(|(_, w)| *w))
            .expect("validated weights");
        let kind = params.kind_weights[weights.sample(rng)].0.clone();
        let pick = |list: &[String], rng: &mut ChaCha8Rng| list[rng.random_range(0..list.len())].clone();
        match kind.as_str() {
            "Call" => {
                let fn_name = if !file_functions.is_empty()
                    && rng.random_bool(params.call_density.clamp(0.0, 1.0))
                {
                    file_functions[rng.random_range(0..file_functions.len())].clone()
                } else {
                    pick(&params.name_vocab, rng)
                };
                let n_args = rng.random_range(0..=params.max_call_args);
                let args: Vec<String> = (0..n_args).map(|_| self.leaf(params, rng)).collect();
                self.add(
                    "Call",
                    vec![
                        ("fnName", AttrValue::Str(fn_name)),
                        ("arguments", AttrValue::List(args)),
                    ],
                )
            }
            "CtorCall" => {
                let ctor = pick(&params.type_vocab, rng);
                self.add("CtorCall", vec![("ctorType", AttrValue::Str(ctor))])
            }
            "BinaryOp" => {
                const OPCODES: &[&str] = &["add", "sub", "mul", "div", "ceq", "cgt", "clt", "and"];
                let op = OPCODES[rng.random_range(0..OPCODES.len())];
                self.add("BinaryOp", vec![("whichOpCode", AttrValue::Str(op.into()))])
            }
            "CLRLiteral" => {
                let value = normal_sample(rng, params.literal_mean, params.literal_std);
                self.add("CLRLiteral", vec![("value", AttrValue::Num(value))])
            }
            "LocalVar" => {
                let name = format!("var{}", rng.random_range(0..16));
                self.add("LocalVar", vec![("name", AttrValue::Str(name))])
            }
            "FieldReference" => {
                let field = pick(&params.field_vocab, rng);
                self.add("FieldReference", vec![("fieldName", AttrValue::Str(field))])
            }
            "ClassRef" => {
                let class = pick(&params.type_vocab, rng);
                self.add("ClassRef", vec![("name", AttrValue::Str(class))])
            }
            "CLRVariableWithInitializer" => {
                let var_type = pick(&params.type_vocab, rng);
                let name = format!("var{}", rng.random_range(0..16));
                self.add(
                    "CLRVariableWithInitializer",
                    vec![
                        ("varType", AttrValue::Str(var_type)),
                        ("name", AttrValue::Str(name)),
                    ],
                )
            }
            "StoreLocal" => {
                let idx = rng.random_range(0..8);
                let value = normal_sample(rng, params.literal_mean, params.literal_std);
                self.add(
                    "StoreLocal",
                    vec![
                        ("localIdx", AttrValue::Num(f64::from(idx))),
                        ("value", AttrValue::Num(value)),
                    ],
                )
            }
            "TypeCast" => {
                let target = pick(&params.type_vocab, rng);
                self.add("TypeCast", vec![("castedType", AttrValue::Str(target))])
            }
            other => self.add(other, Vec::new()),
        }
    }

    fn leaf(&mut self, params: &GeneratorParams, rng: &mut ChaCha8Rng) -> String {
        if rng.random_bool(0.5) {
            let value = normal_sample(rng, params.literal_mean, params.literal_std);
            self.add("CLRLiteral", vec![("value", AttrValue::Num(value))])
        } else {
            let name = format!("var{}", rng.random_range(0..16));
            self.add("LocalVar", vec![("name", AttrValue::Str(name))])
        }
    }
}

/// Wires an operation stream into statements: plain chain entries, or
/// `If`/`Loop` structures that consume following operations as arms/bodies.
/// Arms and bodies are arranged recursively, so structure nests.
fn arrange(
    builder: &mut FunctionBuilder,
    ops: &[String],
    params: &GeneratorParams,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut entries = Vec::new();
    let mut i = 0usize;
    let branch = params.branch_prob.clamp(0.0, 1.0);
    let looping = params.loop_prob.clamp(0.0, 1.0);
    while i < ops.len() {
        let remaining = ops.len() - i;
        let draw: f64 = rng.random();
        if draw < branch && remaining >= 3 {
            let then_len = rng.random_range(1..=(remaining - 2).min(4));
            let else_len = rng.random_range(1..=(remaining - 1 - then_len).min(4));
            let cond = ops[i].clone();
            let then_arm = arrange(builder, &ops[i + 1..i + 1 + then_len], params, rng);
            let else_arm = arrange(
                builder,
                &ops[i + 1 + then_len..i + 1 + then_len + else_len],
                params,
                rng,
            );
            let if_id = builder.add(
                "If",
                vec![
                    ("cond", AttrValue::Str(cond)),
                    ("then", AttrValue::List(then_arm)),
                    ("else", AttrValue::List(else_arm)),
                ],
            );
            entries.push(if_id);
            i += 1 + then_len + else_len;
        } else if draw < branch + looping && remaining >= 2 {
            let body_len = rng.random_range(1..=(remaining - 1).min(4));
            let cond = ops[i].clone();
            let body = arrange(builder, &ops[i + 1..i + 1 + body_len], params, rng);
            let loop_id = builder.add(
                "Loop",
                vec![
                    ("cond", AttrValue::Str(cond)),
                    ("body", AttrValue::List(body)),
                ],
            );
            entries.push(loop_id);
            i += 1 + body_len;
        } else {
            entries.push(ops[i].clone());
            i += 1;
        }
    }
    entries
}

fn range_sample(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

/// Box-Muller normal sample.
fn normal_sample(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    // Round for stable JSON round-trips.
    ((mean + std * z) * 1e6).round() / 1e6
}

/// Chi-square homogeneity statistic over the pooled SDFG-vertex kind
/// histograms of the two classes. Returns `(statistic, degrees_of_freedom)`.
pub fn kind_histogram_chi_square(corpus: &[(FileDocument, Label)]) -> (f64, usize) {
    let mut histograms: [BTreeMap<String, usize>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for (doc, label) in corpus {
        let class = match label {
            Label::Benign => 0usize,
            Label::Malicious => 1,
        };
        for function in &doc.functions {
            let graph = build_sdfg(function);
            for node in &graph.nodes {
                *histograms[class].entry(node.kind.clone()).or_insert(0) += 1;
            }
        }
    }
    let kinds: std::collections::BTreeSet<&String> =
        histograms.iter().flat_map(|h| h.keys()).collect();
    let totals: [f64; 2] = [
        histograms[0].values().sum::<usize>() as f64,
        histograms[1].values().sum::<usize>() as f64,
    ];
    let grand_total = totals[0] + totals[1];
    let mut statistic = 0.0;
    for kind in &kinds {
        let kind_total = (histograms[0].get(*kind).copied().unwrap_or(0)
            + histograms[1].get(*kind).copied().unwrap_or(0)) as f64;
        for class in 0..2 {
            let expected = kind_total * totals[class] / grand_total;
            if expected > 0.0 {
                let observed = histograms[class].get(*kind).copied().unwrap_or(0) as f64;
                let diff = observed - expected;
                statistic += diff * diff / expected;
            }
        }
    }
    (statistic, kinds.len().saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{parse_file_document, serialize_file_document};

    fn tiny_spec(seed: u64) -> CorpusSpec {
        CorpusSpec {
            files_per_class: 5,
            functions_per_file: (1, 3),
            ops_per_function: (3, 10),
            class_a: GeneratorParams::default(),
            class_b: GeneratorParams {
                branch_prob: 0.5,
                ..GeneratorParams::default()
            },
            seed,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&tiny_spec(7)).unwrap();
        let b = generate(&tiny_spec(7)).unwrap();
        let bytes = |corpus: &[(FileDocument, Label)]| -> Vec<u8> {
            corpus
                .iter()
                .flat_map(|(doc, _)| serialize_file_document(doc))
                .collect()
        };
        assert_eq!(bytes(&a), bytes(&b));
        let c = generate(&tiny_spec(8)).unwrap();
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn zero_branching_yields_chains() {
        let mut spec = tiny_spec(3);
        spec.class_a.branch_prob = 0.0;
        spec.class_a.loop_prob = 0.0;
        spec.class_b = spec.class_a.clone();
        for (doc, _) in generate(&spec).unwrap() {
            for function in &doc.functions {
                let graph = build_sdfg(function);
                assert!(graph.node_count() >= 1);
                assert_eq!(graph.edge_count(), graph.node_count() - 1, "not a chain");
                let mut out_degree = vec![0usize; graph.node_count()];
                for &(a, _) in &graph.edges {
                    out_degree[a] += 1;
                }
                assert!(out_degree.iter().all(|&d| d <= 1));
            }
        }
    }

    #[test]
    fn generated_documents_round_trip_through_the_parser() {
        for (doc, _) in generate(&tiny_spec(11)).unwrap() {
            let bytes = serialize_file_document(&doc);
            let reparsed = parse_file_document(&bytes).unwrap();
            assert_eq!(doc, reparsed);
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let mut spec = tiny_spec(1);
        spec.files_per_class = 0;
        assert!(generate(&spec).is_err());
        let mut spec = tiny_spec(1);
        spec.ops_per_function = (5, 2);
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn topology_only_shares_textual_parameters() {
        let spec = topology_spec(4, 9);
        let corpus = generate_topology_only(&spec).unwrap();
        assert_eq!(corpus.len(), 8);
        // Structure differs: class B must contain If/Loop nodes, class A none.
        let has_structure = |doc: &FileDocument| {
            doc.functions
                .iter()
                .any(|f| f.nodes.values().any(|n| n.kind == "If" || n.kind == "Loop"))
        };
        assert!(corpus
            .iter()
            .filter(|(_, l)| *l == Label::Benign)
            .all(|(d, _)| !has_structure(d)));
        assert!(corpus
            .iter()
            .filter(|(_, l)| *l == Label::Malicious)
            .any(|(d, _)| has_structure(d)));
    }

    #[test]
    fn topology_preset_passes_the_chi_square_sanity_check() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for seed in [1u64, 2, 3] {
            let corpus = generate_topology_only(&topology_spec(60, seed)).unwrap();
            let (statistic, df) = kind_histogram_chi_square(&corpus);
            assert!(df >= 1);
            let critical = ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99);
            assert!(
                statistic < critical,
                "seed {seed}: statistic {statistic} exceeds the 0.99 quantile {critical} (df {df})"
            );
        }
    }

    #[test]
    fn texture_corpora_parse_and_carry_both_labels() {
        let corpus = generate(&texture_spec(3, 5)).unwrap();
        assert_eq!(corpus.len(), 6);
        assert!(corpus.iter().any(|(_, l)| *l == Label::Benign));
        assert!(corpus.iter().any(|(_, l)| *l == Label::Malicious));
        for (doc, _) in &corpus {
            assert!(!doc.functions.is_empty());
            let bytes = serialize_file_document(doc);
            parse_file_document(&bytes).unwrap();
        }
    }
}
