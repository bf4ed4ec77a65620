//! Shared builders for the integration tests: seeded random documents and
//! graphs independent of the production generator.

use std::collections::BTreeMap;

use pmiv::ast::{AstDocument, AstNode, AttrValue};
use pmiv::sdfg::Sdfg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OP_KINDS: &[&str] = &[
    "Call",
    "BinaryOp",
    "LocalVar",
    "CLRLiteral",
    "StoreLocal",
    "FieldReference",
    "ClassRef",
    "CtorCall",
    "CLRVariableWithInitializer",
    "UnaryOp",
    "Return",
];

/// Random AST document exercising chains, branches, loops, terminators,
/// missing arms, and cross-references.
pub fn random_document(seed: u64) -> AstDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = DocBuilder {
        nodes: BTreeMap::new(),
        next: 0,
        rng,
    };
    let budget = builder.rng.random_range(2..20usize);
    let entries = builder.statements(budget, 0);
    // Sprinkle data references at existing nodes, sometimes forming cycles.
    let ids: Vec<String> = builder.nodes.keys().cloned().collect();
    if ids.len() >= 2 {
        for _ in 0..builder.rng.random_range(0..3usize) {
            let from = ids[builder.rng.random_range(0..ids.len())].clone();
            let to = ids[builder.rng.random_range(0..ids.len())].clone();
            if let Some(node) = builder.nodes.get_mut(&from) {
                if node.kind != "If" && node.kind != "Loop" {
                    node.attributes.insert("value".into(), AttrValue::Str(to));
                }
            }
        }
    }
    AstDocument {
        function_name: format!("f{seed}"),
        nodes: builder.nodes,
        entry_ids: entries,
    }
}

struct DocBuilder {
    nodes: BTreeMap<String, AstNode>,
    next: usize,
    rng: ChaCha8Rng,
}

impl DocBuilder {
    fn add(&mut self, kind: &str, attrs: Vec<(&str, AttrValue)>) -> String {
        let id = self.next.to_string();
        self.next += 1;
        self.nodes.insert(
            id.clone(),
            AstNode {
                id: id.clone(),
                kind: kind.into(),
                attributes: attrs
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v))
                    .collect(),
            },
        );
        id
    }

    fn op(&mut self) -> String {
        let kind = OP_KINDS[self.rng.random_range(0..OP_KINDS.len())];
        let mut attrs = Vec::new();
        if kind == "Call" {
            attrs.push(("fnName", AttrValue::Str(format!("g{}", self.rng.random_range(0..5)))));
            if self.rng.random_bool(0.5) {
                let n = self.rng.random_range(0..3usize);
                let args: Vec<String> = (0..n)
                    .map(|_| self.add("CLRLiteral", vec![("value", AttrValue::Num(1.5))]))
                    .collect();
                attrs.push(("arguments", AttrValue::List(args)));
            }
        }
        self.add(kind, attrs)
    }

    fn statements(&mut self, budget: usize, depth: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut left = budget;
        while left > 0 {
            let roll: f64 = self.rng.random();
            if roll < 0.2 && left >= 3 && depth < 3 {
                // Branch; arms may be empty or missing.
                let cond = self.op();
                let then_n = self.rng.random_range(0..left.min(4));
                let then_arm = self.statements(then_n, depth + 1);
                let else_n = self.rng.random_range(0..(left.saturating_sub(then_n)).min(4));
                let mut attrs = vec![("cond", AttrValue::Str(cond))];
                attrs.push(("then", AttrValue::List(then_arm)));
                if self.rng.random_bool(0.7) {
                    let else_arm = self.statements(else_n, depth + 1);
                    attrs.push(("else", AttrValue::List(else_arm)));
                }
                out.push(self.add("If", attrs));
                left = left.saturating_sub(1 + then_n + else_n);
            } else if roll < 0.35 && left >= 2 && depth < 3 {
                let cond = self.op();
                let body_n = self.rng.random_range(1..=left.saturating_sub(1).min(4));
                let body = self.statements(body_n, depth + 1);
                out.push(self.add(
                    "Loop",
                    vec![("cond", AttrValue::Str(cond)), ("body", AttrValue::List(body))],
                ));
                left = left.saturating_sub(1 + body_n);
            } else {
                out.push(self.op());
                left -= 1;
            }
        }
        out
    }
}

/// Random digraph with up to `max_nodes` vertices, arbitrary density, random
/// kinds and attributes.
pub fn random_graph(seed: u64, max_nodes: usize) -> Sdfg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_nodes);
    let nodes: Vec<AstNode> = (0..n)
        .map(|i| {
            let kind = OP_KINDS[rng.random_range(0..OP_KINDS.len())];
            let mut attributes: BTreeMap<String, AttrValue> = BTreeMap::new();
            match rng.random_range(0..4u8) {
                0 => {
                    attributes.insert(
                        "fnName".into(),
                        AttrValue::Str(format!("h{}", rng.random_range(0..9))),
                    );
                }
                1 => {
                    attributes.insert(
                        "value".into(),
                        AttrValue::Num(rng.random_range(-50.0..50.0)),
                    );
                }
                2 => {
                    let args: Vec<String> =
                        (0..rng.random_range(0..4usize)).map(|j| j.to_string()).collect();
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
    Sdfg::from_nodes(format!("g{seed}"), nodes, edges)
}

/// Dense stationary-vector oracle: builds the full smoothed matrix and
/// multiplies until numerically fixed.
pub fn dense_pagerank_oracle(g: &Sdfg, p: f64) -> Vec<f64> {
    let n = g.node_count();
    assert!(n > 0);
    let mut transition = vec![vec![0.0f64; n]; n];
    let mut out_degree = vec![0usize; n];
    for &(a, _) in &g.edges {
        out_degree[a] += 1;
    }
    for i in 0..n {
        if out_degree[i] == 0 {
            for j in 0..n {
                transition[i][j] = 1.0 / n as f64;
            }
        }
    }
    for &(a, b) in &g.edges {
        transition[a][b] = 1.0 / out_degree[a] as f64;
    }
    let smoothed: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (1.0 - p) * transition[i][j] + p / n as f64)
                .collect()
        })
        .collect();

    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..20_000 {
        let mut next = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                next[j] += x[i] * smoothed[i][j];
            }
        }
        let delta: f64 = x.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}
