//! Per-file function call graph and its combinatorial feature block.
//!
//! Nodes are function names (file-local functions plus stubs for callees an
//! explicit edge list names but the file does not define). Edges come from an
//! explicit `call_edges` section when present, otherwise from `Call` /
//! `CtorCall` nodes whose `fnName` exactly matches another function's name.
//!
//! Unlike the SDFGs, this graph is never integrated: the features are plain
//! combinatorics (weak-component sizes, degrees, counts) plus a crypto flag.

use std::collections::{BTreeSet, HashMap};

use crate::ast::{AstDocument, AttrValue, FileDocument};

/// Substrings that mark a function as crypto-related, matched
/// case-insensitively against function names and call targets.
pub const DEFAULT_CRYPTO_SUBSTRINGS: &[&str] =
    &["crypto", "aes", "rsa", "des", "sha", "md5", "rc4"];

#[derive(Debug, Clone)]
pub struct CallGraph {
    /// Function names, duplicate-free; document order, stubs appended.
    pub nodes: Vec<String>,
    pub edges: BTreeSet<(usize, usize)>,
    pub crypto_flags: Vec<bool>,
}

impl CallGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph callgraph {\n");
        for (i, name) in self.nodes.iter().enumerate() {
            let marker = if self.crypto_flags[i] { " [crypto]" } else { "" };
            out.push_str(&format!("  n{i} [label=\"{name}{marker}\"];\n"));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("  n{a} -> n{b};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// The combinatorial feature block; all-zero on the empty graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FcgFeatures {
    /// max component size / min component size; 0 when there are no nodes.
    pub component_size_ratio: f64,
    pub component_count: usize,
    pub degree_mean: f64,
    pub degree_std: f64,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub crypto_flag: u8,
}

impl FcgFeatures {
    pub const LEN: usize = 7;

    /// Fixed-order flattening used by the file vectorizer.
    pub fn values(&self) -> [f64; Self::LEN] {
        [
            self.component_size_ratio,
            self.component_count as f64,
            self.degree_mean,
            self.degree_std,
            self.vertex_count as f64,
            self.edge_count as f64,
            f64::from(self.crypto_flag),
        ]
    }

    /// Column names matching [`FcgFeatures::values`].
    pub fn column_names() -> [&'static str; Self::LEN] {
        [
            "fcg_component_size_ratio",
            "fcg_component_count",
            "fcg_degree_mean",
            "fcg_degree_std",
            "fcg_vertex_count",
            "fcg_edge_count",
            "fcg_crypto_flag",
        ]
    }
}

/// Builds the call graph with the default crypto substring list.
pub fn build_call_graph(doc: &FileDocument) -> CallGraph {
    let defaults: Vec<String> = DEFAULT_CRYPTO_SUBSTRINGS
        .iter()
        .map(|s| s.to_string())
        .collect();
    build_call_graph_with(doc, &defaults)
}

/// Builds the call graph, flagging nodes whose name or called names contain
/// any of `crypto_substrings` (case-insensitive).
pub fn build_call_graph_with(doc: &FileDocument, crypto_substrings: &[String]) -> CallGraph {
    let mut nodes: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for function in &doc.functions {
        if !index.contains_key(&function.function_name) {
            index.insert(function.function_name.clone(), nodes.len());
            nodes.push(function.function_name.clone());
        }
    }

    let mut edges = BTreeSet::new();
    match &doc.call_edges {
        Some(explicit) => {
            for (caller, callee) in explicit {
                let from = intern(&mut nodes, &mut index, caller);
                let to = intern(&mut nodes, &mut index, callee);
                edges.insert((from, to));
            }
        }
        None => {
            for function in &doc.functions {
                let caller = index[&function.function_name];
                for callee in called_names(function) {
                    if let Some(&to) = index.get(callee) {
                        edges.insert((caller, to));
                    }
                }
            }
        }
    }

    let lowered: Vec<String> = crypto_substrings.iter().map(|s| s.to_lowercase()).collect();
    let is_crypto = |name: &str| {
        let lower = name.to_lowercase();
        lowered.iter().any(|s| !s.is_empty() && lower.contains(s))
    };
    let mut crypto_flags = vec![false; nodes.len()];
    for (i, name) in nodes.iter().enumerate() {
        if is_crypto(name) {
            crypto_flags[i] = true;
        }
    }
    for function in &doc.functions {
        let idx = index[&function.function_name];
        if crypto_flags[idx] {
            continue;
        }
        if called_names(function).any(is_crypto) {
            crypto_flags[idx] = true;
        }
    }

    CallGraph {
        nodes,
        edges,
        crypto_flags,
    }
}

fn intern(nodes: &mut Vec<String>, index: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = index.get(name) {
        return i;
    }
    index.insert(name.to_string(), nodes.len());
    nodes.push(name.to_string());
    nodes.len() - 1
}

/// Names invoked by `Call`/`CtorCall` nodes of one function.
fn called_names(function: &AstDocument) -> impl Iterator<Item = &str> {
    function.nodes.values().filter_map(|node| {
        if node.kind == "Call" || node.kind == "CtorCall" {
            node.attr("fnName").and_then(AttrValue::as_str)
        } else {
            None
        }
    })
}

/// Extracts the seven-feature combinatorial block.
pub fn call_graph_features(g: &CallGraph) -> FcgFeatures {
    let n = g.node_count();
    if n == 0 {
        return FcgFeatures {
            component_size_ratio: 0.0,
            component_count: 0,
            degree_mean: 0.0,
            degree_std: 0.0,
            vertex_count: 0,
            edge_count: 0,
            crypto_flag: 0,
        };
    }

    // Weak components via union-find.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &g.edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let mut component_sizes: HashMap<usize, usize> = HashMap::new();
    for v in 0..n {
        let root = find(&mut parent, v);
        *component_sizes.entry(root).or_insert(0) += 1;
    }
    let max_size = *component_sizes.values().max().unwrap() as f64;
    let min_size = *component_sizes.values().min().unwrap() as f64;

    // Total (in + out) degree; self-loops contribute twice.
    let mut degrees = vec![0usize; n];
    for &(a, b) in &g.edges {
        degrees[a] += 1;
        degrees[b] += 1;
    }
    let degree_mean = degrees.iter().sum::<usize>() as f64 / n as f64;
    let variance = degrees
        .iter()
        .map(|&d| {
            let diff = d as f64 - degree_mean;
            diff * diff
        })
        .sum::<f64>()
        / n as f64;

    FcgFeatures {
        component_size_ratio: max_size / min_size,
        component_count: component_sizes.len(),
        degree_mean,
        degree_std: variance.sqrt(),
        vertex_count: n,
        edge_count: g.edge_count(),
        crypto_flag: u8::from(g.crypto_flags.iter().any(|&f| f)),
    }
}
