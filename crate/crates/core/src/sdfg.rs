//! Shortsighted data-flow graph construction.
//!
//! Every execution path through a function's AST is enumerated and the paths
//! are merged into one digraph: consecutive path nodes become edges, repeated
//! segments collapse. Enumeration is capped; past the cap the same successor
//! rules are applied node-locally (structural emission), which produces the
//! identical merged edge set without materializing paths.
//!
//! Successor rules:
//! * a node's resolved child attributes execute first (declared order), then
//!   the node itself;
//! * `If` forks after its `cond` subtree, one arm per branch, and both arms
//!   rejoin at the successor; a missing arm falls through;
//! * `Loop`/`While` runs `cond`, then `body` once, emits a back-edge from the
//!   body terminal to the cond head, and exits from the cond terminal;
//! * `break`, `continue`, `Return`, and `ThrowOp` terminate the current path.
//!
//! `If` and `Loop` nodes are control structure, not operations; they never
//! appear as graph vertices.

use std::collections::{BTreeSet, HashMap};

use crate::ast::{AstDocument, AstNode, AttrValue};

/// Default cap on enumerated paths per function.
pub const DEFAULT_MAX_PATHS: usize = 4096;

/// Recursion guard for hostile or degenerate inputs.
const MAX_DEPTH: usize = 512;

const CONDITIONAL_KINDS: &[&str] = &["If"];
const LOOP_KINDS: &[&str] = &["Loop", "While"];
const TERMINATOR_KINDS: &[&str] = &["break", "continue", "Return", "ThrowOp"];

/// Child attributes evaluated before any other resolved reference.
const CHILD_ATTR_PRIORITY: &[&str] = &[
    "target",
    "left",
    "right",
    "operand",
    "operands",
    "expr",
    "value",
    "arguments",
];

/// Merged-path digraph over a function's executable AST nodes.
#[derive(Debug, Clone)]
pub struct Sdfg {
    pub function_name: String,
    /// First-visit ordered vertex list.
    pub nodes: Vec<AstNode>,
    /// Directed edges as (source index, target index).
    pub edges: BTreeSet<(usize, usize)>,
}

impl Sdfg {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Builds a graph from pre-made nodes and an explicit edge list; used by
    /// diagnostics and tests that need a graph without authoring an AST.
    pub fn from_nodes(
        function_name: impl Into<String>,
        nodes: Vec<AstNode>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let nodes_len = nodes.len();
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(a, b) in &edges {
            assert!(a < nodes_len && b < nodes_len, "edge endpoints must index nodes");
        }
        Sdfg {
            function_name: function_name.into(),
            nodes,
            edges,
        }
    }

    /// Convenience constructor with bare kinds and no attributes.
    pub fn from_kinds(
        function_name: impl Into<String>,
        kinds: &[&str],
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let nodes = kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| AstNode {
                id: i.to_string(),
                kind: (*kind).to_string(),
                attributes: Default::default(),
            })
            .collect();
        Self::from_nodes(function_name, nodes, edges)
    }

    /// DOT rendering for debug dumps.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph sdfg {\n");
        for (i, node) in self.nodes.iter().enumerate() {
            out.push_str(&format!("  n{} [label=\"{}:{}\"];\n", i, node.id, node.kind));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("  n{a} -> n{b};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Result of path enumeration.
#[derive(Debug, Clone)]
pub struct PathEnumeration {
    pub paths: Vec<Vec<String>>,
    pub truncated: bool,
}

/// Enumerates all execution paths, capped at `max_paths`.
pub fn enumerate_paths(ast: &AstDocument, max_paths: usize) -> PathEnumeration {
    assert!(max_paths >= 1, "max_paths must be at least 1");
    let mut walker = Walker::new(ast, max_paths);
    let mut stack = Vec::new();
    let segments = walker.expand_stmts(&ast.entry_ids, &mut stack);
    let paths = segments
        .into_iter()
        .filter(|s| !s.nodes.is_empty())
        .map(|s| {
            s.nodes
                .iter()
                .map(|&i| walker.ids[i as usize].to_string())
                .collect()
        })
        .collect();
    PathEnumeration {
        paths,
        truncated: walker.truncated,
    }
}

/// Builds the SDFG with the default path cap.
pub fn build_sdfg(ast: &AstDocument) -> Sdfg {
    build_sdfg_with(ast, DEFAULT_MAX_PATHS)
}

/// Builds the SDFG, falling back to structural emission past the path cap.
pub fn build_sdfg_with(ast: &AstDocument, max_paths: usize) -> Sdfg {
    build_sdfg_flagged(ast, max_paths).0
}

/// As [`build_sdfg_with`], also reporting whether enumeration was truncated
/// (and the structural fallback used).
pub fn build_sdfg_flagged(ast: &AstDocument, max_paths: usize) -> (Sdfg, bool) {
    let mut walker = Walker::new(ast, max_paths);
    let mut stack = Vec::new();
    let segments = walker.expand_stmts(&ast.entry_ids, &mut stack);
    if walker.truncated {
        return (StructuralBuilder::build(ast), true);
    }

    let mut order: Vec<u32> = Vec::new();
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut edges = BTreeSet::new();
    for segment in &segments {
        let mut prev: Option<usize> = None;
        for &node in &segment.nodes {
            let idx = *index.entry(node).or_insert_with(|| {
                order.push(node);
                order.len() - 1
            });
            if let Some(p) = prev {
                edges.insert((p, idx));
            }
            prev = Some(idx);
        }
    }

    let nodes = order
        .iter()
        .map(|&i| ast.nodes[walker.ids[i as usize]].clone())
        .collect();
    (
        Sdfg {
            function_name: ast.function_name.clone(),
            nodes,
            edges,
        },
        false,
    )
}

#[derive(Debug, Clone, Default)]
struct Segment {
    nodes: Vec<u32>,
    terminated: bool,
}

struct Walker<'a> {
    ast: &'a AstDocument,
    /// Node ids in document (lexicographic) order; segments store indexes.
    ids: Vec<&'a str>,
    id_index: HashMap<&'a str, u32>,
    max_paths: usize,
    truncated: bool,
}

impl<'a> Walker<'a> {
    fn new(ast: &'a AstDocument, max_paths: usize) -> Self {
        let ids: Vec<&str> = ast.nodes.keys().map(String::as_str).collect();
        let id_index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, i as u32))
            .collect();
        Walker {
            ast,
            ids,
            id_index,
            max_paths,
            truncated: false,
        }
    }

    fn expand_stmts(&mut self, ids: &[String], stack: &mut Vec<u32>) -> Vec<Segment> {
        let mut acc = vec![Segment::default()];
        for id in ids {
            if acc.iter().all(|s| s.terminated) {
                break;
            }
            let alts = self.expand_node(id, stack);
            acc = self.cross(acc, &alts);
        }
        acc
    }

    /// Appends each alternative to each live segment, capping the total.
    fn cross(&mut self, acc: Vec<Segment>, alts: &[Segment]) -> Vec<Segment> {
        let mut out = Vec::with_capacity(acc.len());
        for segment in acc {
            if segment.terminated {
                if out.len() >= self.max_paths {
                    self.truncated = true;
                    break;
                }
                out.push(segment);
                continue;
            }
            for alt in alts {
                if out.len() >= self.max_paths {
                    self.truncated = true;
                    return out;
                }
                let mut extended = segment.clone();
                extended.nodes.extend_from_slice(&alt.nodes);
                extended.terminated = alt.terminated;
                out.push(extended);
            }
        }
        out
    }

    fn expand_node(&mut self, id: &str, stack: &mut Vec<u32>) -> Vec<Segment> {
        let idx = self.id_index[id];
        if stack.contains(&idx) || stack.len() >= MAX_DEPTH {
            // Reference cycle or hostile nesting: skip re-expansion.
            return vec![Segment::default()];
        }
        stack.push(idx);
        let node = &self.ast.nodes[id];
        let result = if CONDITIONAL_KINDS.contains(&node.kind.as_str()) {
            self.expand_conditional(node, stack)
        } else if LOOP_KINDS.contains(&node.kind.as_str()) {
            self.expand_loop(node, stack)
        } else {
            self.expand_operation(node, idx, stack)
        };
        stack.pop();
        result
    }

    fn expand_conditional(&mut self, node: &AstNode, stack: &mut Vec<u32>) -> Vec<Segment> {
        let cond_alts = match node.attr("cond").and_then(AttrValue::as_str) {
            Some(cond_id) => self.expand_node(cond_id, stack),
            None => vec![Segment::default()],
        };
        let then_ids = node.attr("then").and_then(AttrValue::as_list);
        let else_ids = node.attr("else").and_then(AttrValue::as_list);
        let arms = match (then_ids, else_ids) {
            (None, None) => vec![Segment::default()],
            (then_ids, else_ids) => {
                let mut arms = match then_ids {
                    Some(ids) => self.expand_stmts(ids, stack),
                    None => vec![Segment::default()],
                };
                arms.extend(match else_ids {
                    Some(ids) => self.expand_stmts(ids, stack),
                    None => vec![Segment::default()],
                });
                arms
            }
        };
        self.cross(cond_alts, &arms)
    }

    fn expand_loop(&mut self, node: &AstNode, stack: &mut Vec<u32>) -> Vec<Segment> {
        let cond_alts = node
            .attr("cond")
            .and_then(AttrValue::as_str)
            .map(|cond_id| self.expand_node(cond_id, stack));
        let body_ids = node
            .attr("body")
            .and_then(AttrValue::as_list)
            .map(<[String]>::to_vec)
            .unwrap_or_default();
        let body_alts = self.expand_stmts(&body_ids, stack);

        let mut out = Vec::new();
        match &cond_alts {
            Some(conds) => {
                // One pass through the body, then the cond again: merging
                // yields the back-edge and the exit edge from the cond
                // terminal. Terminated cond paths never reach the body.
                'outer: for cond in conds {
                    if cond.terminated {
                        out.push(cond.clone());
                        continue;
                    }
                    for body in &body_alts {
                        if out.len() >= self.max_paths {
                            self.truncated = true;
                            break 'outer;
                        }
                        let mut segment = cond.clone();
                        segment.nodes.extend_from_slice(&body.nodes);
                        if body.terminated {
                            segment.terminated = true;
                        } else {
                            segment.nodes.extend_from_slice(&cond.nodes);
                        }
                        out.push(segment);
                    }
                }
                if out.iter().all(|s| s.terminated) {
                    // Every iteration path terminates; keep the
                    // zero-iteration exit alive for the live conds.
                    for cond in conds.iter().filter(|c| !c.terminated) {
                        if out.len() >= self.max_paths {
                            self.truncated = true;
                            break;
                        }
                        out.push(cond.clone());
                    }
                }
            }
            None => {
                // Condless loop: the body runs and loops on itself; the
                // duplicated listing realizes the back-edge on merge.
                for body in &body_alts {
                    if out.len() >= self.max_paths {
                        self.truncated = true;
                        break;
                    }
                    let mut segment = body.clone();
                    if !body.terminated {
                        segment.nodes.extend_from_slice(&body.nodes);
                    }
                    out.push(segment);
                }
            }
        }
        out
    }

    fn expand_operation(&mut self, node: &AstNode, idx: u32, stack: &mut Vec<u32>) -> Vec<Segment> {
        let mut acc = vec![Segment::default()];
        for child_id in self.resolved_children(node) {
            if acc.iter().all(|s| s.terminated) {
                break;
            }
            let alts = self.expand_node(&child_id, stack);
            acc = self.cross(acc, &alts);
        }
        let own = Segment {
            nodes: vec![idx],
            terminated: TERMINATOR_KINDS.contains(&node.kind.as_str()),
        };
        self.cross(acc, std::slice::from_ref(&own))
    }

    /// Resolved reference attributes in canonical evaluation order.
    fn resolved_children(&self, node: &AstNode) -> Vec<String> {
        resolved_children(self.ast, node)
    }
}

/// Reference attributes that resolve to nodes, in canonical evaluation order:
/// priority attributes first, everything else lexicographically.
fn resolved_children(ast: &AstDocument, node: &AstNode) -> Vec<String> {
    let mut children = Vec::new();
    let mut push_attr = |value: &AttrValue| match value {
        AttrValue::Str(s) => {
            if ast.nodes.contains_key(s) {
                children.push(s.clone());
            }
        }
        AttrValue::List(items) => {
            for item in items {
                if ast.nodes.contains_key(item) {
                    children.push(item.clone());
                }
            }
        }
        AttrValue::Num(_) => {}
    };
    for name in CHILD_ATTR_PRIORITY {
        if let Some(value) = node.attr(name) {
            push_attr(value);
        }
    }
    for (name, value) in &node.attributes {
        if CHILD_ATTR_PRIORITY.contains(&name.as_str()) {
            continue;
        }
        push_attr(value);
    }
    children
}

/// Node-local edge emission; produces the same merged edge set as path
/// enumeration without materializing paths.
struct StructuralBuilder<'a> {
    ast: &'a AstDocument,
    order: Vec<&'a str>,
    index: HashMap<&'a str, usize>,
    edges: BTreeSet<(usize, usize)>,
}

/// Entry and exit vertices of an emitted subgraph. `live` distinguishes "no
/// outgoing terminals because every path terminated" from "nothing emitted
/// yet": dead flows stop all downstream emission.
#[derive(Debug, Clone)]
struct Flow {
    entries: Vec<usize>,
    outgoing: Vec<usize>,
    live: bool,
}

impl Flow {
    fn pass_through(incoming: Vec<usize>) -> Self {
        Flow {
            entries: Vec::new(),
            outgoing: incoming,
            live: true,
        }
    }

    fn dead(entries: Vec<usize>) -> Self {
        Flow {
            entries,
            outgoing: Vec::new(),
            live: false,
        }
    }
}

impl<'a> StructuralBuilder<'a> {
    fn build(ast: &'a AstDocument) -> Sdfg {
        let mut builder = StructuralBuilder {
            ast,
            order: Vec::new(),
            index: HashMap::new(),
            edges: BTreeSet::new(),
        };
        let mut stack = Vec::new();
        builder.emit_stmts(&ast.entry_ids, Vec::new(), &mut stack);
        let nodes = builder
            .order
            .iter()
            .map(|id| ast.nodes[*id].clone())
            .collect();
        Sdfg {
            function_name: ast.function_name.clone(),
            nodes,
            edges: builder.edges,
        }
    }

    fn register(&mut self, id: &'a str) -> usize {
        if let Some(&idx) = self.index.get(id) {
            return idx;
        }
        self.order.push(id);
        let idx = self.order.len() - 1;
        self.index.insert(id, idx);
        idx
    }

    fn connect(&mut self, from: &[usize], to: usize) {
        for &f in from {
            self.edges.insert((f, to));
        }
    }

    fn emit_stmts(
        &mut self,
        ids: &[String],
        incoming: Vec<usize>,
        stack: &mut Vec<&'a str>,
    ) -> Flow {
        let mut entries: Vec<usize> = Vec::new();
        let mut current = incoming;
        let mut live = true;
        for id in ids {
            if !live {
                // All paths terminated; the rest is unreachable.
                break;
            }
            let flow = self.emit_node(id, current, stack);
            if entries.is_empty() {
                entries = flow.entries;
            }
            current = flow.outgoing;
            live = flow.live;
        }
        Flow {
            entries,
            outgoing: current,
            live,
        }
    }

    fn emit_node(&mut self, id: &str, incoming: Vec<usize>, stack: &mut Vec<&'a str>) -> Flow {
        let (key, node) = match self.ast.nodes.get_key_value(id) {
            Some((key, node)) => (key.as_str(), node),
            None => return Flow::pass_through(incoming),
        };
        if stack.contains(&key) || stack.len() >= MAX_DEPTH {
            return Flow::pass_through(incoming);
        }
        stack.push(key);
        let flow = if CONDITIONAL_KINDS.contains(&node.kind.as_str()) {
            self.emit_conditional(node, incoming, stack)
        } else if LOOP_KINDS.contains(&node.kind.as_str()) {
            self.emit_loop(node, incoming, stack)
        } else {
            self.emit_operation(key, node, incoming, stack)
        };
        stack.pop();
        flow
    }

    fn emit_conditional(
        &mut self,
        node: &AstNode,
        incoming: Vec<usize>,
        stack: &mut Vec<&'a str>,
    ) -> Flow {
        let cond_flow = match node.attr("cond").and_then(AttrValue::as_str) {
            Some(cond_id) => self.emit_node(cond_id, incoming, stack),
            None => Flow::pass_through(incoming),
        };
        if !cond_flow.live {
            return Flow::dead(cond_flow.entries);
        }
        let base = cond_flow.outgoing;
        let then_ids = node.attr("then").and_then(AttrValue::as_list);
        let else_ids = node.attr("else").and_then(AttrValue::as_list);
        if then_ids.is_none() && else_ids.is_none() {
            return Flow {
                entries: cond_flow.entries,
                outgoing: base,
                live: true,
            };
        }
        let arm = |ids: Option<&[String]>, builder: &mut Self, stack: &mut Vec<&'a str>| match ids
        {
            Some(ids) => builder.emit_stmts(ids, base.clone(), stack),
            None => Flow::pass_through(base.clone()),
        };
        let then_flow = arm(then_ids, self, stack);
        let else_flow = arm(else_ids, self, stack);

        let mut entries = cond_flow.entries;
        if entries.is_empty() {
            entries = merge_unique(&then_flow.entries, &else_flow.entries);
        }
        Flow {
            entries,
            outgoing: merge_unique(&then_flow.outgoing, &else_flow.outgoing),
            live: then_flow.live || else_flow.live,
        }
    }

    fn emit_loop(
        &mut self,
        node: &AstNode,
        incoming: Vec<usize>,
        stack: &mut Vec<&'a str>,
    ) -> Flow {
        let cond_flow = node
            .attr("cond")
            .and_then(AttrValue::as_str)
            .map(|cond_id| self.emit_node(cond_id, incoming.clone(), stack));
        if let Some(cond) = &cond_flow {
            if !cond.live {
                return Flow::dead(cond.entries.clone());
            }
        }
        let base = cond_flow
            .as_ref()
            .map(|f| f.outgoing.clone())
            .unwrap_or(incoming);
        let body_ids = node
            .attr("body")
            .and_then(AttrValue::as_list)
            .map(<[String]>::to_vec)
            .unwrap_or_default();
        let body_flow = self.emit_stmts(&body_ids, base, stack);

        match cond_flow {
            Some(cond) => {
                if cond.entries.is_empty() {
                    // Cycle-guarded or vertexless cond: the loop degenerates
                    // to a single body pass with no back-edge; a dead body
                    // still leaves the zero-iteration exit.
                    let outgoing = if body_flow.live {
                        body_flow.outgoing
                    } else {
                        cond.outgoing
                    };
                    return Flow {
                        entries: body_flow.entries,
                        outgoing,
                        live: true,
                    };
                }
                for &head in &cond.entries {
                    self.connect(&body_flow.outgoing, head);
                }
                Flow {
                    entries: cond.entries,
                    outgoing: cond.outgoing,
                    live: true,
                }
            }
            None => {
                for &head in &body_flow.entries {
                    self.connect(&body_flow.outgoing, head);
                }
                body_flow
            }
        }
    }

    fn emit_operation(
        &mut self,
        id: &'a str,
        node: &AstNode,
        incoming: Vec<usize>,
        stack: &mut Vec<&'a str>,
    ) -> Flow {
        let mut entries: Vec<usize> = Vec::new();
        let mut current = incoming;
        let children = resolved_children(self.ast, node);
        for child_id in children {
            let flow = self.emit_node(&child_id, current, stack);
            if entries.is_empty() {
                entries = flow.entries;
            }
            current = flow.outgoing;
            if !flow.live {
                // Every path dies inside the child; this node is unreachable.
                return Flow::dead(entries);
            }
        }
        let idx = self.register(id);
        self.connect(&current, idx);
        if entries.is_empty() {
            entries = vec![idx];
        }
        if TERMINATOR_KINDS.contains(&node.kind.as_str()) {
            Flow {
                entries,
                outgoing: Vec::new(),
                live: false,
            }
        } else {
            Flow {
                entries,
                outgoing: vec![idx],
                live: true,
            }
        }
    }
}

fn merge_unique(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut set: BTreeSet<usize> = a.iter().copied().collect();
    set.extend(b.iter().copied());
    set.into_iter().collect()
}

/// Structural emission entry point, exposed for equivalence testing.
pub fn build_sdfg_structural(ast: &AstDocument) -> Sdfg {
    StructuralBuilder::build(ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_file_document;

    /// `if foo() { bar(); } else { baz(); } bla();`
    pub(crate) fn branch_join_document() -> AstDocument {
        let raw = br#"{"file_id":"x","functions":[{
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
        parse_file_document(raw).unwrap().functions.remove(0)
    }

    fn kind_of<'a>(g: &'a Sdfg, idx: usize) -> &'a str {
        g.nodes[idx].attr("fnName").and_then(AttrValue::as_str).unwrap()
    }

    fn edge_names(g: &Sdfg) -> BTreeSet<(String, String)> {
        g.edges
            .iter()
            .map(|&(a, b)| (kind_of(g, a).to_string(), kind_of(g, b).to_string()))
            .collect()
    }

    #[test]
    fn branch_join_yields_the_four_node_diamond() {
        let g = build_sdfg(&branch_join_document());
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 4);
        let expected: BTreeSet<(String, String)> = [
            ("foo", "bar"),
            ("foo", "baz"),
            ("bar", "bla"),
            ("baz", "bla"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(edge_names(&g), expected);
    }

    #[test]
    fn branch_join_has_exactly_two_paths() {
        let paths = enumerate_paths(&branch_join_document(), DEFAULT_MAX_PATHS);
        assert!(!paths.truncated);
        assert_eq!(
            paths.paths,
            vec![
                vec!["1".to_string(), "2".into(), "4".into()],
                vec!["1".to_string(), "3".into(), "4".into()],
            ]
        );
    }

    fn linear_doc(n: usize) -> AstDocument {
        let nodes: Vec<String> = (0..n)
            .map(|i| format!("\"{i}\": {{\"type\": \"Call\", \"fnName\": \"f{i}\"}}"))
            .collect();
        let entries: Vec<String> = (0..n).map(|i| format!("\"{i}\"")).collect();
        let raw = format!(
            r#"{{"file_id":"x","functions":[{{"name":"lin","entry":[{}],"nodes":{{{}}}}}]}}"#,
            entries.join(","),
            nodes.join(",")
        );
        parse_file_document(raw.as_bytes()).unwrap().functions.remove(0)
    }

    #[test]
    fn single_statement_is_one_node_no_edges() {
        let g = build_sdfg(&linear_doc(1));
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn chains_have_one_path_and_n_minus_one_edges() {
        let doc = linear_doc(3);
        let paths = enumerate_paths(&doc, DEFAULT_MAX_PATHS);
        assert_eq!(paths.paths.len(), 1);
        let g = build_sdfg(&doc);
        assert_eq!(g.edge_count(), g.node_count() - 1);
    }

    #[test]
    fn empty_function_yields_empty_graph() {
        let raw = br#"{"file_id":"x","functions":[{"name":"f","entry":[],"nodes":{}}]}"#;
        let doc = parse_file_document(raw).unwrap().functions.remove(0);
        let g = build_sdfg(&doc);
        assert!(g.is_empty());
        assert_eq!(g.edge_count(), 0);
    }

    /// Two sequential diamonds multiply into four paths.
    #[test]
    fn diamond_of_diamonds_has_four_paths() {
        let raw = br#"{"file_id":"x","functions":[{
            "name": "dd",
            "entry": ["if1", "if2", "z"],
            "nodes": {
                "a": {"type": "Call", "fnName": "a"},
                "b": {"type": "Call", "fnName": "b"},
                "c": {"type": "Call", "fnName": "c"},
                "d": {"type": "Call", "fnName": "d"},
                "e": {"type": "Call", "fnName": "e"},
                "f": {"type": "Call", "fnName": "f"},
                "z": {"type": "Call", "fnName": "z"},
                "if1": {"type": "If", "cond": "a", "then": ["b"], "else": ["c"]},
                "if2": {"type": "If", "cond": "d", "then": ["e"], "else": ["f"]}
            }
        }]}"#;
        let doc = parse_file_document(raw).unwrap().functions.remove(0);
        let paths = enumerate_paths(&doc, DEFAULT_MAX_PATHS);
        assert_eq!(paths.paths.len(), 4);
    }

    #[test]
    fn loop_emits_back_edge_and_exit() {
        let raw = br#"{"file_id":"x","functions":[{
            "name": "loopy",
            "entry": ["L", "after"],
            "nodes": {
                "cond": {"type": "Call", "fnName": "check"},
                "body": {"type": "Call", "fnName": "work"},
                "after": {"type": "Call", "fnName": "done"},
                "L": {"type": "Loop", "cond": "cond", "body": ["body"]}
            }
        }]}"#;
        let doc = parse_file_document(raw).unwrap().functions.remove(0);
        let g = build_sdfg(&doc);
        assert_eq!(g.node_count(), 3);
        let expected: BTreeSet<(String, String)> = [
            ("check", "work"),
            ("work", "check"),
            ("check", "done"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(edge_names(&g), expected);
    }

    #[test]
    fn return_terminates_the_path() {
        let raw = br#"{"file_id":"x","functions":[{
            "name": "r",
            "entry": ["1", "2", "3"],
            "nodes": {
                "1": {"type": "Call", "fnName": "pre"},
                "2": {"type": "Return"},
                "3": {"type": "Call", "fnName": "unreachable"}
            }
        }]}"#;
        let doc = parse_file_document(raw).unwrap().functions.remove(0);
        let g = build_sdfg(&doc);
        assert_eq!(g.node_count(), 2);
        let paths = enumerate_paths(&doc, DEFAULT_MAX_PATHS);
        assert_eq!(paths.paths, vec![vec!["1".to_string(), "2".into()]]);
    }

    #[test]
    fn call_arguments_execute_before_the_call() {
        let raw = br#"{"file_id":"x","functions":[{
            "name": "c",
            "entry": ["64"],
            "nodes": {
                "62": {"type": "LocalVar", "name": "obj"},
                "63": {"type": "LocalVar", "name": "arg"},
                "64": {"type": "Call", "fnName": "m", "target": "62", "arguments": ["63"]}
            }
        }]}"#;
        let doc = parse_file_document(raw).unwrap().functions.remove(0);
        let paths = enumerate_paths(&doc, DEFAULT_MAX_PATHS);
        assert_eq!(
            paths.paths,
            vec![vec!["62".to_string(), "63".into(), "64".into()]]
        );
    }

    #[test]
    fn truncation_sets_the_flag_and_structural_matches_enumeration() {
        // 2^12 = 4096 paths; cap at 8 forces truncation.
        let mut nodes = Vec::new();
        let mut entries = Vec::new();
        for i in 0..12 {
            nodes.push(format!("\"c{i}\": {{\"type\": \"Call\", \"fnName\": \"c{i}\"}}"));
            nodes.push(format!("\"t{i}\": {{\"type\": \"Call\", \"fnName\": \"t{i}\"}}"));
            nodes.push(format!("\"e{i}\": {{\"type\": \"Call\", \"fnName\": \"e{i}\"}}"));
            nodes.push(format!(
                "\"if{i}\": {{\"type\": \"If\", \"cond\": \"c{i}\", \"then\": [\"t{i}\"], \"else\": [\"e{i}\"]}}"
            ));
            entries.push(format!("\"if{i}\""));
        }
        let raw = format!(
            r#"{{"file_id":"x","functions":[{{"name":"wide","entry":[{}],"nodes":{{{}}}}}]}}"#,
            entries.join(","),
            nodes.join(",")
        );
        let doc = parse_file_document(raw.as_bytes()).unwrap().functions.remove(0);

        let capped = enumerate_paths(&doc, 8);
        assert!(capped.truncated);
        assert_eq!(capped.paths.len(), 8);

        let full = build_sdfg_with(&doc, DEFAULT_MAX_PATHS);
        let structural = build_sdfg_structural(&doc);
        assert_eq!(edge_names(&full), edge_names(&structural));
        assert_eq!(full.node_count(), structural.node_count());

        let fallback = build_sdfg_with(&doc, 8);
        assert_eq!(edge_names(&fallback), edge_names(&full));
    }

    #[test]
    fn merging_is_idempotent() {
        let g = build_sdfg(&branch_join_document());
        let remerged: BTreeSet<(usize, usize)> = g.edges.iter().copied().collect();
        assert_eq!(remerged, g.edges);
    }

    #[test]
    fn dot_dump_lists_every_vertex() {
        let g = build_sdfg(&branch_join_document());
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("label=").count(), 4);
    }
}
