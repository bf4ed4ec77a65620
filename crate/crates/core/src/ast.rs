//! Ingestion of decompiler-output AST documents.
//!
//! One input file describes one sample: a `file_id`, a list of functions
//! (each an AST given as a node-id-keyed dictionary plus an ordered list of
//! entry statements), and an optional explicit call-edge list. Node kinds are
//! an open string set; unknown kinds flow through untouched and downstream
//! feature functions simply evaluate to zero on them.
//!
//! Reference resolution is attribute-class dependent: control-flow attributes
//! (`cond`, `then`, `else`, `body`) and entry ids must resolve to nodes of
//! the same function, while data attributes (`target`, `value`, `arguments`,
//! ...) are treated as references only when they happen to resolve and as
//! plain literals otherwise.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{Error, Result};

/// Attribute names whose values must resolve to node ids.
pub const STRUCTURAL_SCALAR_ATTRS: &[&str] = &["cond"];
/// List-valued attribute names whose elements must resolve to node ids.
pub const STRUCTURAL_LIST_ATTRS: &[&str] = &["then", "else", "body"];

/// An attribute value: a string (possibly a node-id reference), a number, or
/// a list of node-id strings.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Str(String),
    Num(f64),
    List(Vec<String>),
}

impl AttrValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            AttrValue::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            AttrValue::List(items) => Some(items),
            _ => None,
        }
    }
}

/// One AST node: a CLR operation name plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct AstNode {
    pub id: String,
    pub kind: String,
    pub attributes: BTreeMap<String, AttrValue>,
}

impl AstNode {
    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attributes.get(name)
    }
}

/// Returns the node's kind verbatim.
pub fn node_kind(node: &AstNode) -> &str {
    &node.kind
}

/// A single function's abstract syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub struct AstDocument {
    pub function_name: String,
    /// Keyed by node id; iteration is lexicographic by id.
    pub nodes: BTreeMap<String, AstNode>,
    /// Ordered top-level statement roots.
    pub entry_ids: Vec<String>,
}

impl AstDocument {
    /// An AST with no nodes (decompiler emitted `{}` for the body).
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&AstNode> {
        self.nodes.get(id)
    }
}

/// One sample: every function's AST plus the call-edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct FileDocument {
    pub file_id: String,
    pub functions: Vec<AstDocument>,
    /// (caller name, callee name) pairs; only present when the input carried
    /// an explicit call-graph section.
    pub call_edges: Option<Vec<(String, String)>>,
}

/// Parses and validates a file document from raw bytes.
pub fn parse_file_document(bytes: &[u8]) -> Result<FileDocument> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| Error::from_json(e, bytes))?;
    document_from_value(value)
}

fn document_from_value(value: Value) -> Result<FileDocument> {
    let mut root = match value {
        Value::Object(map) => map,
        other => {
            return Err(Error::InvalidDocument(format!(
                "top level must be an object, found {}",
                json_type(&other)
            )))
        }
    };

    let file_id = match root.remove("file_id") {
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(Error::InvalidDocument(format!(
                "file_id must be a string, found {}",
                json_type(&other)
            )))
        }
        None => return Err(Error::InvalidDocument("missing file_id".into())),
    };

    let functions_value = root
        .remove("functions")
        .ok_or_else(|| Error::InvalidDocument("missing functions array".into()))?;
    let functions_raw = match functions_value {
        Value::Array(items) => items,
        other => {
            return Err(Error::InvalidDocument(format!(
                "functions must be an array, found {}",
                json_type(&other)
            )))
        }
    };

    let mut functions = Vec::with_capacity(functions_raw.len());
    for item in functions_raw {
        functions.push(function_from_value(item)?);
    }

    let call_edges = match root.remove("call_edges") {
        None => None,
        Some(Value::Array(items)) => {
            let mut edges = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::Array(pair) if pair.len() == 2 => {
                        let caller = pair[0].as_str().ok_or_else(|| {
                            Error::InvalidDocument("call_edges entries must be string pairs".into())
                        })?;
                        let callee = pair[1].as_str().ok_or_else(|| {
                            Error::InvalidDocument("call_edges entries must be string pairs".into())
                        })?;
                        edges.push((caller.to_string(), callee.to_string()));
                    }
                    _ => {
                        return Err(Error::InvalidDocument(
                            "call_edges entries must be [caller, callee] pairs".into(),
                        ))
                    }
                }
            }
            Some(edges)
        }
        Some(other) => {
            return Err(Error::InvalidDocument(format!(
                "call_edges must be an array, found {}",
                json_type(&other)
            )))
        }
    };

    Ok(FileDocument {
        file_id,
        functions,
        call_edges,
    })
}

fn function_from_value(value: Value) -> Result<AstDocument> {
    let mut obj = match value {
        Value::Object(map) => map,
        other => {
            return Err(Error::InvalidDocument(format!(
                "function entries must be objects, found {}",
                json_type(&other)
            )))
        }
    };

    let function_name = match obj.remove("name") {
        Some(Value::String(s)) => s,
        _ => return Err(Error::InvalidDocument("function missing string name".into())),
    };

    let entry_ids = match obj.remove("entry") {
        None => Vec::new(),
        Some(Value::Array(items)) => {
            let mut ids = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::String(s) => ids.push(s),
                    other => {
                        return Err(Error::InvalidDocument(format!(
                            "entry ids of {function_name:?} must be strings, found {}",
                            json_type(&other)
                        )))
                    }
                }
            }
            ids
        }
        Some(other) => {
            return Err(Error::InvalidDocument(format!(
                "entry of {function_name:?} must be an array, found {}",
                json_type(&other)
            )))
        }
    };

    let mut nodes = BTreeMap::new();
    match obj.remove("nodes") {
        None => {}
        Some(Value::Object(raw_nodes)) => {
            for (id, node_value) in raw_nodes {
                let node = node_from_value(&function_name, &id, node_value)?;
                nodes.insert(id, node);
            }
        }
        Some(other) => {
            return Err(Error::InvalidDocument(format!(
                "nodes of {function_name:?} must be an object, found {}",
                json_type(&other)
            )))
        }
    }

    let doc = AstDocument {
        function_name,
        nodes,
        entry_ids,
    };
    validate_references(&doc)?;
    Ok(doc)
}

fn node_from_value(function: &str, id: &str, value: Value) -> Result<AstNode> {
    let obj = match value {
        Value::Object(map) => map,
        other => {
            return Err(Error::InvalidDocument(format!(
                "node {id:?} of {function:?} must be an object, found {}",
                json_type(&other)
            )))
        }
    };

    let mut kind = String::new();
    let mut attributes = BTreeMap::new();
    for (key, attr_value) in obj {
        if key == "type" {
            match attr_value {
                Value::String(s) => kind = s,
                other => {
                    return Err(Error::InvalidDocument(format!(
                        "type of node {id:?} must be a string, found {}",
                        json_type(&other)
                    )))
                }
            }
            continue;
        }
        let attr = match attr_value {
            Value::String(s) => AttrValue::Str(s),
            Value::Number(n) => AttrValue::Num(n.as_f64().ok_or_else(|| {
                Error::InvalidDocument(format!("attribute {key:?} of node {id:?} overflows f64"))
            })?),
            Value::Array(items) => {
                let mut ids = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::String(s) => ids.push(s),
                        other => {
                            return Err(Error::InvalidDocument(format!(
                                "attribute {key:?} of node {id:?} must list node ids, found {}",
                                json_type(&other)
                            )))
                        }
                    }
                }
                AttrValue::List(ids)
            }
            other => {
                return Err(Error::InvalidDocument(format!(
                    "attribute {key:?} of node {id:?} has unsupported shape {}",
                    json_type(&other)
                )))
            }
        };
        attributes.insert(key, attr);
    }

    if kind.is_empty() {
        return Err(Error::InvalidDocument(format!(
            "node {id:?} of {function:?} is missing a non-empty type"
        )));
    }

    Ok(AstNode {
        id: id.to_string(),
        kind,
        attributes,
    })
}

/// Checks that entry ids and structural control-flow references resolve.
fn validate_references(doc: &AstDocument) -> Result<()> {
    let dangling = |id: &str| Error::DanglingReference {
        function: doc.function_name.clone(),
        id: id.to_string(),
    };

    for id in &doc.entry_ids {
        if !doc.nodes.contains_key(id) {
            return Err(dangling(id));
        }
    }
    for node in doc.nodes.values() {
        for attr in STRUCTURAL_SCALAR_ATTRS {
            if let Some(AttrValue::Str(id)) = node.attr(attr) {
                if !doc.nodes.contains_key(id) {
                    return Err(dangling(id));
                }
            }
        }
        for attr in STRUCTURAL_LIST_ATTRS {
            if let Some(AttrValue::List(ids)) = node.attr(attr) {
                for id in ids {
                    if !doc.nodes.contains_key(id) {
                        return Err(dangling(id));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Serializes a document back into the input format.
///
/// Object keys are emitted in deterministic order (`type` first, then
/// attributes lexicographically), so serialize-then-parse is the identity on
/// parsed documents.
pub fn serialize_file_document(doc: &FileDocument) -> Vec<u8> {
    let value = document_to_value(doc);
    let mut bytes = serde_json::to_vec_pretty(&value).expect("document serializes");
    bytes.push(b'\n');
    bytes
}

fn document_to_value(doc: &FileDocument) -> Value {
    let mut root = serde_json::Map::new();
    root.insert("file_id".into(), Value::String(doc.file_id.clone()));
    let functions: Vec<Value> = doc
        .functions
        .iter()
        .map(|f| {
            let mut obj = serde_json::Map::new();
            obj.insert("name".into(), Value::String(f.function_name.clone()));
            obj.insert(
                "entry".into(),
                Value::Array(f.entry_ids.iter().cloned().map(Value::String).collect()),
            );
            let mut nodes = serde_json::Map::new();
            for (id, node) in &f.nodes {
                let mut node_obj = serde_json::Map::new();
                node_obj.insert("type".into(), Value::String(node.kind.clone()));
                for (key, attr) in &node.attributes {
                    let v = match attr {
                        AttrValue::Str(s) => Value::String(s.clone()),
                        AttrValue::Num(x) => serde_json::Number::from_f64(*x)
                            .map(Value::Number)
                            .unwrap_or(Value::Null),
                        AttrValue::List(items) => {
                            Value::Array(items.iter().cloned().map(Value::String).collect())
                        }
                    };
                    node_obj.insert(key.clone(), v);
                }
                nodes.insert(id.clone(), Value::Object(node_obj));
            }
            obj.insert("nodes".into(), Value::Object(nodes));
            Value::Object(obj)
        })
        .collect();
    root.insert("functions".into(), Value::Array(functions));
    if let Some(edges) = &doc.call_edges {
        root.insert(
            "call_edges".into(),
            Value::Array(
                edges
                    .iter()
                    .map(|(a, b)| {
                        Value::Array(vec![Value::String(a.clone()), Value::String(b.clone())])
                    })
                    .collect(),
            ),
        );
    }
    Value::Object(root)
}

fn json_type(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
