//! Node feature functions and their Lebesgue antiderivatives.
//!
//! A feature function maps an AST node to a real, evaluating to zero on
//! nodes whose kind or attribute shape does not fit its definition. Open
//! string vocabularies (type names, opcodes, function names) are folded to
//! reals with the stable hash `eta(s) = log10(max(1, |fnv1a64(s)|))`.
//!
//! Against a probability measure `p` over a graph's vertices, the
//! antiderivative of `f` at threshold `q` is the filtered expectation
//! `sum of f(v) * p_v over vertices with p_v <= q`; evaluating it across an
//! increasing partition of thresholds yields the per-graph feature vector.
//! The uniform-measure integral is the plain average of `f` over the nodes.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::ast::{AstNode, AttrValue};
use crate::error::{Error, Result};
use crate::pagerank::PageRankMeasure;
use crate::scalar::Real;
use crate::sdfg::Sdfg;

/// Node kinds instantiated as `ExpectedType` indicators by default.
pub const DEFAULT_EXPECTED_TYPE_KINDS: &[&str] = &[
    "AddressOf",
    "Assignment",
    "BinaryOp",
    "break",
    "Call",
    "ClassRef",
    "CLRArray",
    "continue",
    "CtorCall",
    "Dereference",
    "Entrypoint",
    "FieldReference",
    "FnPtrObj",
    "LocalVar",
];

/// Default integration thresholds; the terminal threshold is always 1.
pub const DEFAULT_PARTITION: &[f64] = &[0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0];

/// Stable 64-bit FNV-1a over UTF-8 bytes.
fn fnv1a64(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in s.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Log-compressed magnitude of a signed 64-bit hash value.
fn eta_from_hash(hash: i64) -> f64 {
    let magnitude = hash.unsigned_abs().max(1);
    (magnitude as f64).log10()
}

/// Feature-hashes a string: `log10(max(1, |fnv1a64(s)|))`.
pub fn hash_feature(s: &str) -> f64 {
    eta_from_hash(fnv1a64(s) as i64)
}

/// Counts attribute values that were present but had the wrong shape.
#[derive(Debug, Default)]
pub struct WarningCounter(AtomicU64);

impl WarningCounter {
    pub fn new() -> Self {
        Self::default()
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Which node kinds a function applies to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KindMatch {
    Any,
    Exact(String),
    /// Covers kind families such as `CLRVariable` / `CLRVariableWithInitializer`.
    Prefix(String),
}

impl KindMatch {
    fn matches(&self, kind: &str) -> bool {
        match self {
            KindMatch::Any => true,
            KindMatch::Exact(k) => kind == k,
            KindMatch::Prefix(prefix) => kind.starts_with(prefix.as_str()),
        }
    }
}

/// Evaluation rule applied once the kind matches.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Rule {
    /// 1 when the node kind equals the parameter.
    ExpectedType(String),
    /// `eta` of a string attribute.
    HashAttr(&'static str),
    /// A numeric attribute taken verbatim.
    NumAttr(&'static str),
    /// Length of a list attribute.
    CountList(&'static str),
    /// Numeric attribute taken verbatim when it is a number, 0 otherwise.
    NumIfFloat(&'static str),
}

/// A named rule mapping AST nodes to reals.
#[derive(Debug, Clone)]
pub struct FeatureFunction<R: Real> {
    pub name: String,
    kind: KindMatch,
    rule: Rule,
    _marker: std::marker::PhantomData<R>,
}

impl<R: Real> FeatureFunction<R> {
    fn new(name: &str, kind: KindMatch, rule: Rule) -> Self {
        FeatureFunction {
            name: name.to_string(),
            kind,
            rule,
            _marker: std::marker::PhantomData,
        }
    }

    /// Indicator feature for one node kind.
    pub fn expected_type(kind: &str) -> Self {
        Self::new(
            &format!("{kind}_ExpectedType"),
            KindMatch::Any,
            Rule::ExpectedType(kind.to_string()),
        )
    }

    /// Whether this function's range is nonnegative by construction.
    pub fn is_nonnegative(&self) -> bool {
        matches!(
            self.rule,
            Rule::ExpectedType(_) | Rule::HashAttr(_) | Rule::CountList(_)
        )
    }

    /// Evaluates the function on one node.
    pub fn evaluate(&self, node: &AstNode) -> R {
        self.evaluate_counting(node, None)
    }

    /// Evaluates the function, bumping `warnings` when an attribute is
    /// present but has the wrong shape.
    pub fn evaluate_counting(&self, node: &AstNode, warnings: Option<&WarningCounter>) -> R {
        if !self.kind.matches(&node.kind) {
            return R::zero();
        }
        let warn = || {
            if let Some(counter) = warnings {
                counter.bump();
            }
        };
        match &self.rule {
            Rule::ExpectedType(kind) => {
                if node.kind == *kind {
                    R::one()
                } else {
                    R::zero()
                }
            }
            Rule::HashAttr(attr) => match node.attr(attr) {
                Some(AttrValue::Str(s)) => R::from_config(hash_feature(s)),
                Some(_) => {
                    warn();
                    R::zero()
                }
                None => R::zero(),
            },
            Rule::NumAttr(attr) => match node.attr(attr) {
                Some(AttrValue::Num(x)) => R::from_config(*x),
                Some(_) => {
                    warn();
                    R::zero()
                }
                None => R::zero(),
            },
            Rule::CountList(attr) => match node.attr(attr) {
                Some(AttrValue::List(items)) => R::from_usize(items.len()).unwrap(),
                Some(_) => {
                    warn();
                    R::zero()
                }
                None => R::zero(),
            },
            Rule::NumIfFloat(attr) => match node.attr(attr) {
                Some(AttrValue::Num(x)) => R::from_config(*x),
                _ => R::zero(),
            },
        }
    }
}

/// Evaluates `f` on `v`; zero on inapplicable kinds.
pub fn evaluate_function<R: Real>(f: &FeatureFunction<R>, v: &AstNode) -> R {
    f.evaluate(v)
}

/// The nineteen scalar functions of the catalog, in canonical order.
fn scalar_catalog<R: Real>() -> Vec<FeatureFunction<R>> {
    use KindMatch::{Exact, Prefix};
    let exact = |k: &str| Exact(k.to_string());
    vec![
        FeatureFunction::new(
            "CLRVariable",
            Prefix("CLRVariable".to_string()),
            Rule::HashAttr("varType"),
        ),
        FeatureFunction::new("BinaryOp", exact("BinaryOp"), Rule::HashAttr("whichOpCode")),
        FeatureFunction::new("CtorCallctorType", exact("CtorCall"), Rule::HashAttr("ctorType")),
        FeatureFunction::new(
            "FieldReference",
            exact("FieldReference"),
            Rule::HashAttr("fieldName"),
        ),
        FeatureFunction::new("CLRLiteral", exact("CLRLiteral"), Rule::NumAttr("value")),
        FeatureFunction::new("CallfnName", exact("Call"), Rule::HashAttr("fnName")),
        FeatureFunction::new("CLRArrayelemType", exact("CLRArray"), Rule::HashAttr("elemType")),
        FeatureFunction::new("FnPtrObjname", exact("FnPtrObj"), Rule::HashAttr("name")),
        FeatureFunction::new(
            "TypeTesttestedType",
            exact("TypeTest"),
            Rule::HashAttr("testedType"),
        ),
        FeatureFunction::new("ClassRefname", exact("ClassRef"), Rule::HashAttr("name")),
        FeatureFunction::new("TypeCast", exact("TypeCast"), Rule::HashAttr("castedType")),
        FeatureFunction::new("CLRArraysize", exact("CLRArray"), Rule::HashAttr("elemType")),
        FeatureFunction::new("NumPass2Call", exact("Call"), Rule::CountList("arguments")),
        FeatureFunction::new("AddressOf", exact("AddressOf"), Rule::NumAttr("expr")),
        FeatureFunction::new("ThrowOpexpr", exact("ThrowOp"), Rule::NumAttr("expr")),
        FeatureFunction::new("UnaryOpexpr", exact("UnaryOp"), Rule::NumAttr("expr")),
        FeatureFunction::new(
            "StoreLocallocalIdx",
            exact("StoreLocal"),
            Rule::NumAttr("localIdx"),
        ),
        FeatureFunction::new("StoreLocalvalue", exact("StoreLocal"), Rule::NumAttr("value")),
        FeatureFunction::new("Returnvalue", exact("Return"), Rule::NumIfFloat("value")),
    ]
}

/// The full catalog: nineteen scalar functions plus one `ExpectedType`
/// indicator per configured kind.
pub fn catalog_with_kinds<R: Real>(expected_type_kinds: &[String]) -> Vec<FeatureFunction<R>> {
    let mut functions = scalar_catalog();
    for kind in expected_type_kinds {
        functions.push(FeatureFunction::expected_type(kind));
    }
    functions
}

/// The catalog under the default kind configuration (33 functions).
pub fn default_catalog<R: Real>() -> Vec<FeatureFunction<R>> {
    let kinds: Vec<String> = DEFAULT_EXPECTED_TYPE_KINDS
        .iter()
        .map(|s| s.to_string())
        .collect();
    catalog_with_kinds(&kinds)
}

/// Strictly increasing thresholds in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<R: Real> {
    thresholds: Vec<R>,
}

impl<R: Real> Partition<R> {
    /// A schema partition: validated and terminated at exactly 1.
    pub fn new(thresholds: Vec<R>) -> Result<Self> {
        let partition = Self::open(thresholds)?;
        let last = *partition.thresholds.last().unwrap();
        if last != R::one() {
            return Err(Error::InvalidPartition(format!(
                "final threshold must be exactly 1, got {last}"
            )));
        }
        Ok(partition)
    }

    /// An evaluation-only partition: strictly increasing in (0, 1] but not
    /// required to end at 1.
    pub fn open(thresholds: Vec<R>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidPartition("no thresholds".into()));
        }
        let mut previous = R::zero();
        for &q in &thresholds {
            if q.is_nan() || q <= previous {
                return Err(Error::InvalidPartition(format!(
                    "thresholds must be strictly increasing and positive, got {q} after {previous}"
                )));
            }
            previous = q;
        }
        if previous > R::one() {
            return Err(Error::InvalidPartition(format!(
                "thresholds must not exceed 1, got {previous}"
            )));
        }
        Ok(Partition { thresholds })
    }

    pub fn from_config(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| R::from_config(v)).collect())
    }

    pub fn default_partition() -> Self {
        Self::from_config(DEFAULT_PARTITION).expect("default partition is valid")
    }

    pub fn thresholds(&self) -> &[R] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Antiderivative values of one function on one graph, one per threshold.
#[derive(Debug, Clone)]
pub struct Antiderivative<R: Real> {
    pub values: Vec<R>,
    pub function_name: String,
    pub graph_id: String,
}

impl<R: Real> Antiderivative<R> {
    /// The value at the final threshold.
    pub fn terminal(&self) -> R {
        *self.values.last().expect("partition is never empty")
    }
}

/// Evaluates the antiderivative of `f` on `g` against `mu`:
/// `values[j] = sum of f(v) * p_v over vertices with p_v <= q_j`.
pub fn antiderivative<R: Real>(
    g: &Sdfg,
    mu: &PageRankMeasure<R>,
    f: &FeatureFunction<R>,
    partition: &Partition<R>,
) -> Antiderivative<R> {
    antiderivative_counting(g, mu, f, partition, None)
}

/// As [`antiderivative`], counting attribute-shape warnings.
pub fn antiderivative_counting<R: Real>(
    g: &Sdfg,
    mu: &PageRankMeasure<R>,
    f: &FeatureFunction<R>,
    partition: &Partition<R>,
    warnings: Option<&WarningCounter>,
) -> Antiderivative<R> {
    assert_eq!(
        g.node_count(),
        mu.len(),
        "measure must be defined on the graph's vertex set"
    );
    let evaluated: Vec<R> = g
        .nodes
        .iter()
        .map(|node| f.evaluate_counting(node, warnings))
        .collect();
    let values = partition
        .thresholds()
        .iter()
        .map(|&q| {
            let mut total = R::zero();
            for (i, &p) in mu.probabilities.iter().enumerate() {
                if p <= q {
                    total = total + evaluated[i] * p;
                }
            }
            total
        })
        .collect();
    Antiderivative {
        values,
        function_name: f.name.clone(),
        graph_id: g.function_name.clone(),
    }
}

/// Plain average of `f` over the node set.
pub fn uniform_integral<R: Real>(g: &Sdfg, f: &FeatureFunction<R>) -> Result<R> {
    uniform_integral_counting(g, f, None)
}

/// As [`uniform_integral`], counting attribute-shape warnings.
pub fn uniform_integral_counting<R: Real>(
    g: &Sdfg,
    f: &FeatureFunction<R>,
    warnings: Option<&WarningCounter>,
) -> Result<R> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut total = R::zero();
    for node in &g.nodes {
        total = total + f.evaluate_counting(node, warnings);
    }
    Ok(total / R::from_usize(n).unwrap())
}
