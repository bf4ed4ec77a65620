//! From-scratch random forest over file vectors.
//!
//! Trees grow on bootstrap resamples; each split examines a fresh uniform
//! subset of features and takes the largest gini impurity decrease, with ties
//! broken toward the lowest feature index and threshold so training is fully
//! deterministic for a fixed seed. Per-tree seeds derive from the base seed
//! plus the tree index, which keeps parallel and serial training identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vectorize::FileVector;

/// Binary sample label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

impl Label {
    fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Malicious => 1,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Benign => f.write_str("benign"),
            Label::Malicious => f.write_str("malicious"),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "benign" => Ok(Label::Benign),
            "malicious" | "malware" => Ok(Label::Malicious),
            other => Err(Error::InvalidConfig(format!("unknown label {other:?}"))),
        }
    }
}

/// Features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    Sqrt,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    fn per_split(self, feature_count: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (feature_count as f64).sqrt().ceil() as usize,
            MaxFeatures::All => feature_count,
            MaxFeatures::Fixed(n) => n,
        };
        m.clamp(1, feature_count)
    }
}

impl Serialize for MaxFeatures {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxFeatures::Sqrt => serializer.serialize_str("sqrt"),
            MaxFeatures::All => serializer.serialize_str("all"),
            MaxFeatures::Fixed(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for MaxFeatures {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::String(s) => match s.as_str() {
                "sqrt" => Ok(MaxFeatures::Sqrt),
                "all" => Ok(MaxFeatures::All),
                other => Err(DeError::custom(format!(
                    "max_features must be \"sqrt\", \"all\", or a count, got {other:?}"
                ))),
            },
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|v| MaxFeatures::Fixed(v as usize))
                .ok_or_else(|| DeError::custom("max_features count must be a positive integer")),
            other => Err(DeError::custom(format!(
                "max_features must be \"sqrt\", \"all\", or a count, got {other}"
            ))),
        }
    }
}

/// Split criterion; only gini impurity is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub criterion: Criterion,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Minimum gini impurity decrease required to split.
    pub min_impurity_split: f64,
    pub seed: u64,
    // Knobs honored by omission: anything but the published defaults is
    // rejected at validation.
    pub max_leaf_nodes: Option<usize>,
    pub warm_start: bool,
    pub oob_score: bool,
    pub min_weight_fraction_leaf: f64,
    pub class_weight: Option<String>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 100,
            max_features: MaxFeatures::Sqrt,
            criterion: Criterion::Gini,
            bootstrap: true,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_impurity_split: 2.09876756095e-5,
            seed: 42,
            max_leaf_nodes: None,
            warm_start: false,
            oob_score: false,
            min_weight_fraction_leaf: 0.0,
            class_weight: None,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidConfig("n_estimators must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if !self.min_impurity_split.is_finite() || self.min_impurity_split < 0.0 {
            return Err(Error::InvalidConfig(
                "min_impurity_split must be finite and nonnegative".into(),
            ));
        }
        if self.max_leaf_nodes.is_some() {
            return Err(Error::InvalidConfig(
                "max_leaf_nodes is not implemented; it must stay null".into(),
            ));
        }
        if self.warm_start {
            return Err(Error::InvalidConfig(
                "warm_start is not implemented; it must stay false".into(),
            ));
        }
        if self.oob_score {
            return Err(Error::InvalidConfig(
                "oob_score is not implemented; it must stay false".into(),
            ));
        }
        if self.min_weight_fraction_leaf != 0.0 {
            return Err(Error::InvalidConfig(
                "min_weight_fraction_leaf is not implemented; it must stay 0".into(),
            ));
        }
        if self.class_weight.is_some() {
            return Err(Error::InvalidConfig(
                "class_weight is not implemented; it must stay null".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<R> {
    Split {
        feature: usize,
        threshold: R,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class probabilities (benign, malicious); sums to 1.
        prob: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<R> {
    pub nodes: Vec<TreeNode<R>>,
}

impl<R: Real> DecisionTree<R> {
    fn leaf_prob(&self, features: &[R]) -> [f64; 2] {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { prob } => return *prob,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    fn vote(&self, features: &[R]) -> Label {
        let prob = self.leaf_prob(features);
        if prob[1] > prob[0] {
            Label::Malicious
        } else {
            Label::Benign
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForestModel<R: Real> {
    pub config: ForestConfig,
    pub schema_hash: String,
    pub feature_count: usize,
    pub trees: Vec<DecisionTree<R>>,
}

/// Trains a forest on labeled vectors.
pub fn train<R: Real>(
    vectors: &[FileVector<R>],
    labels: &[Label],
    cfg: &ForestConfig,
) -> Result<ForestModel<R>> {
    cfg.validate()?;
    if vectors.is_empty() {
        return Err(Error::InvalidParameter("no training vectors".into()));
    }
    if vectors.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} vectors but {} labels",
            vectors.len(),
            labels.len()
        )));
    }
    let schema_hash = vectors[0].schema_hash.clone();
    let feature_count = vectors[0].len();
    for v in vectors {
        if v.schema_hash != schema_hash {
            return Err(Error::SchemaMismatch {
                expected: schema_hash,
                found: v.schema_hash.clone(),
            });
        }
    }
    if !labels.contains(&Label::Benign) || !labels.contains(&Label::Malicious) {
        return Err(Error::SingleClass);
    }

    let rows: Vec<&[R]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    let label_idx: Vec<u8> = labels.iter().map(|l| l.index() as u8).collect();

    let trees: Vec<DecisionTree<R>> = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(t as u64));
            let n = rows.len();
            let sample: Vec<u32> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            let mut builder = TreeBuilder {
                rows: &rows,
                labels: &label_idx,
                cfg,
                rng,
                nodes: Vec::new(),
                features_per_split: cfg.max_features.per_split(feature_count),
                feature_count,
            };
            builder.grow(sample, 0);
            DecisionTree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(ForestModel {
        config: cfg.clone(),
        schema_hash,
        feature_count,
        trees,
    })
}

struct TreeBuilder<'a, R: Real> {
    rows: &'a [&'a [R]],
    labels: &'a [u8],
    cfg: &'a ForestConfig,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode<R>>,
    features_per_split: usize,
    feature_count: usize,
}

impl<'a, R: Real> TreeBuilder<'a, R> {
    /// Grows the subtree over `samples`, returning its root index.
    fn grow(&mut self, samples: Vec<u32>, depth: usize) -> usize {
        let counts = self.count(&samples);
        let n = samples.len();
        let at_depth_limit = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if counts[0] == 0 || counts[1] == 0 || n < self.cfg.min_samples_split || at_depth_limit {
            return self.push_leaf(counts, n);
        }
        match self.best_split(&samples, counts, n) {
            Some((feature, threshold)) => {
                let (left_samples, right_samples): (Vec<u32>, Vec<u32>) = samples
                    .into_iter()
                    .partition(|&s| self.rows[s as usize][feature] <= threshold);
                // Reserve the split slot before recursing.
                let slot = self.nodes.len();
                self.nodes.push(TreeNode::Leaf { prob: [0.0, 0.0] });
                let left = self.grow(left_samples, depth + 1);
                let right = self.grow(right_samples, depth + 1);
                self.nodes[slot] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                slot
            }
            None => self.push_leaf(counts, n),
        }
    }

    fn push_leaf(&mut self, counts: [usize; 2], n: usize) -> usize {
        let total = n.max(1) as f64;
        self.nodes.push(TreeNode::Leaf {
            prob: [counts[0] as f64 / total, counts[1] as f64 / total],
        });
        self.nodes.len() - 1
    }

    fn count(&self, samples: &[u32]) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for &s in samples {
            counts[self.labels[s as usize] as usize] += 1;
        }
        counts
    }

    /// Best (feature, threshold) by gini decrease over a fresh feature
    /// subset; ties keep the lowest feature index, then lowest threshold.
    fn best_split(&mut self, samples: &[u32], counts: [usize; 2], n: usize) -> Option<(usize, R)> {
        let mut candidates =
            rand::seq::index::sample(&mut self.rng, self.feature_count, self.features_per_split)
                .into_vec();
        candidates.sort_unstable();

        let parent_impurity = gini(counts, n);
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<(f64, usize, R)> = None;
        let mut column: Vec<(R, u8)> = Vec::with_capacity(n);

        for feature in candidates {
            column.clear();
            column.extend(
                samples
                    .iter()
                    .map(|&s| (self.rows[s as usize][feature], self.labels[s as usize])),
            );
            column.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

            let mut left = [0usize; 2];
            let mut i = 0;
            while i < n {
                // Consume the run of equal values.
                let value = column[i].0;
                while i < n && column[i].0 == value {
                    left[column[i].1 as usize] += 1;
                    i += 1;
                }
                if i == n {
                    break;
                }
                let n_left = left[0] + left[1];
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let weighted = (n_left as f64 * gini(left, n_left)
                    + n_right as f64 * gini(right, n_right))
                    / n as f64;
                let gain = parent_impurity - weighted;
                if gain >= self.cfg.min_impurity_split
                    && best.as_ref().is_none_or(|(g, _, _)| gain > *g)
                {
                    let next = column[i].0;
                    let two = R::from_f64(2.0).unwrap();
                    let mut threshold = (value + next) / two;
                    if threshold >= next {
                        // Midpoint rounded up to the right group; fall back
                        // to the left value so the split still separates.
                        threshold = value;
                    }
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

/// Gini impurity of a two-class count.
fn gini(counts: [usize; 2], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n as f64;
    let p1 = counts[1] as f64 / n as f64;
    1.0 - p0 * p0 - p1 * p1
}

/// Scores one vector: fraction of trees voting malicious, label at 0.5.
pub fn predict<R: Real>(model: &ForestModel<R>, v: &FileVector<R>) -> Result<(Label, f64)> {
    if v.schema_hash != model.schema_hash {
        return Err(Error::SchemaMismatch {
            expected: model.schema_hash.clone(),
            found: v.schema_hash.clone(),
        });
    }
    if v.len() != model.feature_count {
        return Err(Error::InvalidParameter(format!(
            "vector has {} features, model expects {}",
            v.len(),
            model.feature_count
        )));
    }
    let malicious_votes = model
        .trees
        .iter()
        .filter(|t| t.vote(&v.values) == Label::Malicious)
        .count();
    let score = malicious_votes as f64 / model.trees.len() as f64;
    let label = if score >= 0.5 {
        Label::Malicious
    } else {
        Label::Benign
    };
    Ok((label, score))
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub benign: ClassMetrics,
    pub malicious: ClassMetrics,
    /// Support-weighted averages across the two classes.
    pub average: ClassMetrics,
    pub accuracy: f64,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
}

impl MetricsReport {
    /// Renders the report as a fixed-width table.
    pub fn to_table(&self) -> String {
        let row = |name: &str, m: &ClassMetrics| {
            format!(
                "{:<12} {:>9} {:>9} {:>9} {:>9}\n",
                name,
                percent(m.precision),
                percent(m.recall),
                percent(m.f1),
                m.support
            )
        };
        let mut out = format!(
            "{:<12} {:>9} {:>9} {:>9} {:>9}\n",
            "Class", "Precision", "Recall", "F1-score", "Support"
        );
        out.push_str(&row("Benign", &self.benign));
        out.push_str(&row("Malware", &self.malicious));
        out.push_str(&row("avg/total", &self.average));
        out.push_str(&format!("False Positive Rate {}\n", percent(self.false_positive_rate)));
        out.push_str(&format!("False Negative Rate {}\n", percent(self.false_negative_rate)));
        out
    }
}

fn percent(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

/// Metrics from aligned truth/prediction slices; malicious is the positive
/// class for the FPR/FNR rates.
pub fn confusion_metrics(truth: &[Label], predicted: &[Label]) -> MetricsReport {
    assert_eq!(truth.len(), predicted.len());
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in truth.iter().zip(predicted.iter()) {
        match (t, p) {
            (Label::Malicious, Label::Malicious) => tp += 1,
            (Label::Benign, Label::Benign) => tn += 1,
            (Label::Benign, Label::Malicious) => fp += 1,
            (Label::Malicious, Label::Benign) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let class = |tp: usize, fp: usize, fn_: usize, support: usize| {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    };
    // For the benign row the roles flip: a true negative is a benign hit.
    let benign = class(tn, fn_, fp, tn + fp);
    let malicious = class(tp, fp, fn_, tp + fn_);
    let total = truth.len();
    let weighted = |pick: fn(&ClassMetrics) -> f64| {
        (pick(&benign) * benign.support as f64 + pick(&malicious) * malicious.support as f64)
            / total.max(1) as f64
    };
    let average = ClassMetrics {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        support: total,
    };
    MetricsReport {
        benign,
        malicious,
        average,
        accuracy: ratio(tp + tn, total),
        false_positive_rate: ratio(fp, fp + tn),
        false_negative_rate: ratio(fn_, fn_ + tp),
    }
}

/// Scores every vector and reports per-class metrics.
pub fn evaluate<R: Real>(
    model: &ForestModel<R>,
    vectors: &[FileVector<R>],
    labels: &[Label],
) -> Result<MetricsReport> {
    if vectors.is_empty() || vectors.len() != labels.len() {
        return Err(Error::InvalidParameter(
            "evaluation needs aligned, nonempty vectors and labels".into(),
        ));
    }
    let predictions: Vec<Label> = vectors
        .iter()
        .map(|v| predict(model, v).map(|(label, _)| label))
        .collect::<Result<_>>()?;
    Ok(confusion_metrics(labels, &predictions))
}

// ---------------------------------------------------------------------------
// Serialization

const MODEL_FORMAT: &str = "pmiv-forest";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestContainer {
    format: String,
    version: u32,
    schema_hash: String,
    feature_count: usize,
    config: ForestConfig,
    /// SHA-256 over the serialized tree array.
    checksum: String,
    trees: Box<serde_json::value::RawValue>,
}

/// Serializes the model into its versioned container.
pub fn save<R: Real>(model: &ForestModel<R>) -> Vec<u8> {
    let trees_json = serde_json::to_string(&model.trees).expect("trees serialize");
    let checksum = hex::encode(Sha256::digest(trees_json.as_bytes()));
    let raw = serde_json::value::RawValue::from_string(trees_json).expect("valid json");
    let container = ForestContainer {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        schema_hash: model.schema_hash.clone(),
        feature_count: model.feature_count,
        config: model.config.clone(),
        checksum,
        trees: raw,
    };
    let mut bytes = serde_json::to_vec(&container).expect("container serializes");
    bytes.push(b'\n');
    bytes
}

/// Restores a model, verifying container version and payload digest.
pub fn load<R: Real>(bytes: &[u8]) -> Result<ForestModel<R>> {
    let container: ForestContainer =
        serde_json::from_slice(bytes).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if container.format != MODEL_FORMAT {
        return Err(Error::ModelFormat(format!(
            "unexpected container format {:?}",
            container.format
        )));
    }
    if container.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported container version {}",
            container.version
        )));
    }
    let trees_json = container.trees.get();
    let checksum = hex::encode(Sha256::digest(trees_json.as_bytes()));
    if checksum != container.checksum {
        return Err(Error::ModelFormat("tree payload digest mismatch".into()));
    }
    let trees: Vec<DecisionTree<R>> =
        serde_json::from_str(trees_json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(ForestModel {
        config: container.config,
        schema_hash: container.schema_hash,
        feature_count: container.feature_count,
        trees,
    })
}
