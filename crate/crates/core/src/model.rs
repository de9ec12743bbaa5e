//! Domain types shared by every module: labeled data, thresholded linear
//! scorers, objective specifications and optimizer state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives;

/// Binary class label. Serialized as -1 / +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// Parses `0`/`-1` as negative and `1`/`+1` as positive.
    pub fn parse(raw: &str) -> Result<Label> {
        let trimmed = raw.trim();
        let value: f64 = trimmed
            .parse()
            .map_err(|_| Error::InvalidLabel(raw.to_string()))?;
        if value == 1.0 {
            Ok(Label::Positive)
        } else if value == 0.0 || value == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::InvalidLabel(raw.to_string()))
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Label> {
        match v {
            1 => Ok(Label::Positive),
            -1 | 0 => Ok(Label::Negative),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label }
    }
}

/// An immutable set of labeled examples with cached class counts.
///
/// Construction rejects mixed dimensions, non-finite features and
/// single-class data, so every downstream computation may assume
/// `n_pos >= 1` and `n_neg >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    examples: Vec<LabeledExample>,
    dim: usize,
    n_pos: usize,
    n_neg: usize,
}

impl LabeledDataset {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        let dim = examples.first().map(|e| e.features.len()).unwrap_or(0);
        let mut n_pos = 0;
        for (row, ex) in examples.iter().enumerate() {
            if ex.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: ex.features.len(),
                });
            }
            if let Some(column) = ex.features.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row, column });
            }
            if ex.label.is_positive() {
                n_pos += 1;
            }
        }
        let n_neg = examples.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::SingleClass { n_pos, n_neg });
        }
        Ok(Self {
            examples,
            dim,
            n_pos,
            n_neg,
        })
    }

    /// Convenience constructor from parallel feature rows and ±1 labels.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: &[i8]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let examples = rows
            .into_iter()
            .zip(labels)
            .map(|(f, &l)| Ok(LabeledExample::new(f, Label::try_from(l)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(examples)
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    /// Positive class prior estimated from this dataset.
    pub fn prior(&self) -> f64 {
        self.n_pos as f64 / self.len() as f64
    }

    /// Copies the examples at `indices` into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.examples[i].clone()).collect())
    }

    /// Returns a copy with every feature multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.examples
                .iter()
                .map(|e| {
                    LabeledExample::new(e.features.iter().map(|v| v * factor).collect(), e.label)
                })
                .collect(),
        )
    }
}

/// Linear score function `weights·x + bias` plus one decision threshold per
/// anchor. Example `x` is classified positive at anchor `t` iff
/// `score(x) >= thresholds[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedScorer {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub thresholds: Vec<f64>,
}

impl ThresholdedScorer {
    pub fn new(weights: Vec<f64>, bias: f64, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidArgument(
                "a scorer needs at least one threshold".into(),
            ));
        }
        Ok(Self {
            weights,
            bias,
            thresholds,
        })
    }

    pub fn zeros(dim: usize, num_thresholds: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            thresholds: vec![0.0; num_thresholds.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn num_thresholds(&self) -> usize {
        self.thresholds.len()
    }

    /// Raw score `weights·x + bias`; thresholds are not subtracted.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        Ok(self.score_unchecked(x))
    }

    #[inline]
    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .fold(self.bias, |acc, (w, v)| acc + w * v)
    }

    pub fn classify(&self, x: &[f64], anchor: usize) -> Result<bool> {
        let threshold = *self.thresholds.get(anchor).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "anchor {anchor} out of range for {} thresholds",
                self.thresholds.len()
            ))
        })?;
        Ok(self.score(x)? >= threshold)
    }

    /// Scores every example in `data`.
    pub fn scores(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.dim(),
            });
        }
        Ok(data
            .examples()
            .iter()
            .map(|e| self.score_unchecked(&e.features))
            .collect())
    }

    pub(crate) fn check_dim(&self, data: &LabeledDataset) -> Result<()> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: data.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    RecallAtPrecision,
    PrecisionAtRecall,
    Aucpr,
    Aucroc,
    FBeta,
    /// Plain hinge loss over all examples; the accuracy baseline.
    Hinge,
}

impl ObjectiveKind {
    pub fn is_auc(self) -> bool {
        matches!(self, ObjectiveKind::Aucpr | ObjectiveKind::Aucroc)
    }
}

/// Which surrogate to optimize and its parameters.
///
/// `anchors` holds the full anchor sequence `a_0 < a_1 < ... < a_k` for the
/// AUC kinds (precision anchors for AUCPR, false-positive-rate anchors for
/// AUCROC) and is empty otherwise. `anchor_range` restricts the integration
/// range of the AUC kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub target: f64,
    pub anchors: Vec<f64>,
    pub anchor_range: Option<(f64, f64)>,
}

impl ObjectiveSpec {
    /// Maximize recall subject to precision >= `alpha`, with `alpha` in
    /// `(prior, 1)`.
    pub fn recall_at_precision(alpha: f64, prior: f64) -> Result<Self> {
        if !(alpha > prior && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "precision target {alpha} must lie in ({prior}, 1)"
            )));
        }
        Ok(Self::single(ObjectiveKind::RecallAtPrecision, alpha))
    }

    pub fn precision_at_recall(beta_recall: f64) -> Result<Self> {
        if !(beta_recall > 0.0 && beta_recall <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "recall target {beta_recall} must lie in (0, 1]"
            )));
        }
        Ok(Self::single(ObjectiveKind::PrecisionAtRecall, beta_recall))
    }

    pub fn fbeta(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta {beta} must be > 0")));
        }
        Ok(Self::single(ObjectiveKind::FBeta, beta))
    }

    pub fn hinge() -> Self {
        Self::single(ObjectiveKind::Hinge, 0.0)
    }

    /// AUCPR over `k` uniform precision anchors starting at
    /// `max(prior, range.lo)`, capped at `1 - epsilon_cap`.
    pub fn aucpr(
        k: usize,
        prior: f64,
        range: Option<(f64, f64)>,
        epsilon_cap: f64,
    ) -> Result<Self> {
        let (lo, hi) = range.unwrap_or((0.0, 1.0));
        let start = prior.max(lo);
        let anchors = objectives::uniform_anchors(start, hi, k, epsilon_cap)?;
        Ok(Self {
            kind: ObjectiveKind::Aucpr,
            target: 0.0,
            anchors,
            anchor_range: range,
        })
    }

    /// AUCROC over `k` uniform false-positive-rate anchors starting at
    /// `range.lo` (default 0), capped at `1 - epsilon_cap`.
    pub fn aucroc(k: usize, range: Option<(f64, f64)>, epsilon_cap: f64) -> Result<Self> {
        let (lo, hi) = range.unwrap_or((0.0, 1.0));
        let anchors = objectives::uniform_anchors(lo, hi, k, epsilon_cap)?;
        Ok(Self {
            kind: ObjectiveKind::Aucroc,
            target: 0.0,
            anchors,
            anchor_range: range,
        })
    }

    /// AUC objective over an explicit anchor sequence (first entry is the
    /// integration start and carries no threshold).
    pub fn with_anchors(kind: ObjectiveKind, anchors: Vec<f64>) -> Result<Self> {
        if !kind.is_auc() {
            return Err(Error::InvalidArgument(
                "explicit anchors only apply to AUC objectives".into(),
            ));
        }
        objectives::AnchorWeights::from_anchors(&anchors)?;
        Ok(Self {
            kind,
            target: 0.0,
            anchors,
            anchor_range: None,
        })
    }

    fn single(kind: ObjectiveKind, target: f64) -> Self {
        Self {
            kind,
            target,
            anchors: Vec::new(),
            anchor_range: None,
        }
    }

    /// Number of thresholds a scorer needs for this objective.
    pub fn num_thresholds(&self) -> usize {
        if self.kind.is_auc() {
            self.anchors.len().saturating_sub(1).max(1)
        } else {
            1
        }
    }

    /// Number of dual multipliers.
    pub fn num_duals(&self) -> usize {
        match self.kind {
            ObjectiveKind::Hinge => 0,
            _ => self.num_thresholds(),
        }
    }

    pub fn anchor_weights(&self) -> Result<objectives::AnchorWeights> {
        objectives::AnchorWeights::from_anchors(&self.anchors)
    }
}

/// Primal parameters and dual multipliers mid-optimization.
///
/// `tp_estimate` is the auxiliary surrogate true-positive count used by the
/// F-beta saddle form and is `None` for every other objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleState {
    pub scorer: ThresholdedScorer,
    pub duals: Vec<f64>,
    pub tp_estimate: Option<f64>,
    pub step: usize,
}

impl SaddleState {
    pub const INITIAL_DUAL: f64 = 1.0;

    /// Zero scorer, duals at 1.0 (1 / n_pos for F-beta).
    pub fn init(dim: usize, objective: &ObjectiveSpec, data: &LabeledDataset) -> Self {
        let scorer = ThresholdedScorer::zeros(dim, objective.num_thresholds());
        let tp_estimate = match objective.kind {
            ObjectiveKind::FBeta => Some(0.5 * data.n_pos() as f64),
            _ => None,
        };
        // the F-beta multiplier lives on a 1 / n_pos scale
        let dual = match objective.kind {
            ObjectiveKind::FBeta => Self::INITIAL_DUAL / data.n_pos() as f64,
            _ => Self::INITIAL_DUAL,
        };
        Self {
            scorer,
            duals: vec![dual; objective.num_duals()],
            tp_estimate,
            step: 0,
        }
    }
}

/// Exact (non-surrogate) evaluation of a scorer on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub beta: f64,
    pub f_beta: f64,
    pub accuracy: f64,
    pub average_precision: f64,
    pub auc_roc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_at_precision: Option<OperatingPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_at_recall: Option<OperatingPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pr_curve: Vec<(f64, f64)>,
}

/// Result of an exact R@P or P@R sweep: the constraint target, the best
/// achieved value of the other quantity and the threshold achieving it
/// (`None` when no threshold satisfies the constraint).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target: f64,
    pub value: f64,
    pub threshold: Option<f64>,
}
