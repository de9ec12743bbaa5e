//! Hinge-based building-block bounds: a lower bound on true positives and an
//! upper bound on false positives, and the surrogate precision and recall
//! built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, LabeledDataset, ThresholdedScorer};

/// `max(0, 1 - label * (raw_score - threshold))`.
#[inline]
pub fn hinge_loss(raw_score: f64, threshold: f64, label: Label) -> f64 {
    (1.0 - label.sign() * (raw_score - threshold)).max(0.0)
}

/// Derivative of [`hinge_loss`] with respect to `raw_score - threshold`.
///
/// Returns `-label` in the active region (margin < 1) and 0 otherwise,
/// including exactly at the kink.
#[inline]
pub fn hinge_subgradient(raw_score: f64, threshold: f64, label: Label) -> f64 {
    let y = label.sign();
    if y * (raw_score - threshold) < 1.0 {
        -y
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    /// `n_pos - loss_pos`; may be negative.
    pub tp_lb: f64,
    /// Equal to `loss_neg`.
    pub fp_ub: f64,
    pub loss_pos: f64,
    pub loss_neg: f64,
}

impl BoundValues {
    pub fn from_losses(loss_pos: f64, loss_neg: f64, n_pos: usize) -> Self {
        Self {
            tp_lb: n_pos as f64 - loss_pos,
            fp_ub: loss_neg,
            loss_pos,
            loss_neg,
        }
    }
}

/// Hinge sums over the positives and negatives of `data` at threshold
/// `thresholds[anchor_index]`, accumulated in dataset order.
pub fn compute_bounds(
    scorer: &ThresholdedScorer,
    anchor_index: usize,
    data: &LabeledDataset,
) -> Result<BoundValues> {
    scorer.check_dim(data)?;
    let threshold = *scorer.thresholds.get(anchor_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "anchor {anchor_index} out of range for {} thresholds",
            scorer.num_thresholds()
        ))
    })?;
    let (mut loss_pos, mut loss_neg) = (0.0, 0.0);
    for ex in data.examples() {
        let h = hinge_loss(scorer.score_unchecked(&ex.features), threshold, ex.label);
        match ex.label {
            Label::Positive => loss_pos += h,
            Label::Negative => loss_neg += h,
        }
    }
    Ok(BoundValues::from_losses(loss_pos, loss_neg, data.n_pos()))
}

/// `tp_lb / (tp_lb + fp_ub)`, a lower bound on precision.
pub fn surrogate_precision(b: &BoundValues) -> Result<f64> {
    let denom = b.tp_lb + b.fp_ub;
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "surrogate precision has a zero denominator".into(),
        ));
    }
    Ok(b.tp_lb / denom)
}

/// `tp_lb / n_pos`, a lower bound on recall.
pub fn surrogate_recall(b: &BoundValues, n_pos: usize) -> f64 {
    b.tp_lb / n_pos as f64
}
