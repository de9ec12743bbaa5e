//! Exact (non-surrogate) ranking and classification metrics.
//!
//! Thresholds follow the `score >= threshold` convention, so examples with
//! identical scores always cross a threshold together and every curve has
//! one point per distinct score.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, LabeledDataset, MetricsReport, OperatingPoint, ThresholdedScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// `tp / (tp + fp)`, or 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.fp + self.fn_ + self.tn)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// One run of equal scores: cumulative counts include the group itself.
#[derive(Debug, Clone, Copy)]
struct Group {
    score: f64,
    pos: usize,
    neg: usize,
    cum_pos: usize,
    cum_neg: usize,
}

/// Scores paired with labels, sorted by score descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    items: Vec<(f64, Label)>,
    n_pos: usize,
    n_neg: usize,
}

impl ScoredSet {
    pub fn new(scores: &[f64], labels: &[Label]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidArgument("scores contain NaN".into()));
        }
        let mut items: Vec<(f64, Label)> = scores.iter().copied().zip(labels.iter().copied()).collect();
        items.sort_by(|a, b| b.0.total_cmp(&a.0));
        let n_pos = items.iter().filter(|(_, l)| l.is_positive()).count();
        Ok(Self {
            n_neg: items.len() - n_pos,
            items,
            n_pos,
        })
    }

    pub fn from_scorer(scorer: &ThresholdedScorer, data: &LabeledDataset) -> Result<Self> {
        let scores = scorer.scores(data)?;
        let labels: Vec<Label> = data.examples().iter().map(|e| e.label).collect();
        Self::new(&scores, &labels)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn items(&self) -> &[(f64, Label)] {
        &self.items
    }

    fn groups(&self) -> Vec<Group> {
        let mut out: Vec<Group> = Vec::new();
        let (mut cum_pos, mut cum_neg) = (0, 0);
        for &(score, label) in &self.items {
            let (p, n) = if label.is_positive() { (1, 0) } else { (0, 1) };
            cum_pos += p;
            cum_neg += n;
            match out.last_mut() {
                Some(g) if g.score == score => {
                    g.pos += p;
                    g.neg += n;
                    g.cum_pos = cum_pos;
                    g.cum_neg = cum_neg;
                }
                _ => out.push(Group {
                    score,
                    pos: p,
                    neg: n,
                    cum_pos,
                    cum_neg,
                }),
            }
        }
        out
    }

    pub fn confusion_at(&self, threshold: f64) -> Confusion {
        let (mut tp, mut fp) = (0, 0);
        for &(score, label) in &self.items {
            if score < threshold {
                break;
            }
            if label.is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        Confusion {
            tp,
            fp,
            fn_: self.n_pos - tp,
            tn: self.n_neg - fp,
        }
    }

    /// One (recall, precision) point per distinct score, in descending
    /// threshold order (recall non-decreasing).
    pub fn pr_curve(&self) -> Vec<PrPoint> {
        self.groups()
            .iter()
            .map(|g| PrPoint {
                threshold: g.score,
                recall: ratio(g.cum_pos, self.n_pos),
                precision: ratio(g.cum_pos, g.cum_pos + g.cum_neg),
            })
            .collect()
    }

    pub fn roc_curve(&self) -> Vec<RocPoint> {
        self.groups()
            .iter()
            .map(|g| RocPoint {
                threshold: g.score,
                fpr: ratio(g.cum_neg, self.n_neg),
                tpr: ratio(g.cum_pos, self.n_pos),
            })
            .collect()
    }

    /// Rank-based average precision: the mean over positives of the
    /// precision at the threshold admitting that positive's score group.
    pub fn average_precision(&self) -> f64 {
        if self.n_pos == 0 {
            return 0.0;
        }
        let sum: f64 = self
            .groups()
            .iter()
            .filter(|g| g.pos > 0)
            .map(|g| g.pos as f64 * ratio(g.cum_pos, g.cum_pos + g.cum_neg))
            .sum();
        sum / self.n_pos as f64
    }

    /// Area under the precision envelope `max_{r' >= r} P(r')`, which equals
    /// the integral of [`Self::exact_recall_at_precision`] over `alpha` in
    /// `[0, 1]`. Never below [`Self::average_precision`].
    pub fn interpolated_average_precision(&self) -> f64 {
        if self.n_pos == 0 {
            return 0.0;
        }
        let groups = self.groups();
        let mut best_after = 0.0f64;
        let mut sum = 0.0;
        for g in groups.iter().rev() {
            best_after = best_after.max(ratio(g.cum_pos, g.cum_pos + g.cum_neg));
            sum += g.pos as f64 * best_after;
        }
        sum / self.n_pos as f64
    }

    /// Largest recall over thresholds with precision `>= alpha`, and the
    /// highest threshold attaining it. `(0, +inf)` if no threshold qualifies.
    pub fn exact_recall_at_precision(&self, alpha: f64) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        let mut found = false;
        for g in self.groups() {
            let precision = ratio(g.cum_pos, g.cum_pos + g.cum_neg);
            let recall = ratio(g.cum_pos, self.n_pos);
            if precision >= alpha && (!found || recall > best.0) {
                best = (recall, g.score);
                found = true;
            }
        }
        best
    }

    /// Largest precision over thresholds with recall `>= beta_recall`, and
    /// the highest threshold attaining it. `(0, +inf)` if none qualifies.
    pub fn exact_precision_at_recall(&self, beta_recall: f64) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        let mut found = false;
        for g in self.groups() {
            let precision = ratio(g.cum_pos, g.cum_pos + g.cum_neg);
            let recall = ratio(g.cum_pos, self.n_pos);
            if recall >= beta_recall && (!found || precision > best.0) {
                best = (precision, g.score);
                found = true;
            }
        }
        best
    }

    /// Fraction of (positive, negative) pairs ranked correctly, ties count ½.
    pub fn auc_roc(&self) -> f64 {
        if self.n_pos == 0 || self.n_neg == 0 {
            return 0.5;
        }
        // each positive beats every negative in strictly lower groups
        let mut correct = 0.0;
        for g in self.groups() {
            let neg_below = self.n_neg - g.cum_neg;
            correct += g.pos as f64 * (neg_below as f64 + 0.5 * g.neg as f64);
        }
        correct / (self.n_pos as f64 * self.n_neg as f64)
    }
}

/// Exact F-beta in the type I / type II error form
/// `(1 + b^2) tp / ((1 + b^2) tp + b^2 fn + fp)`; 0 when `tp = 0`.
pub fn exact_fbeta(tp: usize, fp: usize, fn_: usize, beta: f64) -> f64 {
    let b2 = beta * beta;
    let num = (1.0 + b2) * tp as f64;
    let den = num + b2 * fn_ as f64 + fp as f64;
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Options for [`report`].
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub threshold_index: usize,
    /// F-beta weight; 1 when unset.
    pub beta: Option<f64>,
    /// Also run the exact recall-at-precision sweep at this precision.
    pub alpha: Option<f64>,
    /// Also run the exact precision-at-recall sweep at this recall.
    pub beta_recall: Option<f64>,
    pub include_curve: bool,
}

pub fn report(scorer: &ThresholdedScorer, data: &LabeledDataset, opts: &ReportOptions) -> Result<MetricsReport> {
    let scored = ScoredSet::from_scorer(scorer, data)?;
    let threshold = *scorer.thresholds.get(opts.threshold_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "threshold index {} out of range for {} thresholds",
            opts.threshold_index,
            scorer.num_thresholds()
        ))
    })?;
    let c = scored.confusion_at(threshold);
    let beta = opts.beta.unwrap_or(1.0);
    let sentinel = |t: f64| if t.is_finite() { Some(t) } else { None };
    Ok(MetricsReport {
        threshold,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
        precision: c.precision(),
        recall: c.recall(),
        beta,
        f_beta: exact_fbeta(c.tp, c.fp, c.fn_, beta),
        accuracy: c.accuracy(),
        average_precision: scored.average_precision(),
        auc_roc: scored.auc_roc(),
        recall_at_precision: opts.alpha.map(|alpha| {
            let (value, t) = scored.exact_recall_at_precision(alpha);
            OperatingPoint {
                target: alpha,
                value,
                threshold: sentinel(t),
            }
        }),
        precision_at_recall: opts.beta_recall.map(|b| {
            let (value, t) = scored.exact_precision_at_recall(b);
            OperatingPoint {
                target: b,
                value,
                threshold: sentinel(t),
            }
        }),
        pr_curve: if opts.include_curve {
            scored.pr_curve().iter().map(|p| (p.recall, p.precision)).collect()
        } else {
            Vec::new()
        },
    })
}

pub fn write_pr_csv<W: Write>(curve: &[PrPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "recall", "precision"])?;
    for p in curve {
        w.write_record([p.threshold.to_string(), p.recall.to_string(), p.precision.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv<W: Write>(curve: &[RocPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in curve {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
