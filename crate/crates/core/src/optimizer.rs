//! Stochastic primal descent / dual ascent on the surrogate Lagrangians.
//!
//! Each step descends the batch Lagrangian in the scorer parameters, then
//! ascends it in the multipliers using the freshly updated scorer, and
//! projects the multipliers back onto `[0, lambda_cap]`.
//!
//! Steps are taken in normalized coordinates so one learning rate works
//! across dataset sizes: the Lagrangian is divided by the number of
//! examples (F-beta is already scale-free), and each multiplier is stepped
//! on the scale of its constraint. For AUC objectives the per-anchor
//! thresholds and multipliers are additionally divided by the anchor
//! width so their dynamics do not depend on the anchor count.

use std::io::Write;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{report, ReportOptions};
use crate::model::{LabeledDataset, MetricsReport, ObjectiveKind, ObjectiveSpec, SaddleState, ThresholdedScorer};
use crate::objectives::{evaluate, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    Constant,
    /// `lr / sqrt(1 + step)`
    #[default]
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr_primal: f64,
    pub lr_dual: f64,
    pub lr_decay: LrDecay,
    pub l2_reg: f64,
    /// Upper end of the multiplier box; `None` leaves it unbounded.
    pub lambda_cap: Option<f64>,
    pub seed: u64,
    /// Trace a record every this many steps (the final step is always
    /// recorded); 0 records only the final step.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 3000,
            batch_size: 256,
            lr_primal: 1.0,
            lr_dual: 0.05,
            lr_decay: LrDecay::InvSqrt,
            l2_reg: 1e-3,
            lambda_cap: Some(1e4),
            seed: 0,
            eval_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.batch_size < 2 {
            return bad(format!("batch_size {} must be >= 2", self.batch_size));
        }
        if !(self.lr_primal > 0.0 && self.lr_primal.is_finite()) {
            return bad(format!("lr_primal {} must be > 0", self.lr_primal));
        }
        if !(self.lr_dual > 0.0 && self.lr_dual.is_finite()) {
            return bad(format!("lr_dual {} must be > 0", self.lr_dual));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return bad(format!("l2_reg {} must be >= 0", self.l2_reg));
        }
        if let Some(cap) = self.lambda_cap {
            if !(cap > 0.0) {
                return bad(format!("lambda_cap {cap} must be > 0"));
            }
        }
        Ok(())
    }

    fn decay(&self, step: usize) -> f64 {
        match self.lr_decay {
            LrDecay::Constant => 1.0,
            LrDecay::InvSqrt => 1.0 / ((1 + step) as f64).sqrt(),
        }
    }
}

/// Per-objective preconditioning of the raw Lagrangian gradients.
#[derive(Debug, Clone, PartialEq)]
struct StepScales {
    primal: f64,
    thresholds: Vec<f64>,
    duals: Vec<f64>,
    tp_estimate: f64,
}

impl StepScales {
    fn new(objective: &ObjectiveSpec, data: &LabeledDataset) -> Result<Self> {
        let n = data.len() as f64;
        let n_pos = data.n_pos() as f64;
        let n_neg = data.n_neg() as f64;
        let single = |primal: f64, dual: f64| Self {
            primal: 1.0 / primal,
            thresholds: vec![1.0],
            duals: vec![dual],
            tp_estimate: 0.0,
        };
        let per_anchor = |class: f64| -> Result<Self> {
            let deltas = objective.anchor_weights()?.deltas;
            Ok(Self {
                primal: 1.0 / n,
                thresholds: deltas.iter().map(|d| 1.0 / d).collect(),
                duals: deltas.iter().map(|d| n / (class * class) / d).collect(),
                tp_estimate: 0.0,
            })
        };
        Ok(match objective.kind {
            ObjectiveKind::RecallAtPrecision => single(n, n / (n_pos * n_pos)),
            ObjectiveKind::PrecisionAtRecall => single(n, n),
            ObjectiveKind::Aucpr => per_anchor(n_pos)?,
            ObjectiveKind::Aucroc => per_anchor(n_neg)?,
            ObjectiveKind::FBeta => Self {
                tp_estimate: n_pos * n_pos,
                ..single(1.0, 1.0 / (n_pos * n_pos))
            },
            ObjectiveKind::Hinge => Self {
                duals: Vec::new(),
                ..single(n, 0.0)
            },
        })
    }
}

/// Lower end of the auxiliary true-positive estimate, as a fraction of n_pos.
const MIN_TP_FRACTION: f64 = 1e-3;

/// One primal-descent / dual-ascent step on `sample`.
///
/// Multipliers are updated only when the sample holds both classes; with a
/// class missing the constraint estimate is biased.
pub fn sgd_step(
    state: &SaddleState,
    sample: &Sample<'_>,
    objective: &ObjectiveSpec,
    cfg: &TrainConfig,
) -> Result<SaddleState> {
    let scales = StepScales::new(objective, sample.data())?;
    step_with(state, sample, objective, cfg, &scales)
}

fn step_with(
    state: &SaddleState,
    sample: &Sample<'_>,
    objective: &ObjectiveSpec,
    cfg: &TrainConfig,
    scales: &StepScales,
) -> Result<SaddleState> {
    let decay = cfg.decay(state.step);
    let lr = cfg.lr_primal * decay;
    let lr_dual = cfg.lr_dual * decay;
    let non_finite = || Error::NonFiniteGradient { step: state.step };

    let eval = evaluate(state, objective, sample)?;
    if !eval.is_finite() {
        return Err(non_finite());
    }
    let mut next = state.clone();
    let scorer = &mut next.scorer;
    for (w, g) in scorer.weights.iter_mut().zip(&eval.grad_weights) {
        *w -= lr * (scales.primal * g + cfg.l2_reg * *w);
    }
    scorer.bias -= lr * scales.primal * eval.grad_bias;
    for ((t, g), s) in scorer
        .thresholds
        .iter_mut()
        .zip(&eval.grad_thresholds)
        .zip(&scales.thresholds)
    {
        *t -= lr * scales.primal * s * g;
    }
    let both = sample.has_both_classes();
    if let (Some(psi), Some(g)) = (next.tp_estimate.as_mut(), eval.grad_tp_estimate) {
        if both {
            let n_pos = sample.data().n_pos() as f64;
            *psi = (*psi - lr * scales.tp_estimate * g).clamp(MIN_TP_FRACTION * n_pos, n_pos);
        }
    }

    if both && !next.duals.is_empty() {
        let dual_eval = evaluate(&next, objective, sample)?;
        if !dual_eval.is_finite() {
            return Err(non_finite());
        }
        let cap = cfg.lambda_cap.unwrap_or(f64::INFINITY);
        for ((l, g), s) in next.duals.iter_mut().zip(&dual_eval.grad_duals).zip(&scales.duals) {
            *l = (*l + lr_dual * s * g).clamp(0.0, cap);
        }
    }
    if next.scorer.weights.iter().any(|v| !v.is_finite())
        || !next.scorer.bias.is_finite()
        || next.scorer.thresholds.iter().any(|v| !v.is_finite())
    {
        return Err(non_finite());
    }
    next.step += 1;
    Ok(next)
}

/// One trace entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Number of steps taken so far.
    pub step: usize,
    /// Full-data Lagrangian at the current state.
    pub lagrangian_estimate: f64,
    pub duals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_estimate: Option<f64>,
    pub scorer: ThresholdedScorer,
    /// Multipliers sitting at `lambda_cap`.
    #[serde(default)]
    pub cap_hits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Report options matching the objective's own target, used for in-loop
/// metrics so they can be reproduced by a standalone evaluation.
pub fn report_options_for(objective: &ObjectiveSpec) -> ReportOptions {
    let mut opts = ReportOptions::default();
    match objective.kind {
        ObjectiveKind::RecallAtPrecision => opts.alpha = Some(objective.target),
        ObjectiveKind::PrecisionAtRecall => opts.beta_recall = Some(objective.target),
        ObjectiveKind::FBeta => opts.beta = Some(objective.target),
        _ => {}
    }
    opts
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub state: SaddleState,
    pub trace: TrainTrace,
}

impl TrainOutcome {
    pub fn scorer(&self) -> &ThresholdedScorer {
        &self.state.scorer
    }
}

/// Runs `cfg.steps` steps over seeded shuffled-epoch batches and returns the
/// final iterate. Batches of at least the dataset size use the full data.
/// When `eval_data` is given each trace record carries exact metrics on it.
pub fn train(
    data: &LabeledDataset,
    objective: &ObjectiveSpec,
    cfg: &TrainConfig,
    eval_data: Option<&LabeledDataset>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if let Some(e) = eval_data {
        if e.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                actual: e.dim(),
            });
        }
    }
    let scales = StepScales::new(objective, data)?;
    let report_opts = report_options_for(objective);
    let mut state = SaddleState::init(data.dim(), objective, data);
    let mut trace = TrainTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let full_batch = cfg.batch_size >= data.len();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();

    let record = |state: &SaddleState| -> Result<TraceRecord> {
        let full = evaluate(state, objective, &Sample::full(data))?;
        let cap_hits = cfg
            .lambda_cap
            .map_or(0, |cap| state.duals.iter().filter(|&&l| l >= cap).count());
        if cap_hits > 0 {
            warn!("step {}: {cap_hits} multiplier(s) at lambda_cap", state.step);
        }
        let metrics = eval_data
            .map(|e| report(&state.scorer, e, &report_opts))
            .transpose()?;
        Ok(TraceRecord {
            step: state.step,
            lagrangian_estimate: full.value,
            duals: state.duals.clone(),
            tp_estimate: state.tp_estimate,
            scorer: state.scorer.clone(),
            cap_hits,
            metrics,
        })
    };

    for t in 0..cfg.steps {
        state = if full_batch {
            step_with(&state, &Sample::full(data), objective, cfg, &scales)?
        } else {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let end = (cursor + cfg.batch_size).min(order.len());
            let batch = &order[cursor..end];
            cursor = end;
            step_with(&state, &Sample::batch(data, batch), objective, cfg, &scales)?
        };
        let done = t + 1;
        if done == cfg.steps || (cfg.eval_every > 0 && done % cfg.eval_every == 0) {
            let r = record(&state)?;
            debug!("step {done}: lagrangian {:.6}", r.lagrangian_estimate);
            trace.records.push(r);
        }
    }
    Ok(TrainOutcome { state, trace })
}

fn last_half(trace: &TrainTrace) -> Result<&[TraceRecord]> {
    let n = trace.records.len();
    if n == 0 {
        return Err(Error::InvalidArgument("trace has no records".into()));
    }
    Ok(&trace.records[n / 2..])
}

/// Uniform average of the scorers in the last half of the trace.
pub fn averaged_iterate(trace: &TrainTrace) -> Result<ThresholdedScorer> {
    let recs = last_half(trace)?;
    let m = recs.len() as f64;
    let first = &recs[0].scorer;
    let mut avg = ThresholdedScorer::zeros(first.dim(), first.num_thresholds());
    for r in recs {
        for (a, w) in avg.weights.iter_mut().zip(&r.scorer.weights) {
            *a += w / m;
        }
        avg.bias += r.scorer.bias / m;
        for (a, t) in avg.thresholds.iter_mut().zip(&r.scorer.thresholds) {
            *a += t / m;
        }
    }
    Ok(avg)
}

/// Uniform average of the multipliers over the same records as
/// [`averaged_iterate`].
pub fn averaged_duals(trace: &TrainTrace) -> Result<Vec<f64>> {
    let recs = last_half(trace)?;
    let m = recs.len() as f64;
    let mut avg = vec![0.0; recs[0].duals.len()];
    for r in recs {
        for (a, l) in avg.iter_mut().zip(&r.duals) {
            *a += l / m;
        }
    }
    Ok(avg)
}
