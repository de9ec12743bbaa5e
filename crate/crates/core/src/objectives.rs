//! Surrogate saddle objectives and their exact subgradients.
//!
//! Every Lagrangian here has the shape
//!
//! ```text
//! L = sum_t ( A_t * loss_pos(theta_t) + B_t * loss_neg(theta_t) ) + C
//! ```
//!
//! where `loss_pos`/`loss_neg` are hinge sums over the positives/negatives at
//! anchor threshold `theta_t`, and the coefficients depend only on the duals
//! (and the auxiliary true-positive estimate for F-beta). The per-class hinge
//! sums and their gradients are computed once per anchor and then combined.

use serde::{Deserialize, Serialize};

use crate::bounds::{hinge_loss, hinge_subgradient, BoundValues};
use crate::error::{Error, Result};
use crate::model::{Label, LabeledDataset, ObjectiveKind, ObjectiveSpec, SaddleState, ThresholdedScorer};

/// Anchor positions `a_1..a_k` and their gaps `a_t - a_{t-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorWeights {
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl AnchorWeights {
    /// Builds weights from the full sequence `a_0 < a_1 < ... < a_k`.
    /// `a_0` may be 0 (the start of an FPR range); all others lie in (0, 1).
    pub fn from_anchors(anchors: &[f64]) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::InvalidArgument(
                "need a start anchor plus at least one more".into(),
            ));
        }
        if !(anchors[0] >= 0.0 && anchors[0] < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "start anchor {} outside [0, 1)",
                anchors[0]
            )));
        }
        let mut alphas = Vec::with_capacity(anchors.len() - 1);
        let mut deltas = Vec::with_capacity(anchors.len() - 1);
        for pair in anchors.windows(2) {
            let (prev, cur) = (pair[0], pair[1]);
            if !(cur > prev) {
                return Err(Error::InvalidArgument(format!(
                    "anchors must be strictly increasing ({prev} then {cur})"
                )));
            }
            if !(cur > 0.0 && cur < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "anchor {cur} outside (0, 1)"
                )));
            }
            alphas.push(cur);
            deltas.push(cur - prev);
        }
        Ok(Self { alphas, deltas })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Uniform anchors `start + (end - start) * t / k` for `t = 0..=k`, clamped to
/// at most `1 - epsilon_cap` and de-duplicated after clamping.
pub fn uniform_anchors(start: f64, end: f64, k: usize, epsilon_cap: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one anchor".into()));
    }
    if !(epsilon_cap > 0.0 && epsilon_cap < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon_cap {epsilon_cap} outside (0, 1)"
        )));
    }
    let cap = 1.0 - epsilon_cap;
    if !(start >= 0.0 && start < end && end <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "anchor range [{start}, {end}] must satisfy 0 <= start < end <= 1"
        )));
    }
    if start >= cap {
        return Err(Error::InvalidArgument(format!(
            "anchor start {start} is at or above the cap {cap}"
        )));
    }
    let mut anchors: Vec<f64> = Vec::with_capacity(k + 1);
    for t in 0..=k {
        let a = (start + (end - start) * t as f64 / k as f64).min(cap);
        if anchors.last().is_none_or(|&last| a > last) {
            anchors.push(a);
        }
    }
    Ok(anchors)
}

/// A view of (part of) a dataset whose per-class hinge sums are rescaled to
/// estimate full-data sums: `n_pos / b_pos` for positives and `n_neg / b_neg`
/// for negatives. A class absent from the batch contributes nothing.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    data: &'a LabeledDataset,
    indices: Option<&'a [usize]>,
    pos_scale: f64,
    neg_scale: f64,
    batch_pos: usize,
    batch_neg: usize,
}

impl<'a> Sample<'a> {
    pub fn full(data: &'a LabeledDataset) -> Self {
        Self {
            data,
            indices: None,
            pos_scale: 1.0,
            neg_scale: 1.0,
            batch_pos: data.n_pos(),
            batch_neg: data.n_neg(),
        }
    }

    pub fn batch(data: &'a LabeledDataset, indices: &'a [usize]) -> Self {
        let examples = data.examples();
        let batch_pos = indices
            .iter()
            .filter(|&&i| examples[i].label.is_positive())
            .count();
        let batch_neg = indices.len() - batch_pos;
        let scale = |total: usize, seen: usize| {
            if seen == 0 {
                0.0
            } else {
                total as f64 / seen as f64
            }
        };
        Self {
            data,
            indices: Some(indices),
            pos_scale: scale(data.n_pos(), batch_pos),
            neg_scale: scale(data.n_neg(), batch_neg),
            batch_pos,
            batch_neg,
        }
    }

    pub fn data(&self) -> &'a LabeledDataset {
        self.data
    }

    /// Whether both classes are represented.
    pub fn has_both_classes(&self) -> bool {
        self.batch_pos > 0 && self.batch_neg > 0
    }

    pub fn batch_counts(&self) -> (usize, usize) {
        (self.batch_pos, self.batch_neg)
    }

    fn for_each<F: FnMut(&[f64], Label)>(&self, mut f: F) {
        let examples = self.data.examples();
        match self.indices {
            None => examples.iter().for_each(|e| f(&e.features, e.label)),
            Some(idx) => idx
                .iter()
                .for_each(|&i| f(&examples[i].features, examples[i].label)),
        }
    }
}

/// Gradient of a hinge sum with respect to the scorer parameters at one anchor.
#[derive(Debug, Clone, PartialEq)]
struct ParamGrad {
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
}

impl ParamGrad {
    fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            threshold: 0.0,
        }
    }
}

/// Per-class hinge sums and their gradients at one anchor threshold.
#[derive(Debug, Clone, PartialEq)]
struct AnchorLosses {
    loss_pos: f64,
    loss_neg: f64,
    grad_pos: ParamGrad,
    grad_neg: ParamGrad,
}

fn anchor_losses(scorer: &ThresholdedScorer, sample: &Sample<'_>) -> Vec<AnchorLosses> {
    let dim = scorer.dim();
    let mut out: Vec<AnchorLosses> = scorer
        .thresholds
        .iter()
        .map(|_| AnchorLosses {
            loss_pos: 0.0,
            loss_neg: 0.0,
            grad_pos: ParamGrad::zeros(dim),
            grad_neg: ParamGrad::zeros(dim),
        })
        .collect();
    sample.for_each(|x, label| {
        let s = scorer.score_unchecked(x);
        for (acc, &theta) in out.iter_mut().zip(&scorer.thresholds) {
            let h = hinge_loss(s, theta, label);
            let g = hinge_subgradient(s, theta, label);
            let (loss, grad) = match label {
                Label::Positive => (&mut acc.loss_pos, &mut acc.grad_pos),
                Label::Negative => (&mut acc.loss_neg, &mut acc.grad_neg),
            };
            *loss += h;
            if g != 0.0 {
                for (gw, v) in grad.weights.iter_mut().zip(x) {
                    *gw += g * v;
                }
                grad.bias += g;
                grad.threshold -= g;
            }
        }
    });
    for acc in out.iter_mut() {
        acc.loss_pos *= sample.pos_scale;
        acc.loss_neg *= sample.neg_scale;
        scale_grad(&mut acc.grad_pos, sample.pos_scale);
        scale_grad(&mut acc.grad_neg, sample.neg_scale);
    }
    out
}

fn scale_grad(g: &mut ParamGrad, c: f64) {
    if c != 1.0 {
        g.weights.iter_mut().for_each(|v| *v *= c);
        g.bias *= c;
        g.threshold *= c;
    }
}

/// Value of a Lagrangian and its subgradients at one primal/dual point.
///
/// `grad_duals` are the partial derivatives with respect to each multiplier
/// (ascent directions). `grad_tp_estimate` is set only by the F-beta form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleEvaluation {
    pub value: f64,
    pub grad_weights: Vec<f64>,
    pub grad_bias: f64,
    pub grad_thresholds: Vec<f64>,
    pub grad_duals: Vec<f64>,
    pub grad_tp_estimate: Option<f64>,
}

impl SaddleEvaluation {
    /// Hinge sums `(loss_pos, loss_neg)` are not retained; callers needing
    /// them use [`crate::bounds::compute_bounds`].
    fn assemble(
        dim: usize,
        losses: &[AnchorLosses],
        pos_coef: &[f64],
        neg_coef: &[f64],
        constant: f64,
        grad_duals: Vec<f64>,
    ) -> Self {
        let mut value = constant;
        let mut grad_weights = vec![0.0; dim];
        let mut grad_bias = 0.0;
        let mut grad_thresholds = Vec::with_capacity(losses.len());
        for ((l, &a), &b) in losses.iter().zip(pos_coef).zip(neg_coef) {
            value += a * l.loss_pos + b * l.loss_neg;
            for ((gw, p), n) in grad_weights
                .iter_mut()
                .zip(&l.grad_pos.weights)
                .zip(&l.grad_neg.weights)
            {
                *gw += a * p + b * n;
            }
            grad_bias += a * l.grad_pos.bias + b * l.grad_neg.bias;
            grad_thresholds.push(a * l.grad_pos.threshold + b * l.grad_neg.threshold);
        }
        Self {
            value,
            grad_weights,
            grad_bias,
            grad_thresholds,
            grad_duals,
            grad_tp_estimate: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_bias.is_finite()
            && self.grad_weights.iter().all(|v| v.is_finite())
            && self.grad_thresholds.iter().all(|v| v.is_finite())
            && self.grad_duals.iter().all(|v| v.is_finite())
            && self.grad_tp_estimate.is_none_or(f64::is_finite)
    }
}

fn check_state(state: &SaddleState, sample: &Sample<'_>, k: usize) -> Result<()> {
    state.scorer.check_dim(sample.data())?;
    if state.scorer.num_thresholds() != k {
        return Err(Error::InvalidArgument(format!(
            "objective needs {k} thresholds, scorer has {}",
            state.scorer.num_thresholds()
        )));
    }
    if state.duals.len() != k {
        return Err(Error::InvalidArgument(format!(
            "objective needs {k} duals, state has {}",
            state.duals.len()
        )));
    }
    Ok(())
}

fn check_precision_anchor(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "precision anchor {alpha} must lie in (0, 1)"
        )));
    }
    Ok(alpha / (1.0 - alpha))
}

/// Recall-at-precision Lagrangian
/// `(1 + l) * loss_pos + l * alpha / (1 - alpha) * loss_neg - l * n_pos`.
pub fn rap_lagrangian(state: &SaddleState, alpha: f64, data: &LabeledDataset) -> Result<SaddleEvaluation> {
    rap_lagrangian_on(state, alpha, &Sample::full(data))
}

pub fn rap_lagrangian_on(state: &SaddleState, alpha: f64, sample: &Sample<'_>) -> Result<SaddleEvaluation> {
    let ratio = check_precision_anchor(alpha)?;
    check_state(state, sample, 1)?;
    let lambda = state.duals[0];
    let n_pos = sample.data().n_pos() as f64;
    let losses = anchor_losses(&state.scorer, sample);
    let l = &losses[0];
    let dual = l.loss_pos + ratio * l.loss_neg - n_pos;
    Ok(SaddleEvaluation::assemble(
        state.scorer.dim(),
        &losses,
        &[1.0 + lambda],
        &[lambda * ratio],
        -lambda * n_pos,
        vec![dual],
    ))
}

/// `alpha * loss_neg + (1 - alpha) * loss_pos - (1 - alpha) * n_pos`; the
/// surrogate precision constraint holds iff this is `<= 0`.
pub fn rap_constraint_residual(scorer: &ThresholdedScorer, alpha: f64, data: &LabeledDataset) -> Result<f64> {
    let b = crate::bounds::compute_bounds(scorer, 0, data)?;
    Ok(rap_residual_from_bounds(&b, alpha, data.n_pos()))
}

pub fn rap_residual_from_bounds(b: &BoundValues, alpha: f64, n_pos: usize) -> f64 {
    alpha * b.loss_neg + (1.0 - alpha) * b.loss_pos - (1.0 - alpha) * n_pos as f64
}

/// Positive-class weight `(1 + l)(1 - alpha) / (l * alpha)` turning the
/// fixed-multiplier R@P problem into a weighted hinge problem.
pub fn c_weight(alpha: f64, lambda: f64) -> Result<f64> {
    check_precision_anchor(alpha)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "multiplier {lambda} must be > 0 for a finite class weight"
        )));
    }
    Ok((1.0 + lambda) * (1.0 - alpha) / (lambda * alpha))
}

/// `sum_i c_i * hinge_i` with positives weighted by `pos_weight` and
/// negatives by 1, at threshold `thresholds[0]`.
pub fn weighted_hinge_objective(scorer: &ThresholdedScorer, data: &LabeledDataset, pos_weight: f64) -> Result<f64> {
    let b = crate::bounds::compute_bounds(scorer, 0, data)?;
    Ok(pos_weight * b.loss_pos + b.loss_neg)
}

/// Precision-at-recall Lagrangian in the reciprocal-precision form
/// `loss_neg + l * (beta + loss_pos / n_pos - 1)`.
pub fn par_lagrangian(state: &SaddleState, beta_recall: f64, data: &LabeledDataset) -> Result<SaddleEvaluation> {
    par_lagrangian_on(state, beta_recall, &Sample::full(data))
}

pub fn par_lagrangian_on(state: &SaddleState, beta_recall: f64, sample: &Sample<'_>) -> Result<SaddleEvaluation> {
    if !(beta_recall > 0.0 && beta_recall <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "recall target {beta_recall} must lie in (0, 1]"
        )));
    }
    check_state(state, sample, 1)?;
    let lambda = state.duals[0];
    let n_pos = sample.data().n_pos() as f64;
    let losses = anchor_losses(&state.scorer, sample);
    let dual = beta_recall + losses[0].loss_pos / n_pos - 1.0;
    Ok(SaddleEvaluation::assemble(
        state.scorer.dim(),
        &losses,
        &[lambda / n_pos],
        &[1.0],
        lambda * (beta_recall - 1.0),
        vec![dual],
    ))
}

/// Anchored AUCPR Lagrangian
/// `sum_t D_t [ (1 + l_t) loss_pos(theta_t) + l_t a_t/(1 - a_t) loss_neg(theta_t) - l_t n_pos ]`.
pub fn aucpr_lagrangian(state: &SaddleState, anchors: &AnchorWeights, data: &LabeledDataset) -> Result<SaddleEvaluation> {
    aucpr_lagrangian_on(state, anchors, &Sample::full(data))
}

pub fn aucpr_lagrangian_on(state: &SaddleState, anchors: &AnchorWeights, sample: &Sample<'_>) -> Result<SaddleEvaluation> {
    let k = anchors.len();
    let ratios = anchors
        .alphas
        .iter()
        .map(|&a| check_precision_anchor(a))
        .collect::<Result<Vec<_>>>()?;
    check_state(state, sample, k)?;
    let n_pos = sample.data().n_pos() as f64;
    let losses = anchor_losses(&state.scorer, sample);
    let mut pos_coef = Vec::with_capacity(k);
    let mut neg_coef = Vec::with_capacity(k);
    let mut duals = Vec::with_capacity(k);
    let mut constant = 0.0;
    for t in 0..k {
        let (delta, lambda, ratio) = (anchors.deltas[t], state.duals[t], ratios[t]);
        pos_coef.push(delta * (1.0 + lambda));
        neg_coef.push(delta * lambda * ratio);
        constant -= delta * lambda * n_pos;
        duals.push(delta * (losses[t].loss_pos + ratio * losses[t].loss_neg - n_pos));
    }
    Ok(SaddleEvaluation::assemble(
        state.scorer.dim(),
        &losses,
        &pos_coef,
        &neg_coef,
        constant,
        duals,
    ))
}

/// Anchored AUCROC Lagrangian
/// `sum_t D_t [ loss_pos(theta_t) + l_t (loss_neg(theta_t) - phi_t n_neg) ]`,
/// i.e. true-positive rate at a capped false-positive rate per anchor.
pub fn aucroc_lagrangian(state: &SaddleState, fpr_anchors: &AnchorWeights, data: &LabeledDataset) -> Result<SaddleEvaluation> {
    aucroc_lagrangian_on(state, fpr_anchors, &Sample::full(data))
}

pub fn aucroc_lagrangian_on(
    state: &SaddleState,
    fpr_anchors: &AnchorWeights,
    sample: &Sample<'_>,
) -> Result<SaddleEvaluation> {
    let k = fpr_anchors.len();
    if fpr_anchors.alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::InvalidArgument("FPR anchors must lie in (0, 1)".into()));
    }
    check_state(state, sample, k)?;
    let n_neg = sample.data().n_neg() as f64;
    let losses = anchor_losses(&state.scorer, sample);
    let mut neg_coef = Vec::with_capacity(k);
    let mut duals = Vec::with_capacity(k);
    let mut constant = 0.0;
    for t in 0..k {
        let (delta, lambda, fpr) = (fpr_anchors.deltas[t], state.duals[t], fpr_anchors.alphas[t]);
        neg_coef.push(delta * lambda);
        constant -= delta * lambda * fpr * n_neg;
        duals.push(delta * (losses[t].loss_neg - fpr * n_neg));
    }
    Ok(SaddleEvaluation::assemble(
        state.scorer.dim(),
        &losses,
        &fpr_anchors.deltas,
        &neg_coef,
        constant,
        duals,
    ))
}

/// Plain hinge loss over every example (no constraint, no duals).
pub fn hinge_objective_on(scorer: &ThresholdedScorer, sample: &Sample<'_>) -> Result<SaddleEvaluation> {
    scorer.check_dim(sample.data())?;
    let losses = anchor_losses(scorer, sample);
    let k = losses.len();
    Ok(SaddleEvaluation::assemble(
        scorer.dim(),
        &losses,
        &vec![1.0; k],
        &vec![1.0; k],
        0.0,
        Vec::new(),
    ))
}

/// Surrogate F-beta `(1 + b^2) tp_lb / (b^2 n_pos + tp_lb + fp_ub)`, a lower
/// bound on the exact F-beta.
pub fn fbeta_surrogate(b: &BoundValues, n_pos: usize, beta: f64) -> Result<f64> {
    let b2 = beta * beta;
    let denom = b2 * n_pos as f64 + b.tp_lb + b.fp_ub;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "surrogate F-beta denominator {denom} is not positive"
        )));
    }
    Ok((1.0 + b2) * b.tp_lb / denom)
}

/// Saddle form of the reciprocal surrogate F-beta with auxiliary
/// true-positive estimate `psi` and equality multiplier `lambda`:
///
/// ```text
/// L = loss_neg / psi + lambda * loss_pos + (beta^2 / psi - lambda) * n_pos + psi * lambda
/// ```
///
/// On the constraint `psi = n_pos - loss_pos` this equals
/// `(1 + beta^2) / F_surrogate - 1`.
pub fn fbeta_psi_lagrangian(
    scorer: &ThresholdedScorer,
    psi: f64,
    lambda: f64,
    data: &LabeledDataset,
    beta: f64,
) -> Result<SaddleEvaluation> {
    fbeta_psi_lagrangian_on(scorer, psi, lambda, &Sample::full(data), beta)
}

pub fn fbeta_psi_lagrangian_on(
    scorer: &ThresholdedScorer,
    psi: f64,
    lambda: f64,
    sample: &Sample<'_>,
    beta: f64,
) -> Result<SaddleEvaluation> {
    if !(psi > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "auxiliary true-positive estimate {psi} must be > 0"
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} must be > 0")));
    }
    scorer.check_dim(sample.data())?;
    if scorer.num_thresholds() != 1 {
        return Err(Error::InvalidArgument("F-beta uses a single threshold".into()));
    }
    let b2 = beta * beta;
    let n_pos = sample.data().n_pos() as f64;
    let losses = anchor_losses(scorer, sample);
    let l = &losses[0];
    let dual = l.loss_pos - n_pos + psi;
    let mut eval = SaddleEvaluation::assemble(
        scorer.dim(),
        &losses,
        &[lambda],
        &[1.0 / psi],
        (b2 / psi - lambda) * n_pos + psi * lambda,
        vec![dual],
    );
    eval.grad_tp_estimate = Some(-(l.loss_neg + b2 * n_pos) / (psi * psi) + lambda);
    Ok(eval)
}

/// Evaluates the Lagrangian selected by `objective` at `state` on `sample`.
pub fn evaluate(state: &SaddleState, objective: &ObjectiveSpec, sample: &Sample<'_>) -> Result<SaddleEvaluation> {
    match objective.kind {
        ObjectiveKind::RecallAtPrecision => rap_lagrangian_on(state, objective.target, sample),
        ObjectiveKind::PrecisionAtRecall => par_lagrangian_on(state, objective.target, sample),
        ObjectiveKind::Aucpr => aucpr_lagrangian_on(state, &objective.anchor_weights()?, sample),
        ObjectiveKind::Aucroc => aucroc_lagrangian_on(state, &objective.anchor_weights()?, sample),
        ObjectiveKind::FBeta => {
            let psi = state.tp_estimate.ok_or_else(|| {
                Error::InvalidArgument("F-beta state lacks a true-positive estimate".into())
            })?;
            let lambda = *state
                .duals
                .first()
                .ok_or_else(|| Error::InvalidArgument("F-beta state lacks a multiplier".into()))?;
            fbeta_psi_lagrangian_on(&state.scorer, psi, lambda, sample, objective.target)
        }
        ObjectiveKind::Hinge => hinge_objective_on(&state.scorer, sample),
    }
}
