//! Duality-gap estimate for the recall-at-precision saddle problem.
//!
//! Works on the normalized, regularized Lagrangian
//! `G(w, lambda) = L(w, lambda) / n + l2 / 2 * |weights|^2`
//! with the multiplier restricted to a box `[0, lambda_box]`. The gap at a
//! pair `(w, lambda)` is `max_l G(w, l) - min_v G(v, lambda)`:
//!
//! * `G` is affine in the multiplier, so the max is attained at an endpoint.
//! * For fixed `lambda` the min is a soft-margin SVM with per-class costs
//!   and an unregularized offset; it is bounded from below by any feasible
//!   point of its dual, found here by SMO. The reported gap is therefore an
//!   over-estimate that tightens as SMO converges.

use serde::{Deserialize, Serialize};

use crate::bounds::compute_bounds;
use crate::error::{Error, Result};
use crate::model::{LabeledDataset, ThresholdedScorer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// `max` of `G(w, .)` over the multiplier box.
    pub dual_side: f64,
    /// Lower bound on `min` of `G(., lambda)`.
    pub primal_side: f64,
    /// `dual_side - primal_side`.
    pub gap: f64,
    /// Primal value at the SMO solution; `primal_min_upper - primal_side`
    /// measures how tight the inner solve is.
    pub primal_min_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapOptions {
    pub l2_reg: f64,
    pub lambda_box: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            l2_reg: 1e-2,
            lambda_box: 10.0,
            tolerance: 1e-9,
            max_iter: 1_000_000,
        }
    }
}

/// Normalized regularized R@P Lagrangian at `(scorer, lambda)`.
pub fn normalized_rap_value(
    scorer: &ThresholdedScorer,
    lambda: f64,
    alpha: f64,
    data: &LabeledDataset,
    l2_reg: f64,
) -> Result<f64> {
    let b = compute_bounds(scorer, 0, data)?;
    let a = alpha / (1.0 - alpha);
    let n = data.len() as f64;
    let reg = 0.5 * l2_reg * scorer.weights.iter().map(|w| w * w).sum::<f64>();
    Ok(((1.0 + lambda) * b.loss_pos + lambda * (a * b.loss_neg - data.n_pos() as f64)) / n + reg)
}

pub fn rap_duality_gap(
    scorer: &ThresholdedScorer,
    lambda: f64,
    alpha: f64,
    data: &LabeledDataset,
    opts: &GapOptions,
) -> Result<GapEstimate> {
    if !(opts.l2_reg > 0.0) {
        return Err(Error::InvalidArgument("gap estimate needs l2_reg > 0".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} must lie in (0, 1)")));
    }
    if !(lambda >= 0.0 && lambda <= opts.lambda_box) {
        return Err(Error::InvalidArgument(format!(
            "multiplier {lambda} outside [0, {}]",
            opts.lambda_box
        )));
    }
    let at_zero = normalized_rap_value(scorer, 0.0, alpha, data, opts.l2_reg)?;
    let at_box = normalized_rap_value(scorer, opts.lambda_box, alpha, data, opts.l2_reg)?;
    let dual_side = at_zero.max(at_box);

    let a = alpha / (1.0 - alpha);
    let n = data.len() as f64;
    let costs: Vec<f64> = data
        .examples()
        .iter()
        .map(|e| if e.label.is_positive() { (1.0 + lambda) / n } else { lambda * a / n })
        .collect();
    let svm = WeightedSvm::new(data, costs, opts.l2_reg);
    let sol = svm.solve(opts.tolerance, opts.max_iter);
    let constant = -lambda * data.n_pos() as f64 / n;
    let primal_side = sol.dual_value + constant;
    let primal_min_upper = sol.primal_value + constant;
    Ok(GapEstimate {
        dual_side,
        primal_side,
        gap: dual_side - primal_side,
        primal_min_upper,
    })
}

/// `min l2/2 |w|^2 + sum_i c_i max(0, 1 - y_i (w.x_i + b))`, solved in its dual.
struct WeightedSvm {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    c: Vec<f64>,
    l2: f64,
    /// `y_i y_j <x_i, x_j> / l2`
    q: Vec<Vec<f64>>,
}

struct SvmSolution {
    dual_value: f64,
    primal_value: f64,
}

impl WeightedSvm {
    fn new(data: &LabeledDataset, c: Vec<f64>, l2: f64) -> Self {
        let x: Vec<Vec<f64>> = data.examples().iter().map(|e| e.features.clone()).collect();
        let y: Vec<f64> = data.examples().iter().map(|e| e.label.sign()).collect();
        let q = (0..x.len())
            .map(|i| {
                (0..x.len())
                    .map(|j| y[i] * y[j] * dot(&x[i], &x[j]) / l2)
                    .collect()
            })
            .collect();
        Self { x, y, c, l2, q }
    }

    fn solve(&self, tol: f64, max_iter: usize) -> SvmSolution {
        let m = self.x.len();
        let mut alpha = vec![0.0; m];
        // gradient of 1/2 a'Qa - sum(a)
        let mut grad = vec![-1.0; m];
        for _ in 0..max_iter {
            let Some((i, j)) = self.select_pair(&alpha, &grad, tol) else {
                break;
            };
            let (old_i, old_j) = (alpha[i], alpha[j]);
            self.update_pair(&mut alpha, &grad, i, j);
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for (k, g) in grad.iter_mut().enumerate() {
                *g += self.q[k][i] * di + self.q[k][j] * dj;
            }
        }
        let quad: f64 = (0..m).map(|i| alpha[i] * (grad[i] + 1.0)).sum();
        let dual_value = alpha.iter().sum::<f64>() - 0.5 * quad;
        let mut w = vec![0.0; self.x.first().map_or(0, Vec::len)];
        for ((a, y), x) in alpha.iter().zip(&self.y).zip(&self.x) {
            for (wk, xk) in w.iter_mut().zip(x) {
                *wk += a * y * xk / self.l2;
            }
        }
        SvmSolution {
            dual_value,
            primal_value: self.primal_at(&w),
        }
    }

    /// Maximal violating pair, or `None` once the KKT violation is below `tol`.
    fn select_pair(&self, alpha: &[f64], grad: &[f64], tol: f64) -> Option<(usize, usize)> {
        let (mut up, mut up_val) = (None, f64::NEG_INFINITY);
        let (mut low, mut low_val) = (None, f64::INFINITY);
        for k in 0..alpha.len() {
            let (y, a, c) = (self.y[k], alpha[k], self.c[k]);
            let v = -y * grad[k];
            let in_up = (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
            let in_low = (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);
            if in_up && v > up_val {
                up = Some(k);
                up_val = v;
            }
            if in_low && v < low_val {
                low = Some(k);
                low_val = v;
            }
        }
        match (up, low) {
            (Some(i), Some(j)) if up_val - low_val > tol => Some((i, j)),
            _ => None,
        }
    }

    fn update_pair(&self, alpha: &mut [f64], grad: &[f64], i: usize, j: usize) {
        let (ci, cj) = (self.c[i], self.c[j]);
        let (qii, qjj, qij) = (self.q[i][i], self.q[j][j], self.q[i][j]);
        let (mut ai, mut aj) = (alpha[i], alpha[j]);
        if self.y[i] != self.y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > ci - cj {
                if ai > ci {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if aj > cj {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > ci {
                if ai > ci {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > cj {
                if aj > cj {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
    }

    /// Primal objective at `w`, minimized exactly over the offset. The hinge
    /// sum is piecewise linear in the offset, so a breakpoint is optimal.
    fn primal_at(&self, w: &[f64]) -> f64 {
        let scores: Vec<f64> = self.x.iter().map(|x| dot(w, x)).collect();
        let reg = 0.5 * self.l2 * dot(w, w);
        let hinge = |b: f64| -> f64 {
            scores
                .iter()
                .zip(&self.y)
                .zip(&self.c)
                .map(|((s, y), c)| c * (1.0 - y * (s + b)).max(0.0))
                .sum()
        };
        let best = scores
            .iter()
            .zip(&self.y)
            .map(|(s, y)| hinge(y - s))
            .fold(f64::INFINITY, f64::min);
        reg + best
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
