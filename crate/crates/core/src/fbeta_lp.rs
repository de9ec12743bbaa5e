//! Linear-fractional reformulation of surrogate F1 maximization.
//!
//! Maximizing the surrogate F1 of a linear scorer is a linear-fractional
//! program in `(w, t, f)`; the change of variables `omega = eps * w`,
//! `tau = eps * t`, `phi = eps * f`, `eps = 1 / sum(t)` turns it into
//!
//! ```text
//! minimize   n_pos * eps + sum(tau) + sum(phi)
//! subject to tau_i <= eps,  tau_i <= omega · x_i        (positives)
//!            phi_j >= 0,    phi_j >= eps + omega · x_j  (negatives)
//!            sum(tau) = 1,  eps >= 0
//! ```
//!
//! The bias is absorbed as a constant-1 feature, so `omega` has `d + 1`
//! coordinates. The optimal value equals `2 / F1_surrogate` at the recovered
//! scorer `w = omega / eps`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{LabeledDataset, ThresholdedScorer};
use crate::lp::{LinearProgram, LpSolution, Relation};

#[derive(Debug, Clone, PartialEq)]
pub struct FBetaLp {
    pub program: LinearProgram,
    pub n_pos: usize,
    pub n_neg: usize,
    /// feature dimension, excluding the bias coordinate
    pub dim: usize,
}

/// Optimal values split back into the named variable blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LpAssignment {
    pub tau: Vec<f64>,
    pub phi: Vec<f64>,
    /// weights followed by the bias coordinate
    pub omega: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FBetaLpSolution {
    pub assignment: LpAssignment,
    pub objective: f64,
    pub pivots: usize,
}

impl FBetaLpSolution {
    /// Surrogate F1 at the optimum, `2 / objective`.
    pub fn surrogate_f1(&self) -> f64 {
        2.0 / self.objective
    }
}

impl FBetaLp {
    pub fn num_vars(&self) -> usize {
        self.program.num_vars()
    }

    fn tau(&self, i: usize) -> usize {
        i
    }

    fn phi(&self, j: usize) -> usize {
        self.n_pos + j
    }

    fn omega(&self, k: usize) -> usize {
        self.n_pos + self.n_neg + k
    }

    fn epsilon(&self) -> usize {
        self.n_pos + self.n_neg + self.dim + 1
    }

    pub fn variable_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_vars());
        names.extend((0..self.n_pos).map(|i| format!("tau_{i}")));
        names.extend((0..self.n_neg).map(|j| format!("phi_{j}")));
        names.extend((0..self.dim).map(|k| format!("omega_{k}")));
        names.push("omega_bias".into());
        names.push("eps".into());
        names
    }

    fn split(&self, x: &[f64]) -> LpAssignment {
        LpAssignment {
            tau: x[..self.n_pos].to_vec(),
            phi: x[self.n_pos..self.n_pos + self.n_neg].to_vec(),
            omega: x[self.omega(0)..self.epsilon()].to_vec(),
            epsilon: x[self.epsilon()],
        }
    }

    /// Plain-text listing in CPLEX LP syntax, for cross-checking with an
    /// external solver.
    pub fn listing(&self) -> String {
        let names = self.variable_names();
        let terms = |coeffs: &[f64]| {
            let mut s = String::new();
            for (c, name) in coeffs.iter().zip(&names) {
                if *c != 0.0 {
                    let sign = if *c < 0.0 { "-" } else { "+" };
                    let _ = write!(s, " {sign} {} {name}", c.abs());
                }
            }
            if s.is_empty() {
                " 0".to_string()
            } else {
                s
            }
        };
        let mut out = String::new();
        let _ = writeln!(out, "Minimize\n obj:{}", terms(&self.program.objective));
        let _ = writeln!(out, "Subject To");
        for (r, c) in self.program.constraints.iter().enumerate() {
            let rel = match c.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " c{r}:{} {rel} {}", terms(&c.coeffs), c.rhs);
        }
        let _ = writeln!(out, "Bounds");
        for name in &names {
            let _ = writeln!(out, " {name} free");
        }
        out.push_str("End\n");
        out
    }
}

/// Builds the F1 linear program for `data`.
pub fn build_lp(data: &LabeledDataset) -> FBetaLp {
    let (pos, neg): (Vec<_>, Vec<_>) = data
        .examples()
        .iter()
        .partition(|e| e.label.is_positive());
    let pos: Vec<&[f64]> = pos.iter().map(|e| e.features.as_slice()).collect();
    let neg: Vec<&[f64]> = neg.iter().map(|e| e.features.as_slice()).collect();
    build_lp_from_rows(&pos, &neg, data.dim())
        .expect("dataset rows share one dimension and include a positive")
}

/// Builds the F1 linear program from raw positive and negative feature rows.
/// Negatives may be empty.
pub fn build_lp_from_rows(positives: &[&[f64]], negatives: &[&[f64]], dim: usize) -> Result<FBetaLp> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("the F1 program needs a positive example".into()));
    }
    if let Some(bad) = positives.iter().chain(negatives).find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let n_pos = positives.len();
    let n_neg = negatives.len();
    let num_vars = n_pos + n_neg + dim + 2;
    let mut lp = FBetaLp {
        program: LinearProgram::new(num_vars),
        n_pos,
        n_neg,
        dim,
    };
    lp.program.free = vec![true; num_vars];

    let eps = lp.epsilon();
    lp.program.objective[eps] = n_pos as f64;
    for i in 0..n_pos {
        let k = lp.tau(i);
        lp.program.objective[k] = 1.0;
    }
    for j in 0..n_neg {
        let k = lp.phi(j);
        lp.program.objective[k] = 1.0;
    }

    let omega_terms = |x: &[f64], sign: f64| -> Vec<(usize, f64)> {
        let mut t: Vec<(usize, f64)> = x
            .iter()
            .enumerate()
            .map(|(k, v)| (lp.omega(k), sign * v))
            .collect();
        t.push((lp.omega(dim), sign));
        t
    };
    let mut rows: Vec<(Vec<(usize, f64)>, Relation)> = Vec::new();
    for (i, x) in positives.iter().enumerate() {
        rows.push((vec![(lp.tau(i), 1.0), (eps, -1.0)], Relation::Le));
        let mut t = vec![(lp.tau(i), 1.0)];
        t.extend(omega_terms(x, -1.0));
        rows.push((t, Relation::Le));
    }
    for (j, x) in negatives.iter().enumerate() {
        rows.push((vec![(lp.phi(j), 1.0)], Relation::Ge));
        let mut t = vec![(lp.phi(j), 1.0), (eps, -1.0)];
        t.extend(omega_terms(x, -1.0));
        rows.push((t, Relation::Ge));
    }
    rows.push((vec![(eps, 1.0)], Relation::Ge));
    for (terms, rel) in rows {
        lp.program.add_sparse(&terms, rel, 0.0);
    }
    let sum_tau: Vec<(usize, f64)> = (0..n_pos).map(|i| (lp.tau(i), 1.0)).collect();
    lp.program.add_sparse(&sum_tau, Relation::Eq, 1.0);
    Ok(lp)
}

pub fn solve_lp(lp: &FBetaLp) -> Result<FBetaLpSolution> {
    let LpSolution { x, objective, pivots } = lp.program.solve()?;
    Ok(FBetaLpSolution {
        assignment: lp.split(&x),
        objective,
        pivots,
    })
}

/// Inverse variable mapping `w = omega / eps`; the bias coordinate becomes
/// the scorer bias and the single threshold is 0.
pub fn recover_scorer(assignment: &LpAssignment) -> Result<ThresholdedScorer> {
    let eps = assignment.epsilon;
    if !(eps > 0.0) {
        return Err(Error::Degenerate(
            "optimum has eps = 0; the scorer mapping w = omega / eps is undefined".into(),
        ));
    }
    let (bias, weights) = assignment
        .omega
        .split_last()
        .expect("omega always carries a bias coordinate");
    ThresholdedScorer::new(weights.iter().map(|v| v / eps).collect(), bias / eps, vec![0.0])
}

/// Builds, solves and maps back in one call.
pub fn train_f1_lp(data: &LabeledDataset) -> Result<(ThresholdedScorer, FBetaLpSolution)> {
    let lp = build_lp(data);
    let sol = solve_lp(&lp)?;
    Ok((recover_scorer(&sol.assignment)?, sol))
}
