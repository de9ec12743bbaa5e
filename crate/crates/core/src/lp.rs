//! Linear programs in row form, solved with `microlp`.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c·x` subject to linear rows, with `x_j >= 0` unless variable
/// `j` is marked free.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub free: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// simplex iterations reported by the solver
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            free: vec![false; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Adds a row given as sparse `(variable, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, v) in terms {
            coeffs[j] += v;
        }
        self.add(coeffs, relation, rhs);
    }

    /// Largest violation of any row or sign restriction at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            if !self.free[j] {
                worst = worst.max(-v);
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        // free variables enter as a difference of two non-negative ones;
        // microlp's own unbounded-below domains misreport some small
        // bounded programs as unbounded
        let vars: Vec<(Variable, Option<Variable>)> = self
            .objective
            .iter()
            .zip(&self.free)
            .map(|(&c, &free)| {
                let plus = problem.add_var(c, (0.0, f64::INFINITY));
                let minus = free.then(|| problem.add_var(-c, (0.0, f64::INFINITY)));
                (plus, minus)
            })
            .collect();
        for c in &self.constraints {
            let mut terms = Vec::new();
            for (j, &a) in c.coeffs.iter().enumerate() {
                if a != 0.0 {
                    terms.push((vars[j].0, a));
                    if let Some(minus) = vars[j].1 {
                        terms.push((minus, -a));
                    }
                }
            }
            let op = match c.relation {
                Relation::Le => ComparisonOp::Le,
                Relation::Ge => ComparisonOp::Ge,
                Relation::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(terms.as_slice(), op, c.rhs);
        }
        let solution = match problem.solve() {
            Ok(SolveOutcome::Solution(s)) => s,
            Ok(SolveOutcome::Interrupted(_)) => return Err(Error::Solver("solve interrupted".into())),
            Err(microlp::Error::Infeasible) => return Err(Error::Infeasible),
            Err(microlp::Error::Unbounded) => return Err(Error::Unbounded),
            Err(e) => return Err(Error::Solver(e.to_string())),
        };
        let x: Vec<f64> = vars
            .iter()
            .map(|&(plus, minus)| {
                solution.var_value_raw(plus) - minus.map_or(0.0, |m| solution.var_value_raw(m))
            })
            .collect();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: solution.stats().lp_iterations as usize,
        })
    }
}
