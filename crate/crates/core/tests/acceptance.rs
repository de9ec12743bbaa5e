//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test --test acceptance -- --nocapture --test-threads 1` to see them
//! in order.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rankopt::bounds::compute_bounds;
use rankopt::duality::{rap_duality_gap, GapOptions};
use rankopt::fbeta_lp::train_f1_lp;
use rankopt::metrics::ScoredSet;
use rankopt::objectives::{
    aucpr_lagrangian, aucroc_lagrangian, c_weight, fbeta_psi_lagrangian, fbeta_surrogate, par_lagrangian,
    rap_constraint_residual, rap_lagrangian, weighted_hinge_objective, AnchorWeights, SaddleEvaluation,
};
use rankopt::optimizer::{averaged_duals, averaged_iterate, train, TrainConfig};
use rankopt::synthetic::{gaussian_pair, generate, SyntheticSpec};
use rankopt::{Label, LabeledDataset, LabeledExample, ObjectiveSpec, SaddleState, ThresholdedScorer};

fn verdict(id: &str, name: &str, pass: bool, detail: String) {
    println!("criterion {id:<3} {name:<40} {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Random dataset of `n` points in `d` dimensions with both classes present.
fn random_dataset<R: Rng>(rng: &mut R, n: usize, d: usize) -> LabeledDataset {
    let pos_frac: f64 = rng.random_range(0.1..0.9);
    let shift: f64 = rng.random_range(0.0..2.0);
    let examples = (0..n)
        .map(|i| {
            let label = match i {
                0 => Label::Positive,
                1 => Label::Negative,
                _ if rng.random_bool(pos_frac) => Label::Positive,
                _ => Label::Negative,
            };
            let x = (0..d).map(|_| normal(rng) + label.sign() * shift).collect();
            LabeledExample::new(x, label)
        })
        .collect();
    LabeledDataset::new(examples).unwrap()
}

fn random_scorer<R: Rng>(rng: &mut R, d: usize, k: usize, scale: f64) -> ThresholdedScorer {
    ThresholdedScorer::new(
        (0..d).map(|_| scale * normal(rng)).collect(),
        normal(rng),
        (0..k).map(|_| normal(rng)).collect(),
    )
    .unwrap()
}

#[test]
fn c1_bound_dominance() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=200);
        let d = rng.random_range(1..=10);
        let data = random_dataset(&mut rng, n, d);
        let scale = rng.random_range(0.01..10.0);
        let scorer = random_scorer(&mut rng, d, 1, scale);
        let b = compute_bounds(&scorer, 0, &data).unwrap();
        let c = ScoredSet::from_scorer(&scorer, &data).unwrap().confusion_at(scorer.thresholds[0]);
        if b.tp_lb > c.tp as f64 || b.fp_ub < c.fp as f64 {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "1",
        "bound dominance",
        violations == 0 && secs < 5.0,
        format!("{violations} violations in 1000 pairs, {secs:.2}s"),
    );
}

#[test]
fn c2_feasibility_implies_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut feasible = [0usize; 3];
    let mut violations = 0;
    for (slot, alpha) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        let mut attempts = 0;
        while feasible[slot] < 1000 {
            attempts += 1;
            assert!(attempts < 1_000_000, "could not sample feasible scorers at alpha {alpha}");
            let n = rng.random_range(4..=100);
            let d = rng.random_range(1..=5);
            let data = random_dataset(&mut rng, n, d);
            // point the scorer roughly along the class shift so feasibility is common
            let scale = rng.random_range(0.5..20.0);
            let mut scorer = random_scorer(&mut rng, d, 1, 0.3 * scale);
            scorer.weights.iter_mut().for_each(|w| *w += scale);
            scorer.thresholds[0] = rng.random_range(-2.0..4.0) * scale;
            if rap_constraint_residual(&scorer, alpha, &data).unwrap() > 0.0 {
                continue;
            }
            feasible[slot] += 1;
            let c = ScoredSet::from_scorer(&scorer, &data).unwrap().confusion_at(scorer.thresholds[0]);
            if c.precision() < alpha {
                violations += 1;
            }
        }
    }
    verdict(
        "2",
        "feasible residual implies precision",
        violations == 0,
        format!("{violations} violations over {feasible:?} feasible samples at alpha 0.5/0.7/0.9"),
    );
}

/// Gradient check helpers: a flat view over every differentiable coordinate.
#[derive(Clone)]
struct Point {
    state: SaddleState,
}

impl Point {
    fn coords(&self) -> usize {
        let s = &self.state;
        s.scorer.dim() + 1 + s.scorer.num_thresholds() + s.duals.len() + usize::from(s.tp_estimate.is_some())
    }

    fn nudge(&mut self, i: usize, h: f64) {
        let s = &mut self.state;
        let d = s.scorer.dim();
        let k = s.scorer.num_thresholds();
        let m = s.duals.len();
        match i {
            i if i < d => s.scorer.weights[i] += h,
            i if i == d => s.scorer.bias += h,
            i if i < d + 1 + k => s.scorer.thresholds[i - d - 1] += h,
            i if i < d + 1 + k + m => s.duals[i - d - 1 - k] += h,
            _ => *s.tp_estimate.as_mut().unwrap() += h,
        }
    }

    fn analytic(e: &SaddleEvaluation) -> Vec<f64> {
        let mut g = e.grad_weights.clone();
        g.push(e.grad_bias);
        g.extend(&e.grad_thresholds);
        g.extend(&e.grad_duals);
        g.extend(e.grad_tp_estimate);
        g
    }
}

/// Smallest distance of any margin to the hinge kink.
fn kink_distance(scorer: &ThresholdedScorer, data: &LabeledDataset) -> f64 {
    let mut best = f64::INFINITY;
    for e in data.examples() {
        let s = scorer.score(&e.features).unwrap();
        for &t in &scorer.thresholds {
            best = best.min((e.label.sign() * (s - t) - 1.0).abs());
        }
    }
    best
}

#[test]
fn c3_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let kinds = ["R@P", "P@R", "AUCPR K=1", "AUCPR K=5", "AUCROC", "psi-form"];
    for kind in kinds {
        let mut points = 0;
        while points < 100 {
            let n = rng.random_range(4..=40);
            let d = rng.random_range(1..=5);
            let data = random_dataset(&mut rng, n, d);
            let (k, anchors) = match kind {
                "AUCPR K=1" => (1, AnchorWeights::from_anchors(&[0.3, 0.7]).unwrap()),
                "AUCPR K=5" => (5, AnchorWeights::from_anchors(&[0.2, 0.35, 0.5, 0.65, 0.8, 0.9]).unwrap()),
                "AUCROC" => (4, AnchorWeights::from_anchors(&[0.0, 0.1, 0.3, 0.6, 0.9]).unwrap()),
                _ => (1, AnchorWeights::from_anchors(&[0.0, 0.5]).unwrap()),
            };
            let scorer = random_scorer(&mut rng, d, k, 1.0);
            if kink_distance(&scorer, &data) < 1e-3 {
                continue;
            }
            let duals: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..5.0)).collect();
            let psi = rng.random_range(0.2..1.0) * data.n_pos() as f64;
            let state = SaddleState {
                scorer,
                duals,
                tp_estimate: (kind == "psi-form").then_some(psi),
                step: 0,
            };
            let alpha = rng.random_range(0.3..0.95);
            let beta = rng.random_range(0.3..1.0);
            let eval = |p: &SaddleState| -> SaddleEvaluation {
                match kind {
                    "R@P" => rap_lagrangian(p, alpha, &data),
                    "P@R" => par_lagrangian(p, beta, &data),
                    "AUCPR K=1" | "AUCPR K=5" => aucpr_lagrangian(p, &anchors, &data),
                    "AUCROC" => aucroc_lagrangian(p, &anchors, &data),
                    _ => fbeta_psi_lagrangian(&p.scorer, p.tp_estimate.unwrap(), p.duals[0], &data, beta + 0.5),
                }
                .unwrap()
            };
            let point = Point { state };
            let grad = Point::analytic(&eval(&point.state));
            assert_eq!(grad.len(), point.coords());
            for (i, g) in grad.iter().enumerate() {
                let (mut up, mut down) = (point.clone(), point.clone());
                up.nudge(i, h);
                down.nudge(i, -h);
                let fd = (eval(&up.state).value - eval(&down.state).value) / (2.0 * h);
                let err = (g - fd).abs();
                let rel = if err <= 1e-9 { 0.0 } else { err / g.abs().max(fd.abs()) };
                worst = worst.max(rel);
                checked += 1;
            }
            points += 1;
        }
    }
    verdict(
        "3",
        "analytic vs finite-difference gradients",
        worst <= 1e-4,
        format!("worst relative error {worst:.2e} over {checked} coordinates, 6 Lagrangians x 100 points"),
    );
}

#[test]
fn c4_weighted_svm_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for lambda in [0.5, 1.0, 2.0] {
        for alpha in [0.5, 0.9] {
            for _ in 0..50 {
                let n = rng.random_range(2..=60);
                let d = rng.random_range(1..=6);
                let data = random_dataset(&mut rng, n, d);
                let state = SaddleState {
                    scorer: random_scorer(&mut rng, d, 1, 2.0),
                    duals: vec![lambda],
                    tp_estimate: None,
                    step: 0,
                };
                let lagrangian = rap_lagrangian(&state, alpha, &data).unwrap().value;
                let c = c_weight(alpha, lambda).unwrap();
                let weighted = weighted_hinge_objective(&state.scorer, &data, c).unwrap();
                let constant = -lambda * data.n_pos() as f64;
                let rebuilt = lambda * alpha / (1.0 - alpha) * weighted + constant;
                worst = worst.max((lagrangian - rebuilt).abs() / lagrangian.abs().max(1.0));
            }
        }
    }
    verdict(
        "4",
        "weighted-SVM equivalence",
        worst <= 1e-9,
        format!("worst relative difference {worst:.2e}"),
    );
}

#[test]
fn c5_precision_at_high_recall_beats_hinge_baseline() {
    let start = Instant::now();
    let cfg = TrainConfig {
        steps: 4000,
        batch_size: usize::MAX,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let par = ObjectiveSpec::precision_at_recall(0.95).unwrap();
    let mut gaps = Vec::new();
    let mut pairs = Vec::new();
    for seed in 0..10u64 {
        let train_data = generate(&SyntheticSpec { seed, ..SyntheticSpec::default() }).unwrap();
        let test_data = generate(&SyntheticSpec { seed: seed + 1000, ..SyntheticSpec::default() }).unwrap();
        let baseline = train(&train_data, &ObjectiveSpec::hinge(), &cfg, None).unwrap();
        let trained = train(&train_data, &par, &cfg, None).unwrap();
        let precision = |s: &ThresholdedScorer| {
            ScoredSet::from_scorer(s, &test_data).unwrap().exact_precision_at_recall(0.95).0
        };
        let (b, p) = (precision(baseline.scorer()), precision(trained.scorer()));
        pairs.push(format!("{b:.3}->{p:.3}"));
        gaps.push(p - b);
    }
    gaps.sort_by(f64::total_cmp);
    let median = 0.5 * (gaps[4] + gaps[5]);
    let secs = start.elapsed().as_secs_f64();
    println!("    precision at recall 0.95, baseline->P@R per seed: {}", pairs.join(" "));
    verdict(
        "5",
        "P@R(0.95) beats hinge baseline",
        median >= 0.05 && secs < 120.0,
        format!("median gain {:.1} points over 10 seeds, {secs:.1}s", 100.0 * median),
    );
}

#[test]
fn c6_aucpr_anchor_robustness() {
    let train_data = generate(&SyntheticSpec { seed: 3, ..SyntheticSpec::default() }).unwrap();
    let test_data = generate(&SyntheticSpec { seed: 1003, ..SyntheticSpec::default() }).unwrap();
    let cfg = TrainConfig {
        steps: 3000,
        batch_size: usize::MAX,
        eval_every: 0,
        ..TrainConfig::default()
    };
    let mut aps = Vec::new();
    let mut effective = Vec::new();
    for k in [5, 10, 20] {
        let objective = ObjectiveSpec::aucpr(k, train_data.prior(), None, 0.05).unwrap();
        // anchors above the precision cap collapse, so large K may keep fewer
        effective.push(objective.num_thresholds());
        let out = train(&train_data, &objective, &cfg, None).unwrap();
        aps.push(ScoredSet::from_scorer(out.scorer(), &test_data).unwrap().average_precision());
    }
    let spread = aps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - aps.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        "6",
        "AUCPR anchor-count robustness",
        spread <= 0.02,
        format!(
            "test AP for K=5/10/20: {:.4}/{:.4}/{:.4}, spread {spread:.4}, distinct anchors {effective:?}",
            aps[0], aps[1], aps[2]
        ),
    );
}

/// Surrogate F1 at `(w, b)` with threshold 0, or -inf where undefined.
fn surrogate_f1(params: &[f64], data: &LabeledDataset) -> f64 {
    let d = data.dim();
    let scorer = ThresholdedScorer::new(params[..d].to_vec(), params[d], vec![0.0]).unwrap();
    let b = compute_bounds(&scorer, 0, data).unwrap();
    fbeta_surrogate(&b, data.n_pos(), 1.0).unwrap_or(f64::NEG_INFINITY)
}

/// Coarse-to-fine grid search: evaluate a grid over a box, keep the best
/// few cells and re-grid around each at a third of the width. Restarted
/// over several box radii because the optimum may need large weights.
fn grid_max_surrogate_f1(data: &LabeledDataset) -> f64 {
    let dims = data.dim() + 1;
    let per_axis: usize = if dims == 3 { 21 } else { 41 };
    let keep = 8;
    let mut best = f64::NEG_INFINITY;
    for radius in [1.0, 10.0, 100.0, 1000.0] {
        let mut centers = vec![vec![0.0; dims]];
        let mut half = radius;
        for _ in 0..40 {
            let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
            for c in &centers {
                let total = per_axis.pow(dims as u32);
                for idx in 0..total {
                    let mut rest = idx;
                    let p: Vec<f64> = (0..dims)
                        .map(|k| {
                            let i = rest % per_axis;
                            rest /= per_axis;
                            c[k] - half + 2.0 * half * i as f64 / (per_axis - 1) as f64
                        })
                        .collect();
                    scored.push((surrogate_f1(&p, data), p));
                }
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            best = best.max(scored[0].0);
            centers = scored.into_iter().take(keep).map(|(_, p)| p).collect();
            half /= 3.0;
        }
    }
    best
}

#[test]
fn c7_lp_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut max_violation = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=2);
        let data = random_dataset(&mut rng, n, d);
        let (scorer, sol) = train_f1_lp(&data).unwrap();
        let lp_value = sol.surrogate_f1();
        // the recovered scorer attains the LP value
        let b = compute_bounds(&scorer, 0, &data).unwrap();
        let attained = fbeta_surrogate(&b, data.n_pos(), 1.0).unwrap();
        max_violation = max_violation.max((attained - lp_value).abs());
        let grid = grid_max_surrogate_f1(&data);
        worst = worst.max((lp_value - grid).abs());
    }
    verdict(
        "7",
        "F1 linear program vs grid search",
        worst <= 1e-3 && max_violation <= 1e-9,
        format!("worst |LP - grid| {worst:.2e}, worst |LP - recovered scorer| {max_violation:.2e}"),
    );
}

fn random_scored_set<R: Rng>(rng: &mut R, n: usize) -> ScoredSet {
    let labels: Vec<Label> = (0..n)
        .map(|i| if i == 0 || rng.random_bool(0.4) { Label::Positive } else { Label::Negative })
        .collect();
    let scores: Vec<f64> = labels.iter().map(|l| normal(rng) + 0.8 * l.sign()).collect();
    ScoredSet::new(&scores, &labels).unwrap()
}

/// Midpoint Riemann sum of the exact recall-at-precision curve over a
/// 1e-3 grid of precision targets.
fn riemann_rap(set: &ScoredSet) -> f64 {
    let step = 1e-3;
    (0..1000)
        .map(|i| set.exact_recall_at_precision((i as f64 + 0.5) * step).0 * step)
        .sum()
}

#[test]
fn c8a_average_precision_vs_riemann_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut worst_interpolated = 0.0f64;
    for _ in 0..200 {
        let set = random_scored_set(&mut rng, 50);
        let riemann = riemann_rap(&set);
        worst = worst.max((set.average_precision() - riemann).abs());
        worst_interpolated = worst_interpolated.max((set.interpolated_average_precision() - riemann).abs());
    }
    println!(
        "    interpolated average precision vs the same sum: worst difference {worst_interpolated:.2e}"
    );
    verdict(
        "8a",
        "average precision vs Riemann sum of R@P",
        worst <= 2e-3,
        format!("worst |AP - sum| {worst:.2e} over 200 random 50-point sets"),
    );
}

#[test]
fn c8b_auc_roc_monotone_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let mut mismatches = 0;
    let transforms: [fn(f64) -> f64; 4] = [|s| 3.0 * s + 7.0, f64::exp, |s| s * s * s, f64::atan];
    for _ in 0..200 {
        let labels: Vec<Label> = (0..50)
            .map(|i| if i % 3 == 0 { Label::Positive } else { Label::Negative })
            .collect();
        // a coarse grid produces ties, which must be preserved by the transforms
        let scores: Vec<f64> = (0..50).map(|_| (normal(&mut rng) * 4.0).round() / 4.0).collect();
        let base = ScoredSet::new(&scores, &labels).unwrap().auc_roc();
        for f in transforms {
            let moved: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
            if ScoredSet::new(&moved, &labels).unwrap().auc_roc() != base {
                mismatches += 1;
            }
        }
    }
    verdict(
        "8b",
        "AUCROC invariant under monotone maps",
        mismatches == 0,
        format!("{mismatches} mismatches over 200 sets x 4 transforms"),
    );
}

#[test]
fn c9_saddle_convergence() {
    let data = gaussian_pair(60, 140, 2, 1.0, 7).unwrap();
    let alpha = 0.7;
    let opts = GapOptions::default();
    let objective = ObjectiveSpec::recall_at_precision(alpha, data.prior()).unwrap();
    let init = SaddleState::init(data.dim(), &objective, &data);
    let initial = rap_duality_gap(&init.scorer, init.duals[0], alpha, &data, &opts).unwrap();
    let cfg = TrainConfig {
        steps: 10_000,
        batch_size: usize::MAX,
        lr_primal: 1.0,
        lr_dual: 1.0,
        l2_reg: opts.l2_reg,
        eval_every: 10,
        ..TrainConfig::default()
    };
    let out = train(&data, &objective, &cfg, None).unwrap();
    let scorer = averaged_iterate(&out.trace).unwrap();
    let lambda = averaged_duals(&out.trace).unwrap()[0];
    let fin = rap_duality_gap(&scorer, lambda, alpha, &data, &opts).unwrap();
    let reduction = 1.0 - fin.gap / initial.gap;
    verdict(
        "9",
        "saddle duality-gap reduction",
        reduction >= 0.99,
        format!(
            "gap {:.3e} -> {:.3e} ({:.4}% reduction), averaged multiplier {lambda:.4}",
            initial.gap,
            fin.gap,
            100.0 * reduction
        ),
    );
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rankopt")).args(args).output().unwrap()
}

#[test]
fn c10_train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let data = p("d.csv");
    let out = run_cli(&["generate", "--n-pos", "120", "--n-neg", "280", "--seed", "5", "--out", &data]);
    assert!(out.status.success());
    let config = p("c.json");
    std::fs::write(&config, r#"{"steps": 300, "batch_size": 32, "eval_every": 50}"#).unwrap();
    let mut identical = 0;
    let runs: [&[&str]; 6] = [
        &["--objective", "rap", "--alpha", "0.8"],
        &["--objective", "par", "--beta", "0.9"],
        &["--objective", "aucpr", "--anchors", "5"],
        &["--objective", "aucroc", "--anchors", "5"],
        &["--objective", "fbeta", "--beta", "1"],
        &["--objective", "hinge"],
    ];
    for (i, extra) in runs.iter().enumerate() {
        let model = |r: usize| p(&format!("m{i}_{r}.json"));
        for r in 0..2 {
            let m = model(r);
            let mut args = vec!["train", "--data", &data, "--config", &config, "--seed", "11", "--out", &m, "--report", "/dev/null"];
            args.extend_from_slice(extra);
            let out = run_cli(&args);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
        if std::fs::read(model(0)).unwrap() == std::fs::read(model(1)).unwrap() {
            identical += 1;
        }
    }
    verdict(
        "10",
        "train determinism",
        identical == runs.len() && Path::new(&p("m0_0.json")).exists(),
        format!("{identical}/{} objectives produced bit-identical model files", runs.len()),
    );
}
