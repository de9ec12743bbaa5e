use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rankopt::bounds::{compute_bounds, surrogate_precision, surrogate_recall};
use rankopt::metrics::{exact_fbeta, ScoredSet};
use rankopt::objectives::{
    aucpr_lagrangian, fbeta_surrogate, rap_constraint_residual, rap_lagrangian, AnchorWeights, Sample,
};
use rankopt::optimizer::{sgd_step, TrainConfig};
use rankopt::{Label, LabeledDataset, LabeledExample, ObjectiveSpec, SaddleState, ThresholdedScorer};

fn dataset(seed: u64, n: usize, d: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let label = match i {
                0 => Label::Positive,
                1 => Label::Negative,
                _ if rng.random_bool(0.4) => Label::Positive,
                _ => Label::Negative,
            };
            let x = (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal) + 0.7 * label.sign())
                .collect();
            LabeledExample::new(x, label)
        })
        .collect();
    LabeledDataset::new(examples).unwrap()
}

fn scorer(seed: u64, d: usize, k: usize, scale: f64) -> ThresholdedScorer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut draw = || rng.sample::<f64, _>(StandardNormal);
    let weights = (0..d).map(|_| scale * draw()).collect();
    let bias = draw();
    let thresholds = (0..k).map(|_| draw()).collect();
    ThresholdedScorer::new(weights, bias, thresholds).unwrap()
}

fn state(s: ThresholdedScorer, duals: Vec<f64>) -> SaddleState {
    SaddleState { scorer: s, duals, tp_estimate: None, step: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bounds_dominate_counts(seed in any::<u64>(), n in 2usize..80, d in 1usize..6, scale in 0.01f64..20.0) {
        let data = dataset(seed, n, d);
        let s = scorer(seed, d, 1, scale);
        let b = compute_bounds(&s, 0, &data).unwrap();
        let c = ScoredSet::from_scorer(&s, &data).unwrap().confusion_at(s.thresholds[0]);
        prop_assert!(b.tp_lb <= c.tp as f64 + 1e-12);
        prop_assert!(b.fp_ub >= c.fp as f64 - 1e-12);
        prop_assert!(surrogate_recall(&b, data.n_pos()) <= c.recall() + 1e-12);
    }

    #[test]
    fn surrogates_never_exceed_exact_metrics(seed in any::<u64>(), n in 2usize..80, d in 1usize..6, beta in 0.25f64..4.0) {
        let data = dataset(seed, n, d);
        let s = scorer(seed, d, 1, 3.0);
        let b = compute_bounds(&s, 0, &data).unwrap();
        let c = ScoredSet::from_scorer(&s, &data).unwrap().confusion_at(s.thresholds[0]);
        if b.tp_lb > 0.0 {
            prop_assert!(surrogate_precision(&b).unwrap() <= c.precision() + 1e-12);
            let f = fbeta_surrogate(&b, data.n_pos(), beta).unwrap();
            prop_assert!(f <= exact_fbeta(c.tp, c.fp, c.fn_, beta) + 1e-12);
        }
    }

    #[test]
    fn lagrangian_is_affine_in_the_duals(seed in any::<u64>(), n in 2usize..50, l1 in 0.0f64..10.0, l2 in 0.0f64..10.0) {
        let data = dataset(seed, n, 2);
        let anchors = AnchorWeights::from_anchors(&[0.2, 0.5, 0.8]).unwrap();
        let s = scorer(seed, 2, 2, 1.0);
        let value = |l: f64| aucpr_lagrangian(&state(s.clone(), vec![l, 2.0 * l]), &anchors, &data).unwrap().value;
        let mid = value(0.5 * (l1 + l2));
        let avg = 0.5 * (value(l1) + value(l2));
        prop_assert!((mid - avg).abs() <= 1e-9 * avg.abs().max(1.0));
    }

    #[test]
    fn lagrangian_is_convex_in_the_scorer(seed in any::<u64>(), n in 2usize..50, d in 1usize..5, lambda in 0.0f64..10.0, alpha in 0.1f64..0.95) {
        let data = dataset(seed, n, d);
        let a = scorer(seed, d, 1, 2.0);
        let b = scorer(seed.wrapping_add(1), d, 1, 2.0);
        let mix = ThresholdedScorer::new(
            a.weights.iter().zip(&b.weights).map(|(x, y)| 0.5 * (x + y)).collect(),
            0.5 * (a.bias + b.bias),
            vec![0.5 * (a.thresholds[0] + b.thresholds[0])],
        ).unwrap();
        let value = |s: &ThresholdedScorer| rap_lagrangian(&state(s.clone(), vec![lambda]), alpha, &data).unwrap().value;
        prop_assert!(value(&mix) <= 0.5 * (value(&a) + value(&b)) + 1e-9);
    }

    #[test]
    fn dual_gradient_has_the_sign_of_the_residual(seed in any::<u64>(), n in 2usize..50, lambda in 0.0f64..5.0, alpha in 0.1f64..0.95) {
        let data = dataset(seed, n, 3);
        let s = scorer(seed, 3, 1, 1.5);
        let grad = rap_lagrangian(&state(s.clone(), vec![lambda]), alpha, &data).unwrap().grad_duals[0];
        let residual = rap_constraint_residual(&s, alpha, &data).unwrap();
        prop_assert!((grad * (1.0 - alpha) - residual).abs() <= 1e-9 * residual.abs().max(1.0));
    }

    #[test]
    fn shifting_bias_and_thresholds_together_changes_nothing(seed in any::<u64>(), n in 2usize..50, shift in -5.0f64..5.0) {
        let data = dataset(seed, n, 2);
        let anchors = AnchorWeights::from_anchors(&[0.2, 0.5, 0.8]).unwrap();
        let s = scorer(seed, 2, 2, 1.0);
        let moved = ThresholdedScorer::new(
            s.weights.clone(),
            s.bias + shift,
            s.thresholds.iter().map(|t| t + shift).collect(),
        ).unwrap();
        let base = aucpr_lagrangian(&state(s, vec![1.0, 0.5]), &anchors, &data).unwrap().value;
        let shifted = aucpr_lagrangian(&state(moved, vec![1.0, 0.5]), &anchors, &data).unwrap().value;
        prop_assert!((base - shifted).abs() <= 1e-9 * base.abs().max(1.0));
    }

    #[test]
    fn duals_stay_nonnegative(seed in any::<u64>(), n in 4usize..60, lr_dual in 0.001f64..100.0, start in 0.0f64..3.0, steps in 1usize..20) {
        let data = dataset(seed, n, 2);
        let cfg = TrainConfig { lr_dual, ..TrainConfig::default() };
        let objectives = [
            ObjectiveSpec::recall_at_precision(0.8, data.prior()).unwrap(),
            ObjectiveSpec::precision_at_recall(0.9).unwrap(),
            ObjectiveSpec::aucpr(4, data.prior(), None, 0.05).unwrap(),
            ObjectiveSpec::aucroc(4, None, 0.05).unwrap(),
            ObjectiveSpec::fbeta(1.0).unwrap(),
        ];
        for objective in &objectives {
            let mut st = SaddleState::init(2, objective, &data);
            st.duals.iter_mut().for_each(|l| *l = start);
            for _ in 0..steps {
                st = sgd_step(&st, &Sample::full(&data), objective, &cfg).unwrap();
                prop_assert!(st.duals.iter().all(|&l| l >= 0.0 && l.is_finite()));
                if let Some(psi) = st.tp_estimate {
                    prop_assert!(psi > 0.0 && psi <= data.n_pos() as f64);
                }
            }
        }
    }
}
