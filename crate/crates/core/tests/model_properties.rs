use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sigsoftmax::rank::softmax_rank_bound;
use sigsoftmax::synthetic::{
    bigram_language, compare_activations, fit, generate_language, nll_and_gradients, per_context_kl, FactorModel,
};
use sigsoftmax::{
    mixture_forward, mixture_log_forward, mixture_priors, ActivationKind, MixtureKind, MixtureParams, Prng,
    RankReport, TrainConfig,
};

fn kind() -> impl Strategy<Value = ActivationKind> {
    prop::sample::select(ActivationKind::ALL.to_vec())
}

fn mixture_kind() -> impl Strategy<Value = MixtureKind> {
    prop::sample::select(vec![MixtureKind::Mos, MixtureKind::Moss])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixture_is_a_convex_combination(kind in mixture_kind(), seed in any::<u64>(), k in 1usize..5) {
        let mut prng = Prng::new(seed);
        let params = MixtureParams::random(&mut prng, k, 6, 4, 3);
        let hidden: Vec<f64> = (0..3).map(|_| prng.uniform_range(-3.0, 3.0)).collect();
        let priors = mixture_priors(kind, &params, &hidden).unwrap();
        prop_assert!((priors.iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        let components = sigsoftmax::mixture::mixture_components(kind, &params, &hidden).unwrap();
        let p = mixture_forward(kind, &params, &hidden).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 0..6 {
            let lo = components.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min);
            let hi = components.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p[i] >= lo - 1e-15 && p[i] <= hi + 1e-15);
        }
        let lp = mixture_log_forward(kind, &params, &hidden).unwrap();
        for (a, b) in p.iter().zip(lp.iter()) {
            prop_assert!((a - b.exp()).abs() <= 1e-12);
        }
    }

    #[test]
    fn rank_ignores_column_order_and_duplicates(seed in any::<u64>(), d in 1usize..4) {
        let mut prng = Prng::new(seed);
        let trial = sigsoftmax::RankTrial {
            kind: ActivationKind::Softmax,
            classes: 12,
            hidden: d,
            samples: 15,
            bias: false,
            seed,
        };
        let a = trial.log_outputs().unwrap().into_matrix();
        let base = RankReport::from_matrix(&a, d, false);

        let mut order: Vec<usize> = (0..a.ncols()).collect();
        for i in (1..order.len()).rev() {
            let j = (prng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let permuted = a.select_columns(&order);
        prop_assert_eq!(RankReport::from_matrix(&permuted, d, false).numerical_rank, base.numerical_rank);

        let mut with_copies: Vec<usize> = (0..a.ncols()).collect();
        with_copies.extend([0, 3, 3]);
        let duplicated = a.select_columns(&with_copies);
        prop_assert_eq!(RankReport::from_matrix(&duplicated, d, false).numerical_rank, base.numerical_rank);

        let transposed = RankReport::from_matrix(&a.transpose(), d, false);
        prop_assert_eq!(transposed.numerical_rank, base.numerical_rank);
        prop_assert!(base.numerical_rank <= softmax_rank_bound(d, false));
    }

    #[test]
    fn kl_and_cross_entropy_bounds(kind in kind(), seed in any::<u64>(), bias in any::<bool>()) {
        let lang = generate_language(6, 5, 3, 1.5, seed).unwrap();
        let model = FactorModel::initialize(kind, 6, 5, 2, bias, seed ^ 1).unwrap();
        let kl = per_context_kl(&model, &lang).unwrap();
        prop_assert!(kl.iter().all(|&v| v >= 0.0));
        let nll = nll_and_gradients(&model, &lang).unwrap().nll;
        let entropy = lang.mean_entropy();
        let mean_kl = kl.iter().sum::<f64>() / kl.len() as f64;
        prop_assert!(nll >= entropy - 1e-12);
        prop_assert!((nll - entropy - mean_kl).abs() <= 1e-10);
    }

    #[test]
    fn gradients_match_central_differences(kind in kind(), seed in any::<u64>(), bias in any::<bool>()) {
        let lang = generate_language(3, 4, 2, 1.0, seed).unwrap();
        let mut model = FactorModel::initialize(kind, 3, 4, 2, bias, seed.wrapping_add(9)).unwrap();
        if let Some(b) = model.bias.as_mut() {
            b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64 - 0.15);
        }
        if matches!(kind, ActivationKind::ReluBased { .. }) {
            // keep every logit away from the kink
            let logits = model.logits();
            prop_assume!(logits.iter().all(|v| v.abs() > 0.05));
        }
        let grads = nll_and_gradients(&model, &lang).unwrap();
        let step = 1e-6;
        let nll_at = |m: &FactorModel| nll_and_gradients(m, &lang).unwrap().nll;

        for idx in 0..model.hidden.len() {
            let mut plus = model.clone();
            plus.hidden[idx] += step;
            let mut minus = model.clone();
            minus.hidden[idx] -= step;
            let numeric = (nll_at(&plus) - nll_at(&minus)) / (2.0 * step);
            prop_assert!((numeric - grads.hidden[idx]).abs() <= 1e-6, "hidden {idx}");
        }
        for idx in 0..model.output.len() {
            let mut plus = model.clone();
            plus.output[idx] += step;
            let mut minus = model.clone();
            minus.output[idx] -= step;
            let numeric = (nll_at(&plus) - nll_at(&minus)) / (2.0 * step);
            prop_assert!((numeric - grads.output[idx]).abs() <= 1e-6, "output {idx}");
        }
        if let Some(gb) = &grads.bias {
            for idx in 0..gb.len() {
                let mut plus = model.clone();
                plus.bias.as_mut().unwrap()[idx] += step;
                let mut minus = model.clone();
                minus.bias.as_mut().unwrap()[idx] -= step;
                let numeric = (nll_at(&plus) - nll_at(&minus)) / (2.0 * step);
                prop_assert!((numeric - gb[idx]).abs() <= 1e-6, "bias {idx}");
            }
        }
    }
}

#[test]
fn fits_are_reproducible() {
    let lang = generate_language(10, 6, 3, 2.0, 3).unwrap();
    let config = TrainConfig {
        max_epochs: 500,
        ..TrainConfig::default()
    };
    let run = || {
        let mut model = FactorModel::initialize(ActivationKind::sigsoftmax(), 10, 6, 2, true, 4).unwrap();
        let report = fit(&mut model, &lang, &config).unwrap();
        (model, report)
    };
    assert_eq!(run(), run());
}

#[test]
fn fit_lowers_the_loss() {
    let lang = generate_language(10, 6, 3, 2.0, 3).unwrap();
    for kind in ActivationKind::ALL {
        let mut model = FactorModel::initialize(kind, 10, 6, 3, false, 1).unwrap();
        let before = nll_and_gradients(&model, &lang).unwrap().nll;
        let config = TrainConfig {
            max_epochs: 300,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &lang, &config).unwrap();
        assert!(report.final_nll < before, "{kind}");
        let mean: f64 = report.per_context_kl.iter().sum::<f64>() / 10.0;
        assert!((mean - report.mean_kl).abs() <= 1e-15);
    }
}

#[test]
fn divergence_is_reported_not_raised() {
    let lang = generate_language(8, 5, 3, 3.0, 2).unwrap();
    let mut model = FactorModel::initialize(ActivationKind::Softmax, 8, 5, 2, false, 1).unwrap();
    let config = TrainConfig {
        learning_rate: 1e300,
        max_epochs: 50,
        ..TrainConfig::default()
    };
    let report = fit(&mut model, &lang, &config).unwrap();
    assert!(!report.converged);
    assert!(report.diagnostic.is_some());
    assert!(report.mean_kl.is_finite());
}

#[test]
fn perfect_fit_when_width_suffices() {
    let lang = generate_language(12, 5, 3, 1.5, 11).unwrap();
    let model = FactorModel {
        kind: ActivationKind::Softmax,
        hidden: lang.log_probs().clone(),
        output: DMatrix::identity(5, 5),
        bias: Some(DVector::zeros(5)),
    };
    assert!(per_context_kl(&model, &lang).unwrap().iter().all(|&v| v <= 1e-10));
    let nll = nll_and_gradients(&model, &lang).unwrap().nll;
    assert!((nll - lang.mean_entropy()).abs() <= 1e-10);
}

#[test]
fn comparison_includes_relu_without_aborting() {
    let lang = generate_language(8, 5, 3, 2.0, 5).unwrap();
    let config = TrainConfig {
        max_epochs: 200,
        ..TrainConfig::default()
    };
    let table = compare_activations(&lang, 2, false, &ActivationKind::ALL, &config, &[2, 1]).unwrap();
    assert_eq!(table.rows.len(), 8);
    let order: Vec<(&str, u64)> = table.rows.iter().map(|r| (r.kind.name(), r.seed)).collect();
    assert_eq!(order[0], ("softmax", 1));
    assert_eq!(order[1], ("softmax", 2));
    assert_eq!(order[7], ("sigmoid_based", 2));
    assert_eq!(table.aggregates.len(), 4);
}

#[test]
fn bigram_counts_with_smoothing() {
    let lang = bigram_language("a b a b", 10, 1.0).unwrap();
    let vocab = lang.vocabulary().unwrap();
    let a = vocab.iter().position(|t| t == "a").unwrap();
    let b = vocab.iter().position(|t| t == "b").unwrap();
    let v = vocab.len() as f64;
    assert!((lang.true_probs()[(a, b)] - 3.0 / (2.0 + v)).abs() <= 1e-12);
    assert!(bigram_language("solo", 10, 1.0).is_err());
}

#[test]
fn bundled_corpus_builds_a_language() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/tiny_corpus.txt");
    let lang = sigsoftmax::synthetic::bigram_language_from_text(&path, 100, 1.0).unwrap();
    assert!(lang.classes() > 10);
    for row in lang.true_probs().row_iter() {
        assert!((row.sum() - 1.0).abs() <= 1e-12);
    }
    let config = TrainConfig {
        max_epochs: 100,
        ..TrainConfig::default()
    };
    let table = compare_activations(&lang, 5, false, &[ActivationKind::Softmax], &config, &[1]).unwrap();
    assert!(table.rows[0].fit.mean_kl.is_finite());
}
