use proptest::prelude::*;
use sigsoftmax::{
    argmax, finite_difference_log_jacobian, forward, log_forward, log_jacobian, nonlinearity_witness,
    ActivationKind, LogitVector,
};

fn kind() -> impl Strategy<Value = ActivationKind> {
    prop::sample::select(ActivationKind::ALL.to_vec())
}

fn logits(range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, 2..12)
}

fn has_unique_max(z: &[f64]) -> bool {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    z.iter().filter(|&&v| v == max).count() == 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn outputs_are_distributions(kind in kind(), z in logits(50.0)) {
        let p = forward(kind, &LogitVector::new(z).unwrap());
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn log_output_matches_output(kind in kind(), z in logits(30.0)) {
        let z = LogitVector::new(z).unwrap();
        let p = forward(kind, &z);
        let lp = log_forward(kind, &z);
        for (a, b) in p.iter().zip(lp.iter()) {
            prop_assert!((a - b.exp()).abs() <= 1e-12);
        }
    }

    #[test]
    fn extreme_logits_stay_finite(kind in kind(), z in logits(700.0)) {
        let z = LogitVector::new(z).unwrap();
        prop_assert!(forward(kind, &z).iter().all(|v| v.is_finite()));
        prop_assert!(log_forward(kind, &z).iter().all(|v| !v.is_nan()));
    }

    #[test]
    fn argmax_is_preserved(z in logits(20.0)) {
        prop_assume!(has_unique_max(&z));
        let logits = LogitVector::new(z.clone()).unwrap();
        for kind in [ActivationKind::Softmax, ActivationKind::sigsoftmax(), ActivationKind::SigmoidBased] {
            prop_assert_eq!(argmax(&forward(kind, &logits)), argmax(&z));
        }
        // The ReLU-based output is flat on the negative half-line.
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > 0.0 {
            prop_assert_eq!(argmax(&forward(ActivationKind::relu_based(), &logits)), argmax(&z));
        }
    }

    #[test]
    fn score_is_monotone(a in -40.0..40.0f64, b in -40.0..40.0f64) {
        prop_assume!(a < b);
        for kind in ActivationKind::ALL {
            prop_assert!(kind.log_g(a) <= kind.log_g(b));
        }
        let g = |x: f64| x.exp() * sigsoftmax::sigmoid(x);
        prop_assert!(g(a) < g(b));
    }

    #[test]
    fn softmax_ignores_constant_shifts(z in logits(20.0), c in -50.0..50.0f64) {
        let z = LogitVector::new(z).unwrap();
        let p = forward(ActivationKind::Softmax, &z);
        let q = forward(ActivationKind::Softmax, &z.shifted(c).unwrap());
        for (a, b) in p.iter().zip(q.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn probability_weighted_jacobian_rows_cancel(kind in kind(), z in logits(10.0)) {
        let z = LogitVector::new(z).unwrap();
        let p = forward(kind, &z);
        let jac = log_jacobian(kind, &z);
        let scale = jac.as_row_major().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (j, v) in jac.transpose_mul(&p).iter().enumerate() {
            prop_assert!(v.abs() <= 1e-12 * scale, "column {j}: {v}");
        }
    }

    #[test]
    fn jacobian_matches_central_differences(kind in kind(), z in prop::collection::vec(-5.0..5.0f64, 10)) {
        let relu = matches!(kind, ActivationKind::ReluBased { .. });
        prop_assume!(!relu || z.iter().all(|v| v.abs() >= 1e-3));
        let z = LogitVector::new(z).unwrap();
        let exact = log_jacobian(kind, &z);
        let numeric = finite_difference_log_jacobian(kind, &z, 1e-5).unwrap();
        for (a, b) in exact.as_row_major().iter().zip(numeric.as_row_major()) {
            let err = (a - b).abs();
            // Near the ReLU kink the slope 1/z is large, so the error is
            // measured relative to the entry.
            let err = if relu { err / a.abs().max(1.0) } else { err };
            prop_assert!(err <= 1e-6, "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn known_outputs() {
    let z = LogitVector::new(vec![1.0, 2.0, 0.0]).unwrap();
    let expected = [0.22091347523230996, 0.7235030679891638, 0.05558345677852627];
    for (a, b) in forward(ActivationKind::sigsoftmax(), &z).iter().zip(expected) {
        assert!((a - b).abs() <= 1e-12);
    }
    let negative = LogitVector::new(vec![-1.0, -2.0, -3.0]).unwrap();
    for v in forward(ActivationKind::relu_based(), &negative).iter() {
        assert!((v - 1.0 / 3.0).abs() <= 1e-12);
    }
}

#[test]
fn only_sigsoftmax_has_curved_log_score() {
    let sig = nonlinearity_witness(ActivationKind::sigsoftmax(), -1.0, 0.0, 1.0);
    assert!((sig - -0.24022901391655505).abs() <= 1e-12);
    assert_eq!(nonlinearity_witness(ActivationKind::Softmax, -1.0, 0.0, 1.0), 0.0);
}

#[test]
fn invalid_logits_are_rejected() {
    assert!(LogitVector::new(vec![1.0]).is_err());
    assert!(LogitVector::new(vec![1.0, f64::NAN]).is_err());
    assert!(LogitVector::new(vec![f64::INFINITY, 0.0]).is_err());
}

#[test]
fn jacobian_flags_large_entries() {
    let z = LogitVector::new(vec![1e-9, 2.0, -1.0]).unwrap();
    assert!(log_jacobian(ActivationKind::relu_based(), &z).large_magnitude);
    assert!(!log_jacobian(ActivationKind::sigsoftmax(), &z).large_magnitude);
}
