use dimlab_core::{
    block_entropy, conditional_entropy_of_codes, count_code_blocks, entropy_plugin, miller_madow_correct,
    Estimator,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn chain_rule(codes in prop::collection::vec(0i64..4, 10..400), k in 1usize..=4) {
        let joint = block_entropy(&codes, k, Estimator::Plugin).unwrap().0.value;
        let sum: f64 = (0..k)
            .map(|j| conditional_entropy_of_codes(&codes, j, Estimator::Plugin).unwrap().value)
            .sum();
        prop_assert!((joint - sum).abs() < 1e-12, "{} vs {}", joint, sum);
    }

    #[test]
    fn plugin_is_bounded_by_support(codes in prop::collection::vec(-3i64..3, 1..300), k in 1usize..=3) {
        prop_assume!(codes.len() >= k);
        let counts = count_code_blocks(&codes, k).unwrap();
        let h = entropy_plugin(&counts).unwrap().value;
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (counts.support() as f64).log2() + 1e-12);
        prop_assert_eq!(counts.total as usize, codes.len() - k + 1);
        let mm = miller_madow_correct(&entropy_plugin(&counts).unwrap(), &counts);
        let bias = (counts.support() as f64 - 1.0) / (2.0 * counts.total as f64 * std::f64::consts::LN_2);
        prop_assert!((mm.value - h - bias).abs() < 1e-12);
    }

    #[test]
    fn merged_counts_add(a in prop::collection::vec(0i64..3, 2..100), b in prop::collection::vec(0i64..3, 2..100)) {
        let mut ca = count_code_blocks(&a, 2).unwrap();
        let cb = count_code_blocks(&b, 2).unwrap();
        let total = ca.total + cb.total;
        ca.merge(&cb).unwrap();
        prop_assert_eq!(ca.total, total);
        prop_assert_eq!(ca.counts.values().sum::<u64>(), total);
    }
}

#[test]
fn known_values() {
    let codes: Vec<i64> = (0..4000).map(|i| i % 4).collect();
    assert!((block_entropy(&codes, 1, Estimator::Plugin).unwrap().0.value - 2.0).abs() < 1e-12);
    // Deterministic cycle: the next symbol is fixed by the previous one.
    assert!(
        conditional_entropy_of_codes(&codes, 1, Estimator::Plugin)
            .unwrap()
            .value
            .abs()
            < 1e-3
    );
    let constant = vec![5i64; 100];
    assert_eq!(
        block_entropy(&constant, 3, Estimator::MillerMadow)
            .unwrap()
            .0
            .value,
        0.0
    );
}

#[test]
fn errors() {
    assert!(count_code_blocks(&[1, 2], 0).is_err());
    assert!(count_code_blocks(&[1, 2], 3).is_err());
    let mut a = count_code_blocks(&[1, 2, 3], 1).unwrap();
    assert!(a.merge(&count_code_blocks(&[1, 2, 3], 2).unwrap()).is_err());
}

#[test]
fn undersampling_gate() {
    let distinct: Vec<i64> = (0..100).collect();
    assert!(count_code_blocks(&distinct, 1).unwrap().is_undersampled());
    let repeated: Vec<i64> = (0..100).map(|i| i % 3).collect();
    assert!(!count_code_blocks(&repeated, 1).unwrap().is_undersampled());
}
