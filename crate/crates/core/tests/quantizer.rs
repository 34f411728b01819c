use dimlab_core::{check_quantizer_invariants, quantize_scalar, QuantScheme};
use proptest::prelude::*;

proptest! {
    #[test]
    fn bbit_cell_contains_input(x in -1e3f64..1e3, b in 1u32..=40) {
        let s = QuantScheme::bbit(b);
        let (code, q) = quantize_scalar(x, s).unwrap();
        let step = (-(b as f64)).exp2();
        prop_assert!(q <= x && x < q + step);
        prop_assert_eq!(q, code as f64 * step);
        prop_assert_eq!(quantize_scalar(q, s).unwrap().0, code);
    }

    #[test]
    fn bbit_refines(x in -10.0f64..10.0, b in 1u32..=30, extra in 1u32..=15) {
        let (code, _) = quantize_scalar(x, QuantScheme::bbit(b)).unwrap();
        let (_, fine) = quantize_scalar(x, QuantScheme::bbit(b + extra)).unwrap();
        prop_assert_eq!(quantize_scalar(fine, QuantScheme::bbit(b)).unwrap().0, code);
    }

    #[test]
    fn blevel_cell_contains_input(x in -1e2f64..1e2, b in 1u32..=10_000) {
        let s = QuantScheme::blevel(b);
        let (code, q) = quantize_scalar(x, s).unwrap();
        prop_assert!(q <= x, "q={} x={}", q, x);
        prop_assert!(x < s.value_of(code + 1));
        prop_assert_eq!(quantize_scalar(q, s).unwrap().0, code);
    }

    #[test]
    fn monotone(x in -1e3f64..1e3, y in -1e3f64..1e3, b in 1u32..=20) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        for s in [QuantScheme::bbit(b), QuantScheme::blevel(b)] {
            prop_assert!(quantize_scalar(lo, s).unwrap().0 <= quantize_scalar(hi, s).unwrap().0);
        }
    }
}

#[test]
fn audit_passes_correct_and_flags_broken() {
    let xs: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.7371).sin() * 50.0).collect();
    for s in [
        QuantScheme::bbit(3),
        QuantScheme::bbit(12),
        QuantScheme::blevel(7),
    ] {
        assert_eq!(check_quantizer_invariants(quantize_scalar, &xs, s).failures(), 0);
    }
    // Rounds to nearest instead of flooring.
    let rounding = |x: f64, s: QuantScheme| {
        let code = (x / s.step()).round() as i64;
        Ok((code, s.value_of(code)))
    };
    assert!(check_quantizer_invariants(rounding, &xs, QuantScheme::bbit(3)).error_bound > 0);
}

#[test]
fn rejects_unrepresentable_inputs() {
    assert!(quantize_scalar(f64::NAN, QuantScheme::bbit(4)).is_err());
    assert!(quantize_scalar(1e9, QuantScheme::bbit(52)).is_err());
    assert!(quantize_scalar(0.5, QuantScheme::bbit(0)).is_err());
    assert!(quantize_scalar(0.5, QuantScheme::bbit(53)).is_err());
}
