use dimlab_core::verify::discrete_test_source;
use dimlab_core::{fit_dk, fit_do, id_sweep, ContinuousSpec, IdSweepParams, ProcessSpec, SchemeKind};

fn uniform01() -> ContinuousSpec {
    ContinuousSpec::uniform(0.0, 1.0)
}

#[test]
fn mixture_id_is_the_continuous_weight() {
    for (i, p) in [0.25, 0.75].into_iter().enumerate() {
        let sweep = id_sweep(
            &ProcessSpec::iid_mixture(p, uniform01()),
            &IdSweepParams::new(0, vec![4, 6, 8, 10], 300_000, 100 + i as u64),
        )
        .unwrap();
        let est = fit_dk(&sweep, 0).unwrap();
        assert!((est.value - p).abs() < 0.05, "p={p}: {}", est.value);
    }
}

#[test]
fn blevel_scheme_agrees() {
    let mut params = IdSweepParams::new(0, vec![16, 64, 256, 1024], 300_000, 5);
    params.scheme = SchemeKind::Blevel;
    let sweep = id_sweep(&ProcessSpec::iid_mixture(0.5, uniform01()), &params).unwrap();
    let est = fit_dk(&sweep, 0).unwrap();
    assert!((est.value - 0.5).abs() < 0.05, "{}", est.value);
}

#[test]
fn discrete_source_has_zero_id() {
    let sweep = id_sweep(
        &discrete_test_source(),
        &IdSweepParams::new(0, vec![4, 6, 8, 10], 100_000, 3),
    )
    .unwrap();
    assert!(fit_dk(&sweep, 0).unwrap().value < 0.02);
    for r in &sweep.rows {
        let exact = 1.8464393446710154; // H(0.4, 0.3, 0.2, 0.1)
        assert!((r.h_cond - exact).abs() < 0.01, "{r:?}");
    }
}

#[test]
fn markov_orders_decrease() {
    let sweep = id_sweep(
        &ProcessSpec::piecewise_constant(0.2, uniform01()),
        &IdSweepParams::new(1, vec![4, 5, 6], 300_000, 17),
    )
    .unwrap();
    let est = fit_do(&sweep).unwrap();
    let d = &est.diagnostics.per_order;
    assert!((d[0].value - 1.0).abs() < 0.05, "d_0 = {}", d[0].value);
    assert!(d[1].value < d[0].value);
    assert!(!est.diagnostics.flags.iter().any(|f| f.contains("non-monotone")));
}

#[test]
fn sweeps_are_deterministic_and_thread_independent() {
    let spec = ProcessSpec::piecewise_constant(0.3, uniform01());
    let params = IdSweepParams::new(2, vec![3, 4, 5, 6], 20_000, 9);
    let a = id_sweep(&spec, &params).unwrap();
    std::env::set_var("DIMLAB_THREADS", "1");
    let b = id_sweep(&spec, &params).unwrap();
    std::env::remove_var("DIMLAB_THREADS");
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 12);
}
