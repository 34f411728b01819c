//! Statistical checks of the samplers and spec validation.

use dimlab_core::{jump_statistics, sample_path, validate_spec, ContinuousSpec, ProcessSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn uniform01() -> ContinuousSpec {
    ContinuousSpec::uniform(0.0, 1.0)
}

/// `|observed - p| ≤ 5σ` for a binomial proportion.
fn assert_proportion(observed: f64, p: f64, n: usize) {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (observed - p).abs() <= 5.0 * sigma,
        "observed {observed}, expected {p} ± {}",
        5.0 * sigma
    );
}

#[test]
fn markov_jump_fraction() {
    let n = 200_000;
    let path = sample_path(&ProcessSpec::piecewise_constant(0.2, uniform01()), n, 11).unwrap();
    let stats = jump_statistics(&path).unwrap();
    assert_proportion(stats.fraction, 0.2, n - 1);
    let jumps = path.jump_indicators.as_ref().unwrap();
    assert!(!jumps[0]);
    for t in 1..n {
        if !jumps[t] {
            assert_eq!(path.values[t], path.values[t - 1]);
        }
    }
}

#[test]
fn mixture_fraction() {
    let n = 200_000;
    let path = sample_path(&ProcessSpec::iid_mixture(0.3, uniform01()), n, 12).unwrap();
    assert_proportion(jump_statistics(&path).unwrap().fraction, 0.3, n);
    assert!(path.values.iter().all(|&v| v == 0.0 || (0.0..1.0).contains(&v)));
}

#[test]
fn uniform_samples_pass_chi_square() {
    let n = 100_000;
    let bins = 20;
    let path = sample_path(&ProcessSpec::iid_continuous(uniform01()), n, 13).unwrap();
    let mut counts = vec![0usize; bins];
    for v in &path.values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = n as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-4, "chi2 {chi2}, p-value {p_value}");
}

#[test]
fn truncated_gaussian_moments() {
    let c = ContinuousSpec::truncated_gaussian(0.0, 1.0, -1.0, 2.0);
    let n = 200_000;
    let path = sample_path(&ProcessSpec::iid_continuous(c.clone()), n, 14).unwrap();
    let mean = path.values.iter().sum::<f64>() / n as f64;
    let var = path.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    // Independent reference by quadrature of the density.
    let steps = 200_000;
    let h = 3.0 / steps as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..steps {
        let x = -1.0 + (i as f64 + 0.5) * h;
        let f = (-0.5 * x * x).exp();
        m0 += f;
        m1 += x * f;
        m2 += x * x * f;
    }
    let ref_mean = m1 / m0;
    let ref_var = m2 / m0 - ref_mean * ref_mean;
    assert!(
        (c.variance() - ref_var).abs() < 1e-6,
        "{} vs {ref_var}",
        c.variance()
    );
    assert!((mean - ref_mean).abs() < 5.0 * (ref_var / n as f64).sqrt());
    assert!((var - ref_var).abs() < 0.01);
}

#[test]
fn discrete_frequencies() {
    let pmf = vec![(0.1, 0.4), (0.35, 0.3), (0.6, 0.2), (0.85, 0.1)];
    let n = 100_000;
    let path = sample_path(&ProcessSpec::iid_discrete(pmf.clone()), n, 15).unwrap();
    for (v, q) in pmf {
        let f = path.values.iter().filter(|&&x| x == v).count() as f64 / n as f64;
        assert_proportion(f, q, n);
    }
}

#[test]
fn paths_are_pure_functions_of_the_seed() {
    let spec = ProcessSpec::piecewise_constant(0.4, uniform01());
    let a = sample_path(&spec, 1000, 7).unwrap();
    let b = sample_path(&spec, 1000, 7).unwrap();
    let c = sample_path(&spec, 1000, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values, c.values);
}

#[test]
fn invalid_specs_name_the_field() {
    let mut spec = ProcessSpec::iid_mixture(1.5, uniform01());
    assert!(validate_spec(&spec).mentions("p"));
    assert!(sample_path(&spec, 10, 0).is_err());
    spec.p = 0.5;
    assert!(validate_spec(&spec).is_ok());

    let bad_pmf = ProcessSpec::iid_discrete(vec![(0.0, 0.5), (1.0, 0.4)]);
    assert!(validate_spec(&bad_pmf).mentions("discrete_pmf"));

    let no_density = ProcessSpec {
        continuous: None,
        ..ProcessSpec::piecewise_constant(0.2, uniform01())
    };
    assert!(validate_spec(&no_density).mentions("continuous"));

    let empty = ContinuousSpec::uniform(1.0, 1.0);
    assert!(!validate_spec(&ProcessSpec::iid_continuous(empty)).is_ok());
}
