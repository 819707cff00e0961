use fecap_core::analysis::fit::objective_gradient;
use fecap_core::analysis::fit_exponential;
use fecap_core::instrument::log_spaced;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn synthetic(p0: f64, p_inf: f64, tau: f64, n: usize) -> Vec<(f64, f64)> {
    log_spaced(1e-6, 50e-3, n).into_iter().map(|t| (t, p0 * (-t / tau).exp() + p_inf)).collect()
}

#[test]
fn noisy_fits_have_small_median_error() {
    let (p0, p_inf, tau) = (0.55, -0.3, 8e-4);
    let clean = synthetic(p0, p_inf, tau, 24);
    let noise = Normal::new(0.0, 0.01 * p0).unwrap();
    let mut errs = Vec::new();
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let noisy: Vec<(f64, f64)> = clean.iter().map(|&(t, p)| (t, p + noise.sample(&mut rng))).collect();
        let fit = fit_exponential(&noisy).unwrap();
        assert!(fit.converged);
        errs.push((fit.tau - tau).abs() / tau);
    }
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[49] + errs[50]);
    assert!(median < 0.05, "median relative tau error {median}");
}

#[test]
fn noiseless_fit_is_exact_and_stationary() {
    for &(p0, p_inf, tau) in &[(0.4, -0.3, 1e-3), (-0.2, 0.1, 3e-5), (1.0, 0.0, 2e-2)] {
        let s = synthetic(p0, p_inf, tau, 30);
        let fit = fit_exponential(&s).unwrap();
        assert!((fit.p0 - p0).abs() <= 1e-6 * p0.abs());
        assert!((fit.p_inf - p_inf).abs() <= 1e-6 * p0.abs());
        assert!((fit.tau - tau).abs() <= 1e-6 * tau);
        let g = objective_gradient(&s, &fit);
        assert!(g.iter().all(|x| x.abs() < 1e-10), "{g:?}");
    }
}
