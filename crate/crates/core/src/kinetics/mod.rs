//! Polarization dynamics.
//!
//! The default mode is a nucleation-limited switching ensemble: every domain
//! relaxes exponentially toward the orientation favoured by the total field,
//! with a Merz-law waiting time. Switching toward P↑ (`D > 0`) and back toward
//! P↓ use separate prefactors and activation fields. The back-switching field
//! of a domain is `down_act_ratio * e_act_median * (e_act / e_act_median)^m`
//! with `m = down_act_exponent`: domains that are hard to program are also
//! slower to relax, but the relaxation times are far less spread out than the
//! programming times. A single-domain gradient flow over the free-energy
//! landscape is available as [`lk`].

pub mod lk;
mod simulate;

pub use simulate::{
    simulate, DeviceModel, Dynamics, PolarizationState, RecordMode, SimOptions, SimState, TraceRecord,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::energy::StackConfig;
use crate::error::{Error, Result};

/// Calibration of the domain ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_domains: usize,
    /// Median activation field for switching toward P↑, V/m.
    pub e_act_median: f64,
    /// Log-space standard deviation of the activation field.
    pub e_act_log_sigma: f64,
    /// Attempt time for switching toward P↑, s.
    pub tau0: f64,
    /// Merz exponent.
    pub merz_n: f64,
    /// Attempt time for switching toward P↓, s.
    pub down_tau0: f64,
    /// Median back-switching field relative to `e_act_median`.
    pub down_act_ratio: f64,
    /// How strongly the back-switching field follows `e_act` (0 = not at all).
    pub down_act_exponent: f64,
    /// Saturation polarization, C/m². `None` uses `sqrt(-alpha/beta)`.
    pub p_s: Option<f64>,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_domains: 512,
            e_act_median: 9.0e9,
            e_act_log_sigma: 0.4,
            tau0: 1.0e-11,
            merz_n: 1.0,
            down_tau0: 1.0e-5,
            down_act_ratio: 4.6e-3,
            down_act_exponent: 0.6,
            p_s: None,
            seed: 20240917,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("ensemble.{m}")));
        if self.n_domains == 0 {
            return err("n_domains must be >= 1");
        }
        if !(self.e_act_median > 0.0) {
            return err("e_act_median must be > 0");
        }
        if !(self.e_act_log_sigma >= 0.0) {
            return err("e_act_log_sigma must be >= 0");
        }
        if !(self.tau0 > 0.0) || !(self.down_tau0 > 0.0) {
            return err("tau0 and down_tau0 must be > 0");
        }
        if !(self.merz_n > 0.0) {
            return err("merz_n must be > 0");
        }
        if !(self.down_act_ratio > 0.0) {
            return err("down_act_ratio must be > 0");
        }
        if !(self.down_act_exponent >= 0.0) {
            return err("down_act_exponent must be >= 0");
        }
        if let Some(p) = self.p_s {
            if !(p > 0.0) {
                return err("p_s must be > 0");
            }
        }
        Ok(())
    }

    pub fn saturation_polarization(&self, stack: &StackConfig) -> Result<f64> {
        match self.p_s {
            Some(p) => Ok(p),
            None => stack.saturation_polarization().ok_or_else(|| {
                Error::Config("ensemble.p_s must be given when stack.alpha >= 0".into())
            }),
        }
    }

    /// Back-switching activation field of a domain with activation `e_act`.
    pub fn back_field(&self, e_act: f64) -> f64 {
        self.down_act_ratio * self.e_act_median * (e_act / self.e_act_median).powf(self.down_act_exponent)
    }
}

/// One switching region of the film.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    /// Fraction of the film area.
    pub weight: f64,
    /// Activation field toward P↑, V/m.
    pub e_act: f64,
    /// Activation field toward P↓, V/m.
    pub e_back: f64,
    /// Switched fraction toward `D > 0`, in [0, 1].
    pub s: f64,
}

/// Weighted domains; sorted by ascending activation field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainEnsemble {
    domains: Vec<Domain>,
    p_s: f64,
    /// Running `Σ w (2s - 1)`.
    net: f64,
    tau0: f64,
    merz_n: f64,
    down_tau0: f64,
}

/// Draws the activation fields from the seeded log-normal distribution.
/// All domains start fully in P↓ (`s = 0`).
pub fn sample_ensemble(config: &EnsembleConfig, p_s: f64) -> Result<DomainEnsemble> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let weight = 1.0 / config.n_domains as f64;
    let mut fields: Vec<f64> = if config.e_act_log_sigma == 0.0 {
        vec![config.e_act_median; config.n_domains]
    } else {
        let dist = LogNormal::new(config.e_act_median.ln(), config.e_act_log_sigma)
            .map_err(|e| Error::Config(format!("ensemble distribution: {e}")))?;
        (0..config.n_domains).map(|_| dist.sample(&mut rng)).collect()
    };
    fields.sort_by(f64::total_cmp);
    Ok(DomainEnsemble {
        domains: fields
            .into_iter()
            .map(|e_act| Domain {
                weight,
                e_act,
                e_back: config.back_field(e_act),
                s: 0.0,
            })
            .collect(),
        p_s,
        net: -1.0,
        tau0: config.tau0,
        merz_n: config.merz_n,
        down_tau0: config.down_tau0,
    })
}

/// Merz-law waiting time of `domain` under `e_total`, s.
///
/// Infinite when the field vanishes or already points along the domain's
/// state; there is no thermally activated back-switching at zero field.
pub fn switching_time(e_total: f64, domain: &Domain, config: &EnsembleConfig) -> f64 {
    let target = if e_total > 0.0 { 1.0 } else { 0.0 };
    if e_total == 0.0 || domain.s == target {
        return f64::INFINITY;
    }
    let (tau0, e_a) = if e_total > 0.0 {
        (config.tau0, domain.e_act)
    } else {
        (config.down_tau0, domain.e_back)
    };
    tau0 * (e_a / e_total.abs()).powf(config.merz_n).exp()
}

/// `exp(-dt/tau)` below this is treated as "no change".
const FROZEN_EXPONENT: f64 = 39.0;

impl DomainEnsemble {
    /// Film polarization `p_s * Σ w (2s - 1)`, C/m².
    pub fn polarization(&self) -> f64 {
        self.p_s * self.net
    }

    pub fn saturation(&self) -> f64 {
        self.p_s
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn set_uniform(&mut self, s: f64) {
        for d in &mut self.domains {
            d.s = s;
        }
        self.resum();
    }

    /// Recomputes the running sum from scratch.
    pub fn resum(&mut self) {
        self.net = self.domains.iter().map(|d| d.weight * (2.0 * d.s - 1.0)).sum();
    }

    /// Target state, attempt time, whether the back-switching field applies,
    /// and the largest activation field that can move within `dt`.
    fn plan(&self, e_abs: f64, up: bool, dt: f64) -> (f64, f64, f64) {
        let (target, tau0) = if up { (1.0, self.tau0) } else { (0.0, self.down_tau0) };
        let budget = FROZEN_EXPONENT + (dt / tau0).ln();
        let limit = if budget <= 0.0 {
            0.0
        } else {
            e_abs * budget.powf(1.0 / self.merz_n)
        };
        (target, tau0, limit)
    }

    #[inline]
    fn decay(&self, e_a: f64, e_abs: f64, tau0: f64, dt: f64) -> f64 {
        let x = e_a / e_abs;
        let x = if self.merz_n == 1.0 { x } else { x.powf(self.merz_n) };
        (-(dt / tau0) * (-x).exp()).exp()
    }

    /// Polarization after a step of `dt` at constant field, without mutating.
    pub fn predict(&self, e_total: f64, dt: f64) -> f64 {
        if e_total == 0.0 || !(dt > 0.0) {
            return self.polarization();
        }
        let e_abs = e_total.abs();
        let up = e_total > 0.0;
        let (target, tau0, limit) = self.plan(e_abs, up, dt);
        let mut delta = 0.0;
        for d in &self.domains {
            let e_a = if up { d.e_act } else { d.e_back };
            if e_a > limit {
                break;
            }
            if d.s == target {
                continue;
            }
            let s = target + (d.s - target) * self.decay(e_a, e_abs, tau0, dt);
            delta += d.weight * 2.0 * (s - d.s);
        }
        self.p_s * (self.net + delta)
    }

    /// Exact exponential relaxation of every domain over `dt` at constant
    /// field. Returns the polarization change.
    pub fn step(&mut self, e_total: f64, dt: f64) -> f64 {
        if e_total == 0.0 || !(dt > 0.0) {
            return 0.0;
        }
        let e_abs = e_total.abs();
        let up = e_total > 0.0;
        let (target, tau0, limit) = self.plan(e_abs, up, dt);
        let n = self.merz_n;
        let mut delta = 0.0;
        for d in self.domains.iter_mut() {
            let e_a = if up { d.e_act } else { d.e_back };
            if e_a > limit {
                break;
            }
            if d.s == target {
                continue;
            }
            let x = e_a / e_abs;
            let x = if n == 1.0 { x } else { x.powf(n) };
            let decay = (-(dt / tau0) * (-x).exp()).exp();
            let s = target + (d.s - target) * decay;
            let s = if (s - target).abs() < 1e-15 { target } else { s };
            delta += d.weight * 2.0 * (s - d.s);
            d.s = s;
        }
        self.net += delta;
        self.p_s * delta
    }
}

/// Advances the ensemble by `dt` under `e_total`; returns `ΔP`.
pub fn step_ensemble(ensemble: &mut DomainEnsemble, e_total: f64, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Numerical(format!("step_ensemble needs dt > 0, got {dt}")));
    }
    Ok(ensemble.step(e_total, dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, sigma: f64) -> EnsembleConfig {
        EnsembleConfig {
            n_domains: n,
            e_act_log_sigma: sigma,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn zero_spread_gives_identical_fields() {
        let e = sample_ensemble(&config(64, 0.0), 0.3).unwrap();
        assert!(e.domains().iter().all(|d| d.e_act == 9.0e9));
        let w: f64 = e.domains().iter().map(|d| d.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_ensemble(&config(256, 0.4), 0.3).unwrap();
        let b = sample_ensemble(&config(256, 0.4), 0.3).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&EnsembleConfig { seed: 1, ..config(256, 0.4) }, 0.3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_median_close_to_configured() {
        let cfg = EnsembleConfig {
            e_act_median: 1.5e8,
            ..config(10_000, 0.8)
        };
        let e = sample_ensemble(&cfg, 0.3).unwrap();
        let median = 0.5 * (e.domains()[4999].e_act + e.domains()[5000].e_act);
        assert!((median / 1.5e8 - 1.0).abs() < 0.05, "median {median}");
    }

    #[test]
    fn switching_time_limits() {
        let cfg = EnsembleConfig {
            tau0: 1e-9,
            merz_n: 1.0,
            ..EnsembleConfig::default()
        };
        let d = Domain { weight: 1.0, e_act: 1.5e8, e_back: 1.5e8, s: 0.0 };
        assert_eq!(switching_time(0.0, &d, &cfg), f64::INFINITY);
        assert_eq!(switching_time(-1e7, &d, &cfg), f64::INFINITY);
        let t = switching_time(1e7, &d, &cfg);
        let expected = 1e-9 * 15f64.exp();
        assert!((t - expected).abs() / expected < 1e-12);
        assert!((t - 3.269e-3).abs() < 1e-6);
        let fast = switching_time(1e20, &d, &cfg);
        assert!((fast - 1e-9).abs() < 1e-18);
    }

    #[test]
    fn single_domain_is_exact_exponential_and_composes() {
        let cfg = EnsembleConfig { n_domains: 1, e_act_log_sigma: 0.0, ..EnsembleConfig::default() };
        let mut a = sample_ensemble(&cfg, 0.3).unwrap();
        let mut b = a.clone();
        let e = 6e8;
        let tau = switching_time(e, &a.domains()[0], &cfg);
        let dt = 0.3 * tau;
        a.step(e, dt);
        b.step(e, 0.5 * dt);
        b.step(e, 0.5 * dt);
        assert!((a.polarization() - b.polarization()).abs() < 1e-12);
        let expected = 0.3 * (2.0 * (1.0 - (-0.3f64).exp()) - 1.0);
        assert!((a.polarization() - expected).abs() < 1e-12);
    }

    #[test]
    fn small_steps_obey_first_order_bound() {
        let e = sample_ensemble(&EnsembleConfig::default(), 0.3).unwrap();
        let field = 6.7e8;
        let min_tau = e
            .domains
            .iter()
            .map(|d| switching_time(field, d, &EnsembleConfig::default()))
            .fold(f64::INFINITY, f64::min);
        let mut moved = e.clone();
        let dt = 1e-3 * min_tau;
        let dp = moved.step(field, dt);
        assert!(dp.abs() <= e.saturation() * dt / min_tau * 2.0 + 1e-18);
        assert!(dp > 0.0);
    }

    #[test]
    fn reversal_matches_analytic_mixture() {
        let cfg = EnsembleConfig { n_domains: 64, ..EnsembleConfig::default() };
        let mut e = sample_ensemble(&cfg, 0.3).unwrap();
        e.set_uniform(1.0);
        let field = -1.2e7;
        let taus: Vec<f64> = e.domains().iter().map(|d| switching_time(field, d, &cfg)).collect();
        let mut t = 0.0;
        for _ in 0..200 {
            e.step(field, 2e-5);
            t += 2e-5;
        }
        let analytic: f64 = taus
            .iter()
            .map(|tau| (2.0 * (-t / tau).exp() - 1.0) / 64.0)
            .sum::<f64>()
            * 0.3;
        assert!((e.polarization() - analytic).abs() < 1e-9, "{} vs {}", e.polarization(), analytic);
    }

    #[test]
    fn predict_matches_step() {
        let mut e = sample_ensemble(&EnsembleConfig::default(), 0.3).unwrap();
        let p = e.predict(6e8, 3e-6);
        e.step(6e8, 3e-6);
        assert!((p - e.polarization()).abs() < 1e-15);
        let cached = e.polarization();
        e.resum();
        assert!((cached - e.polarization()).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let mut e = sample_ensemble(&EnsembleConfig::default(), 0.3).unwrap();
        assert!(step_ensemble(&mut e, 1e8, 0.0).is_err());
    }
}
