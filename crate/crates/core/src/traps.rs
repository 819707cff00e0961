//! Oxygen-vacancy trap occupancy at the NbOx/HZO interface and the internal
//! bias field it produces.
//!
//! Negative voltage empties the traps (electrons de-trap and leave positively
//! charged vacancies behind), positive voltage refills them. The uncompensated
//! vacancy charge is the source of the bias field, which is negative in the
//! Landau coordinate and therefore stabilizes P↓.
//!
//! Two trap pools share the same kinetics with different rates: a fast pool
//! that follows the drive within microseconds, and an optional slow pool whose
//! occupancy drifts over many cycles. Sustained pulses beyond `deact_v_th`
//! additionally deactivate part of the vacancies (reversible, slow recovery).
//! The deactivation closure is a modelling guess; nothing quantifies how pulse
//! amplitude modulates the bias.

use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, Q_E};
use crate::energy::StackConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// Vacancy sheet density, 1/m².
    pub n_v: f64,
    /// Capture rate prefactor, 1/s.
    pub c0: f64,
    /// Emission rate prefactor, 1/s.
    pub e0: f64,
    /// Capture field-activation scale, V.
    pub v_c: f64,
    /// Emission field-activation scale, V.
    pub v_e: f64,
    /// Charge-to-field coupling.
    pub kappa: f64,

    /// Fraction of the vacancies belonging to the slow pool (0 disables drift).
    pub slow_weight: f64,
    pub slow_c0: f64,
    pub slow_e0: f64,
    pub slow_v_c: f64,
    pub slow_v_e: f64,

    /// Upper bound of the deactivated vacancy fraction.
    pub deact_max: f64,
    /// Deactivation rate prefactor, 1/s.
    pub deact_rate: f64,
    /// Negative-voltage magnitude above which deactivation sets in, V.
    pub deact_v_th: f64,
    pub deact_v_scale: f64,
    /// Recovery rate at zero voltage, 1/s.
    pub recovery_rate: f64,
    /// Positive-voltage scale accelerating recovery, V.
    pub recovery_v_scale: f64,
}

/// Default fully de-trapped bias magnitude, V/m (100 kV/cm).
pub const DEFAULT_BIAS_TARGET: f64 = 1.0e7;

impl Default for TrapParams {
    fn default() -> Self {
        let stack = StackConfig::default();
        let n_v = 1.0e17;
        TrapParams {
            n_v,
            c0: 1.0e2,
            e0: 1.0e4,
            v_c: 0.5,
            v_e: 0.5,
            kappa: kappa_for_target(DEFAULT_BIAS_TARGET, n_v, &stack),
            slow_weight: 0.2,
            slow_c0: 0.1,
            slow_e0: 0.06,
            slow_v_c: 0.5,
            slow_v_e: 0.5,
            deact_max: 0.12,
            deact_rate: 2.0e3,
            deact_v_th: 3.5,
            deact_v_scale: 0.5,
            recovery_rate: 5.0,
            recovery_v_scale: 0.25,
        }
    }
}

/// Coupling that makes the fully de-trapped bias equal `e_target` (V/m).
pub fn kappa_for_target(e_target: f64, n_v: f64, stack: &StackConfig) -> f64 {
    e_target * EPS0 * stack.eps_fe / (Q_E * n_v)
}

impl TrapParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("n_v", self.n_v),
            ("c0", self.c0),
            ("e0", self.e0),
            ("kappa", self.kappa),
            ("slow_c0", self.slow_c0),
            ("slow_e0", self.slow_e0),
            ("deact_rate", self.deact_rate),
            ("recovery_rate", self.recovery_rate),
            ("deact_v_th", self.deact_v_th),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("traps.{name} must be finite and >= 0")));
            }
        }
        let scales = [
            ("v_c", self.v_c),
            ("v_e", self.v_e),
            ("slow_v_c", self.slow_v_c),
            ("slow_v_e", self.slow_v_e),
            ("deact_v_scale", self.deact_v_scale),
            ("recovery_v_scale", self.recovery_v_scale),
        ];
        for (name, v) in scales {
            if !(v > 0.0) {
                return Err(Error::Config(format!("traps.{name} must be > 0")));
            }
        }
        for (name, v) in [("slow_weight", self.slow_weight), ("deact_max", self.deact_max)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("traps.{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Fully de-trapped bias magnitude for this parameter set, V/m.
    pub fn bias_magnitude(&self, stack: &StackConfig) -> f64 {
        self.kappa * Q_E * self.n_v / (EPS0 * stack.eps_fe)
    }

    pub fn slow_rates(&self, v_applied: f64) -> TrapRates {
        rates_with(self.slow_c0, self.slow_e0, self.slow_v_c, self.slow_v_e, v_applied)
    }

    /// Deactivation and recovery rates (1/s) at a terminal voltage.
    pub fn deactivation_rates(&self, v_applied: f64) -> (f64, f64) {
        let over = -v_applied - self.deact_v_th;
        let deact = if over > 0.0 {
            self.deact_rate * (over / self.deact_v_scale).exp_m1()
        } else {
            0.0
        };
        let recover = self.recovery_rate * (v_applied.max(0.0) / self.recovery_v_scale).exp();
        (deact, recover)
    }

    /// Trap state in equilibrium with zero applied voltage.
    pub fn rest_state(&self) -> TrapState {
        let fast = trap_rates(0.0, self);
        let slow = self.slow_rates(0.0);
        TrapState {
            f_fast: fast.steady_state(),
            f_slow: slow.steady_state(),
            deact: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapRates {
    pub capture: f64,
    pub emission: f64,
}

impl TrapRates {
    pub fn steady_state(&self) -> f64 {
        let total = self.capture + self.emission;
        if total > 0.0 {
            self.capture / total
        } else {
            0.5
        }
    }
}

fn rates_with(c0: f64, e0: f64, v_c: f64, v_e: f64, v: f64) -> TrapRates {
    TrapRates {
        capture: c0 * (v.max(0.0) / v_c).exp(),
        emission: e0 * ((-v).max(0.0) / v_e).exp(),
    }
}

/// Capture and emission rates of the fast pool at a terminal voltage.
pub fn trap_rates(v_applied: f64, params: &TrapParams) -> TrapRates {
    rates_with(params.c0, params.e0, params.v_c, params.v_e, v_applied)
}

/// Exact solution of `df/dt = c (1 - f) - e f` over `dt`.
pub fn relax_occupancy(f: f64, rates: TrapRates, dt: f64) -> f64 {
    let total = rates.capture + rates.emission;
    if total == 0.0 {
        return f;
    }
    let f_ss = rates.capture / total;
    (f_ss + (f - f_ss) * (-total * dt).exp()).clamp(0.0, 1.0)
}

/// Occupancy of the vacancy traps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapState {
    pub f_fast: f64,
    pub f_slow: f64,
    /// Deactivated fraction of the vacancy sheet density.
    pub deact: f64,
}

impl TrapState {
    /// Electron occupancy fraction averaged over both pools.
    pub fn f_occ(&self, params: &TrapParams) -> f64 {
        (1.0 - params.slow_weight) * self.f_fast + params.slow_weight * self.f_slow
    }

    /// Advances every pool at constant terminal voltage.
    pub fn advance(&mut self, v_applied: f64, params: &TrapParams, dt: f64) {
        self.f_fast = relax_occupancy(self.f_fast, trap_rates(v_applied, params), dt);
        if params.slow_weight > 0.0 {
            self.f_slow = relax_occupancy(self.f_slow, params.slow_rates(v_applied), dt);
        }
        if params.deact_max > 0.0 {
            let (k_d, k_r) = params.deactivation_rates(v_applied);
            let total = k_d + k_r;
            if total > 0.0 {
                let target = params.deact_max * k_d / total;
                self.deact = (target + (self.deact - target) * (-total * dt).exp())
                    .clamp(0.0, params.deact_max);
            }
        }
    }
}

/// Fast-pool update with externally supplied rates.
pub fn step_traps(state: TrapState, rates: TrapRates, dt: f64) -> TrapState {
    TrapState {
        f_fast: relax_occupancy(state.f_fast, rates, dt),
        ..state
    }
}

/// Internal bias field in the Landau coordinate, V/m.
pub fn bias_field(state: &TrapState, params: &TrapParams, stack: &StackConfig) -> f64 {
    let active = params.n_v * (1.0 - state.deact);
    -params.kappa * Q_E * active * (1.0 - state.f_occ(params)) / (EPS0 * stack.eps_fe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fast_only() -> TrapParams {
        TrapParams {
            slow_weight: 0.0,
            deact_max: 0.0,
            ..TrapParams::default()
        }
    }

    #[test]
    fn rates_at_zero_and_at_scale() {
        let p = TrapParams::default();
        let r = trap_rates(0.0, &p);
        assert_eq!((r.capture, r.emission), (p.c0, p.e0));
        let r = trap_rates(p.v_c, &p);
        assert!((r.capture - p.c0 * std::f64::consts::E).abs() < 1e-9 * r.capture);
        assert_eq!(r.emission, p.e0);
    }

    #[test]
    fn rate_asymmetry_grows_with_voltage() {
        let p = TrapParams::default();
        let mut last_neg = 0.0;
        let mut last_pos = 0.0;
        for k in 1..50 {
            let v = 0.1 * k as f64;
            let up = trap_rates(v, &p);
            let down = trap_rates(-v, &p);
            let pos = up.capture / up.emission;
            let neg = down.emission / down.capture;
            assert!(pos > last_pos && neg > last_neg);
            last_pos = pos;
            last_neg = neg;
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let r = TrapRates { capture: 3.0e3, emission: 7.0e2 };
        let f = r.steady_state();
        assert!((relax_occupancy(f, r, 1e-3) - f).abs() < 1e-15);
        let sym = TrapRates { capture: 5.0, emission: 5.0 };
        assert_eq!(sym.steady_state(), 0.5);
    }

    #[test]
    fn half_steps_compose() {
        let r = TrapRates { capture: 2.0e4, emission: 3.0e3 };
        let s = TrapState { f_fast: 0.9, f_slow: 0.0, deact: 0.0 };
        let full = step_traps(s, r, 4e-5);
        let half = step_traps(step_traps(s, r, 2e-5), r, 2e-5);
        assert!((full.f_fast - half.f_fast).abs() < 1e-14);
    }

    #[test]
    fn bias_calibration() {
        let stack = StackConfig::default();
        let p = fast_only();
        let empty = TrapState { f_fast: 0.0, f_slow: 0.0, deact: 0.0 };
        assert!((bias_field(&empty, &p, &stack) + 1e7).abs() < 1e-3);
        let full = TrapState { f_fast: 1.0, ..empty };
        assert_eq!(bias_field(&full, &p, &stack), 0.0);
        let half = TrapState { f_fast: 0.5, ..empty };
        assert!((bias_field(&half, &p, &stack) + 0.5e7).abs() < 1e-3);
        assert!((p.bias_magnitude(&stack) - 1e7).abs() < 1e-3);
    }

    #[test]
    fn longer_and_stronger_negative_pulses_empty_more_traps() {
        let p = TrapParams::default();
        let start = TrapState { f_fast: 0.8, ..p.rest_state() };
        let after = |v: f64, w: f64| {
            let mut s = start;
            s.advance(v, &p, w);
            s.f_occ(&p)
        };
        assert!(after(-1.0, 2e-6) > after(-1.0, 2e-5));
        assert!(after(-1.0, 2e-5) > after(-2.0, 2e-5));
    }

    #[test]
    fn deactivation_only_beyond_threshold_and_recovers() {
        let p = TrapParams::default();
        let mut s = p.rest_state();
        s.advance(-(p.deact_v_th - 0.1), &p, 1e-3);
        assert_eq!(s.deact, 0.0);
        s.advance(-4.5, &p, 50e-6);
        assert!(s.deact > 0.0 && s.deact <= p.deact_max);
        let d = s.deact;
        s.advance(2.5, &p, 1e-3);
        assert!(s.deact < d);
    }

    #[test]
    fn rejects_negative_rates() {
        let p = TrapParams { e0: -1.0, ..TrapParams::default() };
        assert!(p.validate().is_err());
        assert!(TrapParams::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn occupancy_stays_in_unit_interval(
            f0 in 0.0f64..=1.0,
            volts in proptest::collection::vec(-6.0f64..6.0, 1..40),
            dts in proptest::collection::vec(1e-9f64..1e-2, 40),
        ) {
            let p = TrapParams::default();
            let mut s = TrapState { f_fast: f0, f_slow: f0, deact: 0.0 };
            for (v, dt) in volts.iter().zip(&dts) {
                s.advance(*v, &p, *dt);
                prop_assert!((0.0..=1.0).contains(&s.f_fast));
                prop_assert!((0.0..=1.0).contains(&s.f_slow));
                prop_assert!(bias_field(&s, &p, &StackConfig::default()) <= 0.0);
            }
        }

        #[test]
        fn constant_voltage_converges_monotonically(f0 in 0.0f64..=1.0, v in -5.0f64..5.0) {
            let p = TrapParams::default();
            let r = trap_rates(v, &p);
            let f_ss = r.steady_state();
            let mut f = f0;
            let mut gap = (f - f_ss).abs();
            for _ in 0..20 {
                f = relax_occupancy(f, r, 1e-5);
                let g = (f - f_ss).abs();
                prop_assert!(g <= gap + 1e-15);
                gap = g;
            }
        }
    }
}
