//! Terminal current model: switching, displacement and leakage.

use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::energy::StackConfig;
use crate::error::{Error, Result};

/// Asymmetric diode-like leakage `j0 (exp(V/v0p) - exp(-V/v0n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageParams {
    /// Current density prefactor, A/m².
    pub j0: f64,
    pub v0p: f64,
    pub v0n: f64,
}

impl Default for LeakageParams {
    fn default() -> Self {
        LeakageParams {
            j0: 1.0,
            v0p: 0.6,
            v0n: 0.9,
        }
    }
}

impl LeakageParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.j0 >= 0.0) || !(self.v0p > 0.0) || !(self.v0n > 0.0) {
            return Err(Error::Config("leakage: need j0 >= 0, v0p > 0, v0n > 0".into()));
        }
        Ok(())
    }

    pub fn density(&self, v: f64) -> f64 {
        self.j0 * ((v / self.v0p).exp() - (-v / self.v0n).exp())
    }
}

/// Terminal current, A.
///
/// `dp_dt` is the switching polarization rate along the voltage axis, C/m²/s;
/// `de_dt` is the rate of the mean stack field `V / (d_fe + d_int)`, V/m/s.
pub fn synthesize_current(
    dp_dt: f64,
    de_dt: f64,
    v: f64,
    stack: &StackConfig,
    leakage: &LeakageParams,
) -> f64 {
    stack.area * (dp_dt + EPS0 * stack.effective_permittivity() * de_dt) + stack.area * leakage.density(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leakage_is_odd_only_when_symmetric() {
        let sym = LeakageParams { j0: 1.0, v0p: 0.7, v0n: 0.7 };
        assert!((sym.density(1.3) + sym.density(-1.3)).abs() < 1e-12);
        assert_eq!(sym.density(0.0), 0.0);
        let asym = LeakageParams::default();
        assert!(asym.density(1.0) > -asym.density(-1.0));
    }

    #[test]
    fn displacement_matches_capacitance() {
        let stack = StackConfig::default();
        let leak = LeakageParams { j0: 0.0, ..LeakageParams::default() };
        let dv_dt = 1e4;
        let i = synthesize_current(0.0, dv_dt / (stack.d_fe + stack.d_int), 0.0, &stack, &leak);
        let c = stack.capacitance_density() * stack.area;
        assert!((i - c * dv_dt).abs() < 1e-12 * i.abs());
    }
}
