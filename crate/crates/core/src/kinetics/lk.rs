//! Single-domain Landau-Khalatnikov gradient flow `rho dD/dt = -dF/dD`,
//! integrated with an embedded Dormand-Prince 5(4) pair.

use serde::{Deserialize, Serialize};

use crate::energy::{effective_field, StackConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LkOptions {
    /// Absolute local error target per sub-step, C/m².
    pub abs_tol: f64,
    /// Sub-step budget for one call to [`lk_step`].
    pub max_substeps: usize,
}

impl Default for LkOptions {
    fn default() -> Self {
        LkOptions {
            abs_tol: 1e-9,
            max_substeps: 100_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Advances `d` by `dt` under constant external and bias fields.
///
/// `rho` is the viscosity in Ω·m. `t` is only used for error reporting.
#[allow(clippy::too_many_arguments)]
pub fn lk_step(
    d: f64,
    stack: &StackConfig,
    e_ext: f64,
    e_bias: f64,
    rho: f64,
    dt: f64,
    t: f64,
    opts: &LkOptions,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Config(format!("lk.rho must be > 0, got {rho}")));
    }
    if !(dt >= 0.0) {
        return Err(Error::Numerical(format!("lk_step needs dt >= 0, got {dt}")));
    }
    let f = |x: f64| effective_field(x, stack, e_ext, e_bias) / rho;
    let mut y = d;
    let mut elapsed = 0.0;
    let mut h = dt;
    let mut k1 = f(y);
    let mut substeps = 0usize;
    let h_floor = dt * 1e-14;
    while elapsed < dt {
        if substeps >= opts.max_substeps {
            return Err(Error::StepUnderflow { t: t + elapsed, substeps });
        }
        substeps += 1;
        h = h.min(dt - elapsed);
        let k2 = f(y + h * A21 * k1);
        let k3 = f(y + h * (A31 * k1 + A32 * k2));
        let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(y_new);
        let err = (h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
        if !y_new.is_finite() || !err.is_finite() {
            h *= 0.1;
        } else if err <= opts.abs_tol {
            y = y_new;
            elapsed += h;
            k1 = k7;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * (opts.abs_tol / err).powf(0.2)).clamp(0.2, 5.0) };
            h *= grow;
            continue;
        } else {
            h *= (0.9 * (opts.abs_tol / err).powf(0.2)).clamp(0.1, 0.9);
        }
        if h < h_floor {
            return Err(Error::StepUnderflow { t: t + elapsed, substeps });
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{free_energy_density, LandscapePreset};

    #[test]
    fn relaxes_into_nearest_well() {
        let stack = LandscapePreset::Intrinsic.stack();
        let ps = stack.saturation_polarization().unwrap();
        let d = lk_step(0.05, &stack, 0.0, 0.0, 1.0, 1e-6, 0.0, &LkOptions::default()).unwrap();
        assert!((d - ps).abs() < 1e-6, "{d}");
        let d = lk_step(-0.05, &stack, 0.0, 0.0, 1.0, 1e-6, 0.0, &LkOptions::default()).unwrap();
        assert!((d + ps).abs() < 1e-6);
    }

    #[test]
    fn linear_regime_matches_exponential() {
        // Near the minimum the flow is linear with rate curvature/rho.
        let stack = LandscapePreset::Intrinsic.stack();
        let ps = stack.saturation_polarization().unwrap();
        let k = stack.alpha + 3.0 * stack.beta * ps * ps;
        let rho = 10.0;
        let dt = 0.5 * rho / k;
        let d0 = ps + 1e-6;
        let d = lk_step(d0, &stack, 0.0, 0.0, rho, dt, 0.0, &LkOptions::default()).unwrap();
        let expected = ps + 1e-6 * (-k * dt / rho).exp();
        assert!((d - expected).abs() < 1e-10);
    }

    #[test]
    fn energy_never_increases() {
        let stack = LandscapePreset::Interface.stack();
        let mut d = -0.3;
        let e = 4e8;
        let mut f = free_energy_density(d, &stack, e, 0.0);
        for i in 0..200 {
            d = lk_step(d, &stack, e, 0.0, 1.0, 2e-11, i as f64 * 2e-11, &LkOptions::default()).unwrap();
            let f_new = free_energy_density(d, &stack, e, 0.0);
            assert!(f_new <= f + 1e-6 * f.abs().max(1.0));
            f = f_new;
        }
        assert!(d > 0.0);
    }

    #[test]
    fn tiny_budget_reports_underflow() {
        let stack = LandscapePreset::Intrinsic.stack();
        let opts = LkOptions { abs_tol: 1e-30, max_substeps: 10 };
        let r = lk_step(0.01, &stack, 5e8, 0.0, 1e-3, 1e-3, 0.0, &opts);
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
