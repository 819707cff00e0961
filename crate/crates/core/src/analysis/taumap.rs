//! Retention time constants over a (width, amplitude) programming grid.

use serde::{Deserialize, Serialize};

use super::fit::RetentionFit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMap {
    pub widths: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// `tau[w][a]`, s; NaN where the fit was not usable.
    pub tau: Vec<Vec<f64>>,
    /// `p_init[w][a] = p0 + p_inf`, C/m².
    pub p_init: Vec<Vec<f64>>,
}

/// One scatter point of the τ versus initial polarization relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub width: f64,
    pub amplitude: f64,
    pub p_init: f64,
    pub tau: f64,
}

/// Assembles `fits[w][a]` into a map.
pub fn build_tau_map(widths: &[f64], amplitudes: &[f64], fits: &[Vec<RetentionFit>]) -> Result<TauMap> {
    if fits.len() != widths.len() || fits.iter().any(|row| row.len() != amplitudes.len()) {
        return Err(Error::FitInput(format!(
            "fit grid does not match {} widths x {} amplitudes",
            widths.len(),
            amplitudes.len()
        )));
    }
    let tau = fits
        .iter()
        .map(|row| row.iter().map(|f| if f.is_valid() { f.tau } else { f64::NAN }).collect())
        .collect();
    let p_init = fits.iter().map(|row| row.iter().map(RetentionFit::initial).collect()).collect();
    Ok(TauMap {
        widths: widths.to_vec(),
        amplitudes: amplitudes.to_vec(),
        tau,
        p_init,
    })
}

/// Flattens the map, widths outermost.
pub fn correlate_tau_polarization(map: &TauMap) -> Vec<TauPoint> {
    let mut out = Vec::with_capacity(map.widths.len() * map.amplitudes.len());
    for (w, &width) in map.widths.iter().enumerate() {
        for (a, &amplitude) in map.amplitudes.iter().enumerate() {
            out.push(TauPoint {
                width,
                amplitude,
                p_init: map.p_init[w][a],
                tau: map.tau[w][a],
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(tau: f64, ok: bool) -> RetentionFit {
        RetentionFit {
            p0: 0.4,
            p_inf: -0.3,
            tau,
            rmse: 0.0,
            n_iter: 3,
            converged: ok,
            identifiable: true,
        }
    }

    #[test]
    fn single_cell() {
        let m = build_tau_map(&[5e-5], &[-4.5], &[vec![fit(1e-3, true)]]).unwrap();
        assert_eq!(m.tau, vec![vec![1e-3]]);
        assert!((m.p_init[0][0] - 0.1).abs() < 1e-15);
        assert_eq!(correlate_tau_polarization(&m).len(), 1);
    }

    #[test]
    fn flagged_cells_are_nan() {
        let m = build_tau_map(&[1e-6, 1e-5], &[-4.0], &[vec![fit(1e-3, false)], vec![fit(2e-3, true)]]).unwrap();
        assert!(m.tau[0][0].is_nan());
        assert_eq!(m.tau[1][0], 2e-3);
        assert_eq!(correlate_tau_polarization(&m).len(), 2);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(build_tau_map(&[1e-6], &[-4.0, -4.5], &[vec![fit(1e-3, true)]]).is_err());
    }
}
