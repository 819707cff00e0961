//! Polarization loops from switching and non-switching current transients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled current transient.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurrentTrace {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub i: Vec<f64>,
}

impl CurrentTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Appends `other`, shifting its clock so that its first sample coincides
    /// with the last sample of `self`; that shared sample is kept once.
    pub fn extend_continuing(&mut self, other: &CurrentTrace) {
        if self.is_empty() {
            *self = other.clone();
            return;
        }
        let Some(&t0) = other.t.first() else { return };
        let shift = self.t[self.len() - 1] - t0;
        for k in 1..other.len() {
            self.t.push(other.t[k] + shift);
            self.v.push(other.v[k]);
            self.i.push(other.i[k]);
        }
    }
}

/// Polarization loop in the voltage-axis convention.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolLoop {
    pub v: Vec<f64>,
    /// C/m², centered so that `(max + min) / 2 = 0`.
    pub p: Vec<f64>,
    /// Highest and lowest loop polarization at the baseline voltage (the
    /// voltage the sweep starts from and returns to between pulses).
    pub pr_pos: f64,
    pub pr_neg: f64,
    /// Voltages of the extrema of the switching current.
    pub peak_v_pos: f64,
    pub peak_v_neg: f64,
}

impl PolLoop {
    pub fn two_pr(&self) -> f64 {
        self.pr_pos - self.pr_neg
    }

    /// Enclosed area `∮ P dV`, J/m³ (sign follows the traversal direction).
    pub fn area(&self) -> f64 {
        let n = self.v.len();
        let mut a = 0.0;
        for k in 1..n {
            a += 0.5 * (self.p[k] + self.p[k - 1]) * (self.v[k] - self.v[k - 1]);
        }
        -a
    }
}

fn check_aligned(sw: &CurrentTrace, ns: &CurrentTrace) -> Result<()> {
    for (name, tr) in [("switching", sw), ("non-switching", ns)] {
        if tr.v.len() != tr.len() || tr.i.len() != tr.len() {
            return Err(Error::Misaligned(format!("{name} trace has ragged columns")));
        }
    }
    if sw.len() != ns.len() {
        return Err(Error::Misaligned(format!(
            "switching trace has {} samples, non-switching has {}",
            sw.len(),
            ns.len()
        )));
    }
    if sw.len() < 2 {
        return Err(Error::Misaligned("need at least two samples".into()));
    }
    let span = (sw.t[sw.len() - 1] - sw.t[0]).abs().max(f64::MIN_POSITIVE);
    for k in 0..sw.len() {
        if (sw.t[k] - ns.t[k]).abs() > 1e-9 * span {
            return Err(Error::Misaligned(format!("sample {k}: t = {} vs {}", sw.t[k], ns.t[k])));
        }
        if k > 0 && !(sw.t[k] > sw.t[k - 1]) {
            return Err(Error::Misaligned(format!("sample {k}: time not increasing")));
        }
    }
    Ok(())
}

/// Refines an extremum index by a parabola through its neighbours and
/// returns the interpolated voltage.
fn peak_voltage(y: &[f64], v: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= y.len() {
        return v[k];
    }
    let denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
    if denom == 0.0 {
        return v[k];
    }
    let delta = (0.5 * (y[k - 1] - y[k + 1]) / denom).clamp(-0.5, 0.5);
    if delta >= 0.0 {
        v[k] + delta * (v[k + 1] - v[k])
    } else {
        v[k] + delta * (v[k] - v[k - 1])
    }
}

/// `P(t) = (1/area) ∫ (I_sw - I_ns) dt` by the trapezoid rule.
pub fn integrate_pund(sw: &CurrentTrace, ns: &CurrentTrace, area: f64) -> Result<PolLoop> {
    check_aligned(sw, ns)?;
    if !(area > 0.0) {
        return Err(Error::Config(format!("area must be > 0, got {area}")));
    }
    let n = sw.len();
    let di: Vec<f64> = (0..n).map(|k| sw.i[k] - ns.i[k]).collect();
    let mut p = Vec::with_capacity(n);
    let mut q = 0.0;
    p.push(0.0);
    for k in 1..n {
        q += 0.5 * (di[k] + di[k - 1]) * (sw.t[k] - sw.t[k - 1]);
        p.push(q / area);
    }
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    let mid = 0.5 * (max + min);
    for x in &mut p {
        *x -= mid;
    }

    let base = sw.v[0];
    let v_scale = sw.v.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut pr_pos = f64::NEG_INFINITY;
    let mut pr_neg = f64::INFINITY;
    for (v, &pk) in sw.v.iter().zip(&p) {
        if (v - base).abs() <= 1e-9 * v_scale {
            pr_pos = pr_pos.max(pk);
            pr_neg = pr_neg.min(pk);
        }
    }

    let (mut k_max, mut k_min) = (0, 0);
    for k in 0..n {
        if di[k] > di[k_max] {
            k_max = k;
        }
        if di[k] < di[k_min] {
            k_min = k;
        }
    }
    Ok(PolLoop {
        v: sw.v.clone(),
        p,
        pr_pos,
        pr_neg,
        peak_v_pos: peak_voltage(&di, &sw.v, k_max),
        peak_v_neg: peak_voltage(&di, &sw.v, k_min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(i: Vec<f64>) -> CurrentTrace {
        let n = i.len();
        CurrentTrace {
            t: (0..n).map(|k| k as f64 * 1e-6).collect(),
            v: (0..n).map(|k| (k as f64 * 0.3).sin()).collect(),
            i,
        }
    }

    #[test]
    fn identical_traces_give_flat_loop() {
        let a = trace((0..50).map(|k| (k as f64).cos() * 1e-6).collect());
        let l = integrate_pund(&a, &a, 1e-9).unwrap();
        assert!(l.p.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn box_current_gives_step() {
        let mut i = vec![0.0; 101];
        for x in &mut i[20..=60] {
            *x = 2e-6;
        }
        let sw = trace(i);
        let ns = trace(vec![0.0; 101]);
        let area = 1e-9;
        let l = integrate_pund(&sw, &ns, area).unwrap();
        // trapezoid of a box sampled at 1 µs: plateau 40 µs plus two half edges
        let q = 2e-6 * 41e-6;
        let step = l.p[100] - l.p[0];
        assert!((step - q / area).abs() < 1e-9 * q / area);
        assert!((l.p[100] + l.p[0]).abs() < 1e-9);
    }

    #[test]
    fn misaligned_rejected() {
        let a = trace(vec![0.0; 10]);
        let mut b = trace(vec![0.0; 10]);
        b.t[3] += 1e-7;
        assert!(matches!(integrate_pund(&a, &b, 1.0), Err(Error::Misaligned(_))));
        let c = trace(vec![0.0; 9]);
        assert!(matches!(integrate_pund(&a, &c, 1.0), Err(Error::Misaligned(_))));
    }

    #[test]
    fn peak_interpolation_recovers_parabola_vertex() {
        let v: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = v.iter().map(|x| 1.0 - (x - 0.43f64).powi(2)).collect();
        let k = 4;
        assert!((peak_voltage(&y, &v, k) - 0.43).abs() < 1e-12);
    }

    #[test]
    fn extend_continuing_shares_boundary_sample() {
        let mut a = trace(vec![1.0; 5]);
        let b = trace(vec![2.0; 5]);
        a.extend_continuing(&b);
        assert_eq!(a.len(), 9);
        assert!((a.t[8] - 8e-6).abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn integration_is_linear(
            xs in proptest::collection::vec(-1e-5f64..1e-5, 8..40),
            ys in proptest::collection::vec(-1e-5f64..1e-5, 40),
        ) {
            let n = xs.len();
            let a = trace(xs.clone());
            let b = trace(ys[..n].to_vec());
            let sum = trace((0..n).map(|k| xs[k] + ys[k]).collect());
            let zero = trace(vec![0.0; n]);
            let integrate = |tr: &CurrentTrace| -> Vec<f64> {
                // undo the centering to compare raw integrals
                let l = integrate_pund(tr, &zero, 1e-9).unwrap();
                l.p.iter().map(|p| p - l.p[0]).collect()
            };
            let (pa, pb, ps) = (integrate(&a), integrate(&b), integrate(&sum));
            for k in 0..n {
                prop_assert!((ps[k] - pa[k] - pb[k]).abs() <= 1e-9 * (pa[k].abs() + pb[k].abs() + 1.0));
            }
        }
    }
}
