//! Single-exponential retention fit `P(t) = p0 exp(-t/tau) + p_inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionFit {
    pub p0: f64,
    pub p_inf: f64,
    /// s; NaN when the decay is not identifiable.
    pub tau: f64,
    pub rmse: f64,
    pub n_iter: usize,
    pub converged: bool,
    /// False for flat data, where `tau` carries no information.
    pub identifiable: bool,
}

impl RetentionFit {
    /// Polarization at `t = 0`.
    pub fn initial(&self) -> f64 {
        self.p0 + self.p_inf
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.identifiable {
            self.p0 * (-t / self.tau).exp() + self.p_inf
        } else {
            self.p_inf
        }
    }

    /// Usable in a τ map.
    pub fn is_valid(&self) -> bool {
        self.converged && self.identifiable && self.tau > 0.0 && self.tau.is_finite()
    }
}

/// Optional fit window on the sample times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-10;

fn prepare(samples: &[(f64, f64)], window: FitWindow) -> Result<Vec<(f64, f64)>> {
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(t, _)| window.t_min.is_none_or(|lo| *t >= lo) && window.t_max.is_none_or(|hi| *t <= hi))
        .collect();
    if pts.len() < 4 {
        return Err(Error::FitInput(format!("need at least 4 samples, got {}", pts.len())));
    }
    if pts.iter().any(|(t, p)| !t.is_finite() || !p.is_finite()) {
        return Err(Error::FitInput("non-finite sample".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::FitInput("sample times must be distinct".into()));
    }
    Ok(pts)
}

fn initial_tau(pts: &[(f64, f64)], p0: f64, p_inf: f64) -> f64 {
    let target = p0.abs() / std::f64::consts::E;
    let dev = |k: usize| (pts[k].1 - p_inf).abs();
    for k in 1..pts.len() {
        if dev(k) < target {
            let (t0, t1) = (pts[k - 1].0, pts[k].0);
            let (d0, d1) = (dev(k - 1), dev(k));
            let x = if d0 == d1 { 0.5 } else { (d0 - target) / (d0 - d1) };
            let t = t0 + x.clamp(0.0, 1.0) * (t1 - t0);
            let floor = (t1 - t0).abs() * 1e-3;
            return t.max(floor).max(f64::MIN_POSITIVE);
        }
    }
    let span = pts[pts.len() - 1].0 - pts[0].0;
    (0.5 * span).max(f64::MIN_POSITIVE)
}

struct Eval {
    cost: f64,
    grad: [f64; 3],
    jtj: [[f64; 3]; 3],
}

fn evaluate(pts: &[(f64, f64)], x: [f64; 3]) -> Eval {
    let [p0, p_inf, u] = x;
    let tau = u.exp();
    let mut cost = 0.0;
    let mut grad = [0.0; 3];
    let mut jtj = [[0.0; 3]; 3];
    for &(t, p) in pts {
        let e = (-t / tau).exp();
        let r = p0 * e + p_inf - p;
        let j = [e, 1.0, p0 * e * t / tau];
        cost += r * r;
        for a in 0..3 {
            grad[a] += j[a] * r;
            for b in 0..3 {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    Eval { cost, grad, jtj }
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        out[c] = det(&mc) / d;
    }
    Some(out)
}

/// Levenberg-Marquardt fit over the full series.
pub fn fit_exponential(samples: &[(f64, f64)]) -> Result<RetentionFit> {
    fit_exponential_window(samples, FitWindow::default())
}

/// Levenberg-Marquardt fit restricted to `window`; `tau` is fitted as `exp(u)`.
pub fn fit_exponential_window(samples: &[(f64, f64)], window: FitWindow) -> Result<RetentionFit> {
    let pts = prepare(samples, window)?;
    let n = pts.len() as f64;
    let first = pts[0].1;
    let last = pts[pts.len() - 1].1;
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let spread = pts.iter().fold(0.0f64, |m, p| m.max((p.1 - mean).abs()));
    if spread <= 1e-12 * scale.max(f64::MIN_POSITIVE) || spread == 0.0 {
        let rmse = (pts.iter().map(|p| (p.1 - last).powi(2)).sum::<f64>() / n).sqrt();
        return Ok(RetentionFit {
            p0: 0.0,
            p_inf: last,
            tau: f64::NAN,
            rmse,
            n_iter: 0,
            converged: true,
            identifiable: false,
        });
    }

    let p0 = first - last;
    let mut x = [p0, last, initial_tau(&pts, p0, last).ln()];
    let mut cur = evaluate(&pts, x);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut n_iter = 0;
    let p_scale = spread.max(scale * 1e-12);
    while n_iter < MAX_ITER {
        n_iter += 1;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut m = cur.jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * cur.jtj[a][a].max(1e-30);
            }
            let Some(step) = solve3(m, [-cur.grad[0], -cur.grad[1], -cur.grad[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            let next = evaluate(&pts, trial);
            let rel = (step[0].abs() / p_scale).max(step[1].abs() / p_scale).max(step[2].abs());
            if next.cost.is_finite() && next.cost <= cur.cost {
                x = trial;
                cur = next;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if rel < STEP_TOL {
                    converged = true;
                }
                break;
            }
            if rel < STEP_TOL {
                // Even vanishing steps do not lower the cost: at the optimum.
                converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if converged || !accepted {
            break;
        }
    }
    if converged {
        // Near the minimum the cost only resolves the parameters to about
        // sqrt(eps); plain Gauss-Newton steps driven by the gradient settle
        // them to working precision.
        for _ in 0..4 {
            let Some(step) = solve3(cur.jtj, [-cur.grad[0], -cur.grad[1], -cur.grad[2]]) else { break };
            let trial = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            let next = evaluate(&pts, trial);
            if !(next.cost <= cur.cost * (1.0 + 1e-9)) {
                break;
            }
            x = trial;
            cur = next;
        }
    }
    let rmse = (cur.cost / n).sqrt();
    Ok(RetentionFit {
        p0: x[0],
        p_inf: x[1],
        tau: x[2].exp(),
        rmse,
        n_iter,
        converged,
        identifiable: true,
    })
}

/// Gradient of the half sum of squares at a fit, in (p0, p_inf, ln tau).
pub fn objective_gradient(samples: &[(f64, f64)], fit: &RetentionFit) -> [f64; 3] {
    evaluate(samples, [fit.p0, fit.p_inf, fit.tau.ln()]).grad
}
