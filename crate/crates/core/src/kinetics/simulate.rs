use serde::{Deserialize, Serialize};

use super::lk::{lk_step, LkOptions};
use super::{sample_ensemble, DomainEnsemble, EnsembleConfig};
use crate::energy::{depolarization_factor, depolarization_field, StackConfig};
use crate::error::{Error, Result};
use crate::instrument::current::{synthesize_current, LeakageParams};
use crate::instrument::waveform::Waveform;
use crate::traps::{bias_field, TrapParams, TrapState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dynamics {
    Ensemble(EnsembleConfig),
    /// Single-domain gradient flow with viscosity `rho`, Ω·m.
    Lk { rho: f64, options: LkOptions },
}

/// Everything needed to simulate one capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub stack: StackConfig,
    pub dynamics: Dynamics,
    pub traps: TrapParams,
    pub leakage: LeakageParams,
}

impl Default for DeviceModel {
    fn default() -> Self {
        DeviceModel {
            stack: StackConfig::default(),
            dynamics: Dynamics::Ensemble(EnsembleConfig::default()),
            traps: TrapParams::default(),
            leakage: LeakageParams::default(),
        }
    }
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        self.stack.validate()?;
        depolarization_factor(&self.stack)?;
        self.traps.validate()?;
        self.leakage.validate()?;
        match &self.dynamics {
            Dynamics::Ensemble(cfg) => {
                cfg.validate()?;
                cfg.saturation_polarization(&self.stack)?;
            }
            Dynamics::Lk { rho, .. } => {
                if !(*rho > 0.0) {
                    return Err(Error::Config("lk.rho must be > 0".into()));
                }
                if self.stack.saturation_polarization().is_none() {
                    return Err(Error::Config("lk dynamics need stack.alpha < 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn saturation_polarization(&self) -> Result<f64> {
        match &self.dynamics {
            Dynamics::Ensemble(cfg) => cfg.saturation_polarization(&self.stack),
            Dynamics::Lk { .. } => self
                .stack
                .saturation_polarization()
                .ok_or_else(|| Error::Config("lk dynamics need stack.alpha < 0".into())),
        }
    }

    /// Pristine device: fully P↓ with traps at rest.
    pub fn initial_state(&self) -> Result<SimState> {
        self.validate()?;
        let p_s = self.saturation_polarization()?;
        let pol = match &self.dynamics {
            Dynamics::Ensemble(cfg) => PolarizationState::Ensemble(sample_ensemble(cfg, p_s)?),
            Dynamics::Lk { .. } => PolarizationState::Lk { d: -p_s },
        };
        Ok(SimState {
            pol,
            traps: self.traps.rest_state(),
            t: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolarizationState {
    Ensemble(DomainEnsemble),
    Lk { d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub pol: PolarizationState,
    pub traps: TrapState,
    /// Elapsed simulated time, s.
    pub t: f64,
}

impl SimState {
    /// Landau-coordinate polarization, C/m².
    pub fn polarization(&self) -> f64 {
        match &self.pol {
            PolarizationState::Ensemble(e) => e.polarization(),
            PolarizationState::Lk { d } => *d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordMode {
    /// Every n-th step plus every segment boundary.
    Every(usize),
    /// Only the first and last sample.
    Endpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Upper bound on the step; `None` uses the waveform's `sample_dt`.
    pub max_dt: Option<f64>,
    /// Lower bound on the number of steps per segment.
    pub min_steps_per_segment: usize,
    pub record: RecordMode,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_dt: None,
            min_steps_per_segment: 1000,
            record: RecordMode::Every(1),
        }
    }
}

/// Sampled time series of one simulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    /// Terminal current, A. Each value is the average over the step ending at
    /// that sample; the first sample repeats the first step.
    pub i: Vec<f64>,
    /// Landau-coordinate polarization, C/m².
    pub p: Vec<f64>,
    pub e_app: Vec<f64>,
    pub e_dep: Vec<f64>,
    pub e_bias: Vec<f64>,
    pub f_occ: Vec<f64>,
    /// Sample index at which each waveform segment begins.
    pub segment_starts: Vec<usize>,
}

impl TraceRecord {
    pub const COLUMNS: [&'static str; 8] = [
        "t_s",
        "V_V",
        "I_A",
        "P_C_per_m2",
        "E_app_V_per_m",
        "E_dep_V_per_m",
        "E_bias_V_per_m",
        "f_occ",
    ];

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, k: usize) -> [f64; 8] {
        [
            self.t[k],
            self.v[k],
            self.i[k],
            self.p[k],
            self.e_app[k],
            self.e_dep[k],
            self.e_bias[k],
            self.f_occ[k],
        ]
    }

    /// Sample range `[start, end]` covering segments `first..=last`.
    pub fn segment_span(&self, first: usize, last: usize) -> (usize, usize) {
        let start = self.segment_starts[first];
        let end = self.segment_starts.get(last + 1).copied().unwrap_or(self.len() - 1);
        (start, end)
    }

    fn push(&mut self, row: [f64; 8]) {
        self.t.push(row[0]);
        self.v.push(row[1]);
        self.i.push(row[2]);
        self.p.push(row[3]);
        self.e_app.push(row[4]);
        self.e_dep.push(row[5]);
        self.e_bias.push(row[6]);
        self.f_occ.push(row[7]);
    }
}

fn dep_field(pol: &PolarizationState, stack: &StackConfig, gamma: f64) -> f64 {
    match pol {
        PolarizationState::Ensemble(e) => depolarization_field(e.polarization(), stack),
        PolarizationState::Lk { d } => -2.0 * gamma * d,
    }
}

/// Runs `waveform` on the device, mutating `state`.
///
/// Each segment is split into `max(min_steps_per_segment, ceil(duration /
/// max_dt))` equal steps. A step evaluates the traps at its midpoint and uses
/// a predictor half step for the depolarization feedback, then relaxes the
/// ensemble exactly under the corrected field.
pub fn simulate(
    waveform: &Waveform,
    model: &DeviceModel,
    state: &mut SimState,
    opts: &SimOptions,
) -> Result<TraceRecord> {
    waveform.validate()?;
    let max_dt = opts.max_dt.unwrap_or(waveform.sample_dt);
    if !(max_dt > 0.0) {
        return Err(Error::Config(format!("time step must be > 0, got {max_dt}")));
    }
    if opts.min_steps_per_segment == 0 {
        return Err(Error::Config("min_steps_per_segment must be >= 1".into()));
    }
    let stack = &model.stack;
    let gamma = depolarization_factor(stack)?;
    let chi = stack.polarity.sign();
    let gap = stack.d_fe + stack.d_int;
    let every = match opts.record {
        RecordMode::Every(n) => n.max(1),
        RecordMode::Endpoints => usize::MAX,
    };

    let mut rec = TraceRecord::default();
    let v0 = waveform.start_voltage();
    let sample = |state: &SimState, v: f64, i: f64| -> [f64; 8] {
        [
            state.t,
            v,
            i,
            state.polarization(),
            stack.applied_field(v),
            dep_field(&state.pol, stack, gamma),
            bias_field(&state.traps, &model.traps, stack),
            state.traps.f_occ(&model.traps),
        ]
    };
    rec.push(sample(state, v0, f64::NAN));

    let n_segments = waveform.segments.len();
    let mut step_count = 0usize;
    for (si, seg) in waveform.segments.iter().enumerate() {
        if every != usize::MAX {
            rec.segment_starts.push(rec.len() - 1);
        }
        let n = ((seg.duration / max_dt).ceil() as usize).max(opts.min_steps_per_segment);
        let dt = seg.duration / n as f64;
        let seg_t0 = state.t;
        for k in 0..n {
            let va = seg.voltage_at(k as f64 * dt);
            let vb = seg.voltage_at((k + 1) as f64 * dt);
            let vm = seg.voltage_at((k as f64 + 0.5) * dt);
            let e_app = stack.applied_field(vm);
            let mut traps_half = state.traps;
            traps_half.advance(vm, &model.traps, 0.5 * dt);
            let e_bias = bias_field(&traps_half, &model.traps, stack);
            let p0 = state.polarization();
            match (&mut state.pol, &model.dynamics) {
                (PolarizationState::Ensemble(ens), Dynamics::Ensemble(_)) => {
                    let e0 = e_app + depolarization_field(p0, stack) + e_bias;
                    let pm = ens.predict(e0, 0.5 * dt);
                    let em = e_app + depolarization_field(pm, stack) + e_bias;
                    ens.step(em, dt);
                }
                (PolarizationState::Lk { d }, Dynamics::Lk { rho, options }) => {
                    *d = lk_step(*d, stack, e_app, e_bias, *rho, dt, state.t, options)?;
                }
                _ => return Err(Error::Config("state does not match the dynamics model".into())),
            }
            state.traps.advance(vm, &model.traps, dt);
            state.t = seg_t0 + (k + 1) as f64 * dt;
            let p1 = state.polarization();
            if !p1.is_finite() {
                return Err(Error::Numerical(format!("polarization became non-finite at t = {:e} s", state.t)));
            }
            step_count += 1;
            let last = si + 1 == n_segments && k + 1 == n;
            let boundary = k + 1 == n && every != usize::MAX;
            if last || boundary || step_count.is_multiple_of(every) {
                let i = synthesize_current(chi * (p1 - p0) / dt, (vb - va) / dt / gap, vm, stack, &model.leakage);
                rec.push(sample(state, vb, i));
            }
        }
    }
    if rec.len() > 1 {
        rec.i[0] = rec.i[1];
    } else {
        rec.i[0] = stack.area * model.leakage.density(v0);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_model() -> DeviceModel {
        DeviceModel {
            traps: TrapParams { kappa: 0.0, ..TrapParams::default() },
            ..DeviceModel::default()
        }
    }

    #[test]
    fn programming_pulse_switches_and_respects_bounds() {
        let model = DeviceModel::default();
        let mut state = model.initial_state().unwrap();
        let p_s = model.saturation_polarization().unwrap();
        let w = Waveform::starting_at(0.0, 1e-8).pulse(-4.5, 10e-6, 100e-9).hold(1e-6);
        let before = state.polarization();
        let rec = simulate(&w, &model, &mut state, &SimOptions::default()).unwrap();
        assert!(state.polarization() - before > 0.1 * p_s);
        assert!(rec.p.iter().all(|p| p.abs() <= p_s * (1.0 + 1e-9)));
        assert_eq!(rec.segment_starts.len(), 4);
        assert!(rec.e_dep.iter().zip(&rec.p).all(|(e, p)| e * p <= 0.0));
    }

    #[test]
    fn zero_voltage_keeps_stable_state() {
        let model = DeviceModel::default();
        let mut state = model.initial_state().unwrap();
        let p0 = state.polarization();
        let w = Waveform::starting_at(0.0, 1e-4).hold(1e-2);
        simulate(&w, &model, &mut state, &SimOptions::default()).unwrap();
        assert_eq!(state.polarization(), p0);
    }

    #[test]
    fn endpoints_mode_records_two_samples() {
        let model = quiet_model();
        let mut state = model.initial_state().unwrap();
        let w = Waveform::starting_at(0.0, 1e-7).triangle(2.0, 1e-5).triangle(-2.0, 1e-5);
        let opts = SimOptions { record: RecordMode::Endpoints, min_steps_per_segment: 10, ..SimOptions::default() };
        let rec = simulate(&w, &model, &mut state, &opts).unwrap();
        assert_eq!(rec.len(), 2);
        assert!(rec.segment_starts.is_empty());
        assert!((rec.t[1] - 2e-5).abs() < 1e-18);
    }

    #[test]
    fn lk_mode_switches_under_strong_field() {
        let model = DeviceModel {
            dynamics: Dynamics::Lk { rho: 1.0, options: LkOptions::default() },
            ..quiet_model()
        };
        let mut state = model.initial_state().unwrap();
        let w = Waveform::starting_at(0.0, 1e-9).pulse(-4.5, 1e-7, 1e-8).hold(1e-7);
        let opts = SimOptions { min_steps_per_segment: 50, ..SimOptions::default() };
        simulate(&w, &model, &mut state, &opts).unwrap();
        assert!(state.polarization() > 0.0);
    }

    #[test]
    fn rejects_bad_waveform() {
        let model = quiet_model();
        let mut state = model.initial_state().unwrap();
        let w = Waveform::starting_at(0.0, 1e-7).ramp_to(f64::INFINITY, 1e-6);
        assert!(matches!(
            simulate(&w, &model, &mut state, &SimOptions::default()),
            Err(Error::Waveform(_))
        ));
    }
}
