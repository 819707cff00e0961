//! Virtual measurement protocols: PUND loops, switching kinetics, retention
//! and endurance cycling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::waveform::Waveform;
use crate::analysis::pund::{integrate_pund, CurrentTrace, PolLoop};
use crate::error::{Error, Result};
use crate::kinetics::{simulate, DeviceModel, RecordMode, SimOptions, SimState, TraceRecord};

/// Continuous triangular P-U-N-D train around a baseline voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PundConfig {
    /// One triangle takes half a period, Hz.
    pub frequency: f64,
    pub v_max: f64,
    pub v_min: f64,
    /// Baseline the triangles start from and return to, V.
    pub center: f64,
    /// Simulation steps per ramp.
    pub steps_per_ramp: usize,
    /// Run a positive and then a negative triangle before P, so the loop does
    /// not depend on the switching history of the device.
    pub precondition: bool,
}

impl Default for PundConfig {
    fn default() -> Self {
        PundConfig {
            frequency: 1e3,
            v_max: 2.5,
            v_min: -4.5,
            center: -1.0,
            steps_per_ramp: 1000,
            precondition: true,
        }
    }
}

impl PundConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(Error::Config("pund.frequency must be > 0".into()));
        }
        if !(self.v_max > self.center) || !(self.v_min < self.center) {
            return Err(Error::Config("pund needs v_min < center < v_max".into()));
        }
        if self.steps_per_ramp == 0 {
            return Err(Error::Config("pund.steps_per_ramp must be >= 1".into()));
        }
        Ok(())
    }

    fn ramp_time(&self) -> f64 {
        0.25 / self.frequency
    }
}

/// The four pulses only, starting and ending at `center`.
pub fn build_pund(cfg: &PundConfig) -> Result<Waveform> {
    cfg.validate()?;
    let half = 0.5 / cfg.frequency;
    let w = Waveform::starting_at(cfg.center, cfg.ramp_time() / cfg.steps_per_ramp as f64)
        .triangle(cfg.v_max, half)
        .triangle(cfg.v_max, half)
        .triangle(cfg.v_min, half)
        .triangle(cfg.v_min, half);
    w.validate()?;
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PundResult {
    pub trace: TraceRecord,
    pub switching: CurrentTrace,
    pub non_switching: CurrentTrace,
    pub loop_: PolLoop,
    /// Internal polarization (voltage-axis sign) at the end of P minus at the end of N.
    pub internal_two_pr: f64,
    /// Internal `ΔP(P) - ΔP(U)` and `ΔP(N) - ΔP(D)`, voltage-axis sign.
    pub internal_switched: (f64, f64),
}

/// Samples `a..=b` with the clock restarted at zero. The first sample carries
/// the current of the preceding segment, so it is replaced by the first step
/// inside the span.
fn slice_trace(rec: &TraceRecord, (a, b): (usize, usize)) -> CurrentTrace {
    let t0 = rec.t[a];
    let mut i = rec.i[a..=b].to_vec();
    if i.len() > 1 {
        i[0] = i[1];
    }
    CurrentTrace {
        t: rec.t[a..=b].iter().map(|t| t - t0).collect(),
        v: rec.v[a..=b].to_vec(),
        i,
    }
}

/// PUND on an existing device state, starting from 0 V.
pub fn run_pund_on(model: &DeviceModel, cfg: &PundConfig, state: &mut SimState, opts: &SimOptions) -> Result<PundResult> {
    let pulses = build_pund(cfg)?;
    let mut w = Waveform::starting_at(0.0, pulses.sample_dt);
    let mut first = 0;
    if cfg.center != 0.0 {
        w = w.ramp_to(cfg.center, cfg.ramp_time());
        first += 1;
    }
    if cfg.precondition {
        w = w.triangle(cfg.v_max, 0.5 / cfg.frequency).triangle(cfg.v_min, 0.5 / cfg.frequency);
        first += 4;
    }
    w = w.append(&pulses).ramp_to(0.0, cfg.ramp_time());
    let opts = SimOptions {
        min_steps_per_segment: cfg.steps_per_ramp,
        record: RecordMode::Every(1),
        ..*opts
    };
    let trace = simulate(&w, model, state, &opts)?;
    let span = |k: usize| trace.segment_span(first + 2 * k, first + 2 * k + 1);
    let (p, u, n, d) = (span(0), span(1), span(2), span(3));
    let mut sw = slice_trace(&trace, p);
    sw.extend_continuing(&slice_trace(&trace, n));
    let mut ns = slice_trace(&trace, u);
    ns.extend_continuing(&slice_trace(&trace, d));
    let loop_ = integrate_pund(&sw, &ns, model.stack.area)?;
    let chi = model.stack.polarity.sign();
    let dp = |(a, b): (usize, usize)| chi * (trace.p[b] - trace.p[a]);
    Ok(PundResult {
        internal_two_pr: chi * (trace.p[p.1] - trace.p[n.1]),
        internal_switched: (dp(p) - dp(u), dp(n) - dp(d)),
        switching: sw,
        non_switching: ns,
        loop_,
        trace,
    })
}

/// PUND on a pristine device.
pub fn run_pund(model: &DeviceModel, cfg: &PundConfig, opts: &SimOptions) -> Result<PundResult> {
    let mut state = model.initial_state()?;
    run_pund_on(model, cfg, &mut state, opts)
}

/// Rectangular pulse with linear edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub width: f64,
}

/// Preset, program, wait, then a switching/non-switching positive read pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadSequence {
    pub preset: PulseSpec,
    pub read: PulseSpec,
    /// Rise and fall time of every pulse, s.
    pub edge: f64,
    /// Rest at 0 V after the preset pulse, s.
    pub settle: f64,
    /// Rest at 0 V between the two read pulses, s.
    pub read_gap: f64,
    /// Steps per waveform segment.
    pub steps_per_segment: usize,
}

impl Default for ReadSequence {
    fn default() -> Self {
        ReadSequence {
            preset: PulseSpec { amplitude: 2.5, width: 200e-6 },
            read: PulseSpec { amplitude: 2.5, width: 200e-6 },
            edge: 100e-9,
            settle: 200e-6,
            read_gap: 10e-6,
            steps_per_segment: 1000,
        }
    }
}

impl ReadSequence {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("preset", self.preset), ("read", self.read)] {
            if !(p.width > 0.0) || !p.amplitude.is_finite() {
                return Err(Error::Config(format!("{name} pulse needs width > 0 and finite amplitude")));
            }
        }
        if !(self.read.amplitude > 0.0) || !(self.preset.amplitude > 0.0) {
            return Err(Error::Config("preset and read pulses must be positive".into()));
        }
        if !(self.edge > 0.0) || !(self.settle > 0.0) || !(self.read_gap > 0.0) {
            return Err(Error::Config("edge, settle and read_gap must be > 0".into()));
        }
        if self.steps_per_segment == 0 {
            return Err(Error::Config("steps_per_segment must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one program-and-read experiment (Landau coordinate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadOutcome {
    /// Internal polarization after preset and settle.
    pub stable: f64,
    /// Internal polarization at the end of the program pulse.
    pub programmed: f64,
    /// Internal polarization just before the first read.
    pub before_read: f64,
    /// Switched charge density of the read pair, voltage-axis sign.
    pub read_dp: f64,
    /// Polarization reconstructed from the read pair.
    pub measured: f64,
    /// Internal polarization after the first and after the second read.
    pub after_read1: f64,
    pub after_read2: f64,
}

/// Charge delivered between samples `a` and `b`. Every recorded current is
/// the average over the step that ends at its sample, so the sum is exact.
fn step_charge(rec: &TraceRecord, (a, b): (usize, usize)) -> f64 {
    (a + 1..=b).map(|k| rec.i[k] * (rec.t[k] - rec.t[k - 1])).sum()
}

/// Device state right after the program pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Programmed {
    pub state: SimState,
    /// Internal polarization after preset and settle.
    pub stable: f64,
    /// Internal polarization at the end of the program pulse.
    pub programmed: f64,
}

fn sequence_options(seq: &ReadSequence, opts: &SimOptions) -> SimOptions {
    SimOptions {
        min_steps_per_segment: seq.steps_per_segment,
        record: RecordMode::Every(1),
        ..*opts
    }
}

fn run_segmented(model: &DeviceModel, w: Waveform, state: &mut SimState, opts: &SimOptions) -> Result<TraceRecord> {
    let dt = opts.max_dt.unwrap_or(f64::INFINITY);
    simulate(&w.with_sample_dt(dt), model, state, opts)
}

/// Presets a fresh device toward P↓, lets it settle and applies `program`.
pub fn program_device(model: &DeviceModel, seq: &ReadSequence, program: PulseSpec, opts: &SimOptions) -> Result<Programmed> {
    seq.validate()?;
    if !(program.width > 0.0) || !program.amplitude.is_finite() {
        return Err(Error::Config("program pulse needs width > 0 and finite amplitude".into()));
    }
    let opts = sequence_options(seq, opts);
    let mut state = model.initial_state()?;
    let preset = Waveform::starting_at(0.0, 1.0)
        .pulse(seq.preset.amplitude, seq.preset.width, seq.edge)
        .hold(seq.settle);
    run_segmented(model, preset, &mut state, &opts)?;
    let stable = state.polarization();
    let pulse = Waveform::starting_at(0.0, 1.0).pulse(program.amplitude, program.width, seq.edge);
    run_segmented(model, pulse, &mut state, &opts)?;
    let programmed = state.polarization();
    Ok(Programmed { state, stable, programmed })
}

/// Holds a programmed device at 0 V for `delay` and reads it with the
/// switching/non-switching pulse pair.
pub fn hold_and_read(
    model: &DeviceModel,
    seq: &ReadSequence,
    programmed: &Programmed,
    delay: f64,
    opts: &SimOptions,
) -> Result<ReadOutcome> {
    if !(delay > 0.0) || !delay.is_finite() {
        return Err(Error::Config(format!("delay must be finite and > 0, got {delay}")));
    }
    let opts = sequence_options(seq, opts);
    let mut state = programmed.state.clone();
    run_segmented(model, Waveform::starting_at(0.0, 1.0).hold(delay), &mut state, &opts)?;
    let before_read = state.polarization();
    let reads = Waveform::starting_at(0.0, 1.0)
        .pulse(seq.read.amplitude, seq.read.width, seq.edge)
        .hold(seq.read_gap)
        .pulse(seq.read.amplitude, seq.read.width, seq.edge);
    let rec = run_segmented(model, reads, &mut state, &opts)?;
    let r1 = rec.segment_span(0, 2);
    let r2 = rec.segment_span(4, 6);
    let read_dp = (step_charge(&rec, r1) - step_charge(&rec, r2)) / model.stack.area;
    let after_read2 = state.polarization();
    let chi = model.stack.polarity.sign();
    Ok(ReadOutcome {
        stable: programmed.stable,
        programmed: programmed.programmed,
        before_read,
        read_dp,
        measured: after_read2 - chi * read_dp,
        after_read1: rec.p[r1.1],
        after_read2,
    })
}

/// Preset, program, hold and read on a fresh device.
pub fn program_and_read(
    model: &DeviceModel,
    seq: &ReadSequence,
    program: PulseSpec,
    delay: f64,
    opts: &SimOptions,
) -> Result<ReadOutcome> {
    let p = program_device(model, seq, program, opts)?;
    hold_and_read(model, seq, &p, delay, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionConfig {
    pub sequence: ReadSequence,
    pub program: PulseSpec,
    /// Strictly increasing hold times at 0 V, s.
    pub delays: Vec<f64>,
}

/// `n` logarithmically spaced points from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

impl Default for RetentionConfig {
    fn default() -> Self {
        RetentionConfig {
            sequence: ReadSequence::default(),
            program: PulseSpec { amplitude: -4.5, width: 50e-6 },
            delays: log_spaced(1e-6, 50e-3, 24),
        }
    }
}

impl RetentionConfig {
    pub fn validate(&self) -> Result<()> {
        self.sequence.validate()?;
        if self.delays.is_empty() {
            return Err(Error::Config("retention.delays must not be empty".into()));
        }
        if self.delays.windows(2).any(|w| !(w[1] > w[0])) || !(self.delays[0] > 0.0) {
            return Err(Error::Config("retention.delays must be positive and strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionPoint {
    pub delay: f64,
    /// Read-reconstructed polarization, Landau coordinate, C/m².
    pub p: f64,
    pub outcome: ReadOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionResult {
    pub points: Vec<RetentionPoint>,
    pub warnings: Vec<String>,
}

impl RetentionResult {
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.delay, p.p)).collect()
    }
}

fn read_warnings(model: &DeviceModel, label: &str, o: &ReadOutcome, out: &mut Vec<String>) -> Result<()> {
    let p_s = model.saturation_polarization()?;
    if o.read_dp.abs() > 2.0 * p_s * (1.0 + 1e-6) {
        out.push(format!("{label}: read charge {:.4e} C/m^2 exceeds 2 p_s", o.read_dp));
    }
    if (o.after_read1 - o.after_read2).abs() > 1e-3 * p_s {
        out.push(format!("{label}: read pulse did not saturate the device"));
    }
    Ok(())
}

/// Retention curve. Every delay continues from its own copy of the same
/// freshly programmed device, so the points are independent.
pub fn run_retention(model: &DeviceModel, cfg: &RetentionConfig, opts: &SimOptions) -> Result<RetentionResult> {
    cfg.validate()?;
    let programmed = program_device(model, &cfg.sequence, cfg.program, opts)?;
    let outcomes: Vec<ReadOutcome> = cfg
        .delays
        .par_iter()
        .map(|&d| hold_and_read(model, &cfg.sequence, &programmed, d, opts))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    let mut points = Vec::with_capacity(outcomes.len());
    for (&delay, o) in cfg.delays.iter().zip(outcomes) {
        read_warnings(model, &format!("delay {delay:e} s"), &o, &mut warnings)?;
        points.push(RetentionPoint { delay, p: o.measured, outcome: o });
    }
    Ok(RetentionResult { points, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticsConfig {
    pub sequence: ReadSequence,
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
    /// Hold between program pulse and read, s.
    pub read_delay: f64,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        KineticsConfig {
            sequence: ReadSequence::default(),
            amplitudes: vec![-3.5, -4.0, -4.5, -5.0, -5.5],
            widths: log_spaced(100e-9, 100e-3, 13),
            read_delay: 1e-6,
        }
    }
}

/// Normalized switched polarization `ΔP / 2Pr` per `[amplitude][width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticsResult {
    pub amplitudes: Vec<f64>,
    pub widths: Vec<f64>,
    pub switched: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl KineticsResult {
    /// Width at which the switched fraction of amplitude row `a` first
    /// reaches `level`, interpolated in log-width. `None` if never reached.
    pub fn width_at(&self, a: usize, level: f64) -> Option<f64> {
        let row = &self.switched[a];
        if row[0] >= level {
            return Some(self.widths[0]);
        }
        for k in 1..row.len() {
            if row[k] >= level {
                let x = (level - row[k - 1]) / (row[k] - row[k - 1]);
                let lw = self.widths[k - 1].ln() + x * (self.widths[k].ln() - self.widths[k - 1].ln());
                return Some(lw.exp());
            }
        }
        None
    }
}

pub fn run_kinetics(model: &DeviceModel, cfg: &KineticsConfig, opts: &SimOptions) -> Result<KineticsResult> {
    cfg.sequence.validate()?;
    if cfg.amplitudes.is_empty() || cfg.widths.is_empty() {
        return Err(Error::Config("kinetics grid must not be empty".into()));
    }
    let cells: Vec<(usize, usize)> = (0..cfg.amplitudes.len())
        .flat_map(|a| (0..cfg.widths.len()).map(move |w| (a, w)))
        .collect();
    let outcomes: Vec<ReadOutcome> = cells
        .par_iter()
        .map(|&(a, w)| {
            let pulse = PulseSpec { amplitude: cfg.amplitudes[a], width: cfg.widths[w] };
            program_and_read(model, &cfg.sequence, pulse, cfg.read_delay, opts)
        })
        .collect::<Result<_>>()?;
    let mut switched = vec![vec![0.0; cfg.widths.len()]; cfg.amplitudes.len()];
    let mut warnings = Vec::new();
    for (&(a, w), o) in cells.iter().zip(&outcomes) {
        read_warnings(model, &format!("{} V / {:e} s", cfg.amplitudes[a], cfg.widths[w]), o, &mut warnings)?;
        switched[a][w] = (o.measured - o.stable) / (2.0 * o.stable.abs());
    }
    Ok(KineticsResult {
        amplitudes: cfg.amplitudes.clone(),
        widths: cfg.widths.clone(),
        switched,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnduranceConfig {
    pub n_cycles: u64,
    pub frequency: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Cycle counts at which a PUND is taken; 0 means the pristine device.
    pub checkpoints: Vec<u64>,
    /// Rest at 0 V before each checkpoint PUND, s.
    pub relax_pause: f64,
    pub pund: PundConfig,
    /// Simulation steps per cycling ramp.
    pub steps_per_ramp: usize,
}

/// 0 and every power of ten up to `n`, plus `n` itself.
pub fn decade_checkpoints(n: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut c = 1u64;
    while c < n {
        if c >= 10 {
            out.push(c);
        }
        c = c.saturating_mul(10);
    }
    if n > 0 {
        out.push(n);
    }
    out
}

impl Default for EnduranceConfig {
    fn default() -> Self {
        EnduranceConfig {
            n_cycles: 100_000,
            frequency: 100e3,
            v_min: -4.5,
            v_max: 2.5,
            checkpoints: decade_checkpoints(100_000),
            relax_pause: 1e-3,
            pund: PundConfig::default(),
            steps_per_ramp: 16,
        }
    }
}

impl EnduranceConfig {
    pub fn validate(&self) -> Result<()> {
        self.pund.validate()?;
        if !(self.frequency > 0.0) {
            return Err(Error::Config("endurance.frequency must be > 0".into()));
        }
        if !(self.v_min < 0.0 && self.v_max > 0.0) {
            return Err(Error::Config("endurance needs v_min < 0 < v_max".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("endurance.checkpoints must be strictly increasing".into()));
        }
        if self.checkpoints.last().is_some_and(|&c| c > self.n_cycles) {
            return Err(Error::Config("endurance checkpoint beyond n_cycles".into()));
        }
        if !(self.relax_pause >= 0.0) || self.steps_per_ramp == 0 {
            return Err(Error::Config("endurance.relax_pause must be >= 0 and steps_per_ramp >= 1".into()));
        }
        Ok(())
    }

    /// `k` bipolar triangular cycles 0 → v_max → v_min → 0 at constant slew.
    fn cycles(&self, k: u64) -> Waveform {
        let period = 1.0 / self.frequency;
        let span = 2.0 * (self.v_max - self.v_min);
        let (t1, t2, t3) = (
            period * self.v_max / span,
            period * (self.v_max - self.v_min) / span,
            period * -self.v_min / span,
        );
        let mut w = Waveform::starting_at(0.0, f64::INFINITY);
        for _ in 0..k {
            w = w.ramp_to(self.v_max, t1).ramp_to(self.v_min, t2).ramp_to(0.0, t3);
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndurancePoint {
    pub cycles: u64,
    pub pr_pos: f64,
    pub pr_neg: f64,
    pub two_pr: f64,
    pub peak_v_pos: f64,
    pub peak_v_neg: f64,
}

const CYCLE_CHUNK: u64 = 1000;

pub fn run_endurance(model: &DeviceModel, cfg: &EnduranceConfig, opts: &SimOptions) -> Result<Vec<EndurancePoint>> {
    cfg.validate()?;
    let mut state = model.initial_state()?;
    let mut done = 0u64;
    let mut out = Vec::with_capacity(cfg.checkpoints.len());
    let cycle_opts = SimOptions {
        max_dt: None,
        min_steps_per_segment: cfg.steps_per_ramp,
        record: RecordMode::Endpoints,
    };
    for &c in &cfg.checkpoints {
        while done < c {
            let k = (c - done).min(CYCLE_CHUNK);
            simulate(&cfg.cycles(k), model, &mut state, &cycle_opts)?;
            done += k;
        }
        if cfg.relax_pause > 0.0 {
            let rest = Waveform::starting_at(0.0, f64::INFINITY).hold(cfg.relax_pause);
            simulate(&rest, model, &mut state, &SimOptions { min_steps_per_segment: 100, ..cycle_opts })?;
        }
        let r = run_pund_on(model, &cfg.pund, &mut state, opts)?;
        out.push(EndurancePoint {
            cycles: c,
            pr_pos: r.loop_.pr_pos,
            pr_neg: r.loop_.pr_neg,
            two_pr: r.loop_.two_pr(),
            peak_v_pos: r.loop_.peak_v_pos,
            peak_v_neg: r.loop_.peak_v_neg,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{Dynamics, EnsembleConfig};

    #[test]
    fn pund_duration_is_two_periods() {
        let w = build_pund(&PundConfig::default()).unwrap();
        assert!((w.duration() - 2e-3).abs() < 1e-15);
        assert_eq!(w.segments.len(), 8);
    }

    #[test]
    fn symmetric_pund_is_antisymmetric_in_time() {
        let cfg = PundConfig { center: 0.0, v_max: 3.0, v_min: -3.0, ..PundConfig::default() };
        let w = build_pund(&cfg).unwrap();
        let total = w.duration();
        for k in 0..=200 {
            let t = total * k as f64 / 200.0;
            assert!((w.voltage_at(t) + w.voltage_at(total - t)).abs() < 1e-9);
        }
    }

    #[test]
    fn pund_ramps_are_continuous() {
        let w = build_pund(&PundConfig::default()).unwrap();
        let (t, v) = w.sample().unwrap();
        let rate = 3.5 / 0.25e-3;
        for k in 1..t.len() {
            assert!((v[k] - v[k - 1]).abs() <= rate * (t[k] - t[k - 1]) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn frozen_ensemble_gives_no_remanence() {
        let model = DeviceModel {
            dynamics: Dynamics::Ensemble(EnsembleConfig { e_act_median: 1e14, ..EnsembleConfig::default() }),
            ..DeviceModel::default()
        };
        let cfg = PundConfig { steps_per_ramp: 200, ..PundConfig::default() };
        let r = run_pund(&model, &cfg, &SimOptions::default()).unwrap();
        assert!(r.loop_.two_pr().abs() < 1e-9 * model.saturation_polarization().unwrap(), "{}", r.loop_.two_pr());
    }

    #[test]
    fn decade_schedule() {
        assert_eq!(decade_checkpoints(100_000), vec![0, 10, 100, 1000, 10_000, 100_000]);
        assert_eq!(decade_checkpoints(0), vec![0]);
        assert_eq!(decade_checkpoints(50), vec![0, 10, 50]);
    }

    #[test]
    fn cycle_waveform_period() {
        let cfg = EnduranceConfig::default();
        let w = cfg.cycles(3);
        assert!((w.duration() - 3e-5).abs() < 1e-15);
        assert_eq!(w.end_voltage(), 0.0);
    }

    #[test]
    fn retention_rejects_unsorted_delays() {
        let cfg = RetentionConfig { delays: vec![1e-3, 1e-4], ..RetentionConfig::default() };
        assert!(run_retention(&DeviceModel::default(), &cfg, &SimOptions::default()).is_err());
    }
}
