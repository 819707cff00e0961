//! Run configuration files.
//!
//! The format is line oriented:
//!
//! ```text
//! # comment
//! seed = 7
//! [stack]
//! d_fe = 6.6nm
//! [protocol.retention]
//! delays = [1us, 10us, 100us, 1ms]
//! ```
//!
//! Values are numbers with an optional unit suffix, bare words (`auto`,
//! `true`, enum names), double-quoted strings, or single-line lists. Every
//! key has a physical dimension and only units of that dimension are
//! accepted; a bare number is taken in SI base units.

use std::fmt;

use fecap_core::energy::{Polarity, StackConfig};
use fecap_core::instrument::current::LeakageParams;
use fecap_core::instrument::{
    decade_checkpoints, log_spaced, EnduranceConfig, KineticsConfig, PulseSpec, PundConfig, ReadSequence,
    RetentionConfig,
};
use fecap_core::kinetics::lk::LkOptions;
use fecap_core::kinetics::{DeviceModel, Dynamics, EnsembleConfig, RecordMode, SimOptions};
use fecap_core::traps::TrapParams;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based position of the offending text, when there is one.
    pub location: Option<(usize, usize)>,
    /// Dotted key, e.g. `stack.d_fe`.
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        ConfigError { location: Some((line, column)), key: None, message: message.into() }
    }

    fn with_key(mut self, key: &str) -> Self {
        self.key = Some(key.to_string());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((l, c)) = self.location {
            write!(f, "line {l}, column {c}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    None,
    Length,
    Time,
    Voltage,
    Field,
    Frequency,
    Area,
    ChargeDensity,
    CurrentDensity,
    SheetDensity,
    Angle,
}

const UNITS: &[(&str, Dim, f64)] = &[
    ("m", Dim::Length, 1.0),
    ("cm", Dim::Length, 1e-2),
    ("mm", Dim::Length, 1e-3),
    ("um", Dim::Length, 1e-6),
    ("µm", Dim::Length, 1e-6),
    ("nm", Dim::Length, 1e-9),
    ("pm", Dim::Length, 1e-12),
    ("s", Dim::Time, 1.0),
    ("ms", Dim::Time, 1e-3),
    ("us", Dim::Time, 1e-6),
    ("µs", Dim::Time, 1e-6),
    ("ns", Dim::Time, 1e-9),
    ("ps", Dim::Time, 1e-12),
    ("V", Dim::Voltage, 1.0),
    ("mV", Dim::Voltage, 1e-3),
    ("kV", Dim::Voltage, 1e3),
    ("V/m", Dim::Field, 1.0),
    ("MV/m", Dim::Field, 1e6),
    ("V/cm", Dim::Field, 1e2),
    ("kV/cm", Dim::Field, 1e5),
    ("MV/cm", Dim::Field, 1e8),
    ("Hz", Dim::Frequency, 1.0),
    ("kHz", Dim::Frequency, 1e3),
    ("MHz", Dim::Frequency, 1e6),
    ("1/s", Dim::Frequency, 1.0),
    ("m2", Dim::Area, 1.0),
    ("m^2", Dim::Area, 1.0),
    ("cm2", Dim::Area, 1e-4),
    ("cm^2", Dim::Area, 1e-4),
    ("mm2", Dim::Area, 1e-6),
    ("mm^2", Dim::Area, 1e-6),
    ("um2", Dim::Area, 1e-12),
    ("um^2", Dim::Area, 1e-12),
    ("µm^2", Dim::Area, 1e-12),
    ("C/m2", Dim::ChargeDensity, 1.0),
    ("C/m^2", Dim::ChargeDensity, 1.0),
    ("uC/cm2", Dim::ChargeDensity, 1e-2),
    ("uC/cm^2", Dim::ChargeDensity, 1e-2),
    ("µC/cm^2", Dim::ChargeDensity, 1e-2),
    ("A/m2", Dim::CurrentDensity, 1.0),
    ("A/m^2", Dim::CurrentDensity, 1.0),
    ("A/cm2", Dim::CurrentDensity, 1e4),
    ("A/cm^2", Dim::CurrentDensity, 1e4),
    ("1/m2", Dim::SheetDensity, 1.0),
    ("1/m^2", Dim::SheetDensity, 1.0),
    ("1/cm2", Dim::SheetDensity, 1e4),
    ("1/cm^2", Dim::SheetDensity, 1e4),
    ("rad", Dim::Angle, 1.0),
    ("deg", Dim::Angle, std::f64::consts::PI / 180.0),
];

fn unit_factor(unit: &str, dim: Dim) -> Result<f64, String> {
    match UNITS.iter().find(|(u, _, _)| *u == unit) {
        None => Err(format!("unknown unit `{unit}`")),
        Some((_, d, f)) if *d == dim => Ok(*f),
        Some((_, d, _)) => Err(format!("unit `{unit}` is a {d:?} unit, expected {dim:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    Ensemble,
    Lk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSettings {
    /// Half-width of the polarization grid, C/m².
    pub d_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnduranceSettings {
    pub n_cycles: u64,
    pub frequency: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// `None` means every decade.
    pub checkpoints: Option<Vec<u64>>,
    pub relax_pause: f64,
    pub steps_per_ramp: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub widths: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub directory: Option<String>,
    pub formats: Vec<OutputFormat>,
}

/// Everything a subcommand needs, with defaults for every key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub dynamics: DynamicsKind,
    pub stack: StackConfig,
    /// Its `seed` is ignored; the top-level seed is used.
    pub ensemble: EnsembleConfig,
    pub lk_rho: f64,
    pub lk: LkOptions,
    pub traps: TrapParams,
    pub leakage: LeakageParams,
    /// Upper bound on the simulation step; `None` uses each protocol's own step count.
    pub max_dt: Option<f64>,
    pub landscape: LandscapeSettings,
    pub pund: PundConfig,
    pub read: ReadSequence,
    pub program: PulseSpec,
    pub delays: Vec<f64>,
    pub kinetics_amplitudes: Vec<f64>,
    pub kinetics_widths: Vec<f64>,
    pub kinetics_read_delay: f64,
    pub endurance: EnduranceSettings,
    pub sweep: SweepSettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ensemble = EnsembleConfig::default();
        let retention = RetentionConfig::default();
        let kinetics = KineticsConfig::default();
        let endurance = EnduranceConfig::default();
        RunConfig {
            seed: ensemble.seed,
            dynamics: DynamicsKind::Ensemble,
            stack: StackConfig::default(),
            ensemble,
            lk_rho: 100.0,
            lk: LkOptions::default(),
            traps: TrapParams::default(),
            leakage: LeakageParams::default(),
            max_dt: None,
            landscape: LandscapeSettings { d_max: 0.5, n_points: 401 },
            pund: PundConfig::default(),
            read: retention.sequence.clone(),
            program: retention.program,
            delays: retention.delays,
            kinetics_amplitudes: kinetics.amplitudes,
            kinetics_widths: kinetics.widths,
            kinetics_read_delay: kinetics.read_delay,
            endurance: EnduranceSettings {
                n_cycles: endurance.n_cycles,
                frequency: endurance.frequency,
                v_min: endurance.v_min,
                v_max: endurance.v_max,
                checkpoints: None,
                relax_pause: endurance.relax_pause,
                steps_per_ramp: endurance.steps_per_ramp,
            },
            sweep: SweepSettings {
                widths: log_spaced(1e-6, 1e-3, 8),
                amplitudes: vec![-3.5, -3.75, -4.0, -4.25, -4.5],
            },
            output: OutputSettings { directory: None, formats: vec![OutputFormat::Csv, OutputFormat::Jsonl] },
        }
    }
}

impl RunConfig {
    pub fn device_model(&self) -> DeviceModel {
        let dynamics = match self.dynamics {
            DynamicsKind::Ensemble => Dynamics::Ensemble(EnsembleConfig { seed: self.seed, ..self.ensemble }),
            DynamicsKind::Lk => Dynamics::Lk { rho: self.lk_rho, options: self.lk },
        };
        DeviceModel { stack: self.stack, dynamics, traps: self.traps, leakage: self.leakage }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions { max_dt: self.max_dt, record: RecordMode::Every(1), ..SimOptions::default() }
    }

    pub fn retention_config(&self) -> RetentionConfig {
        RetentionConfig { sequence: self.read.clone(), program: self.program, delays: self.delays.clone() }
    }

    pub fn kinetics_config(&self) -> KineticsConfig {
        KineticsConfig {
            sequence: self.read.clone(),
            amplitudes: self.kinetics_amplitudes.clone(),
            widths: self.kinetics_widths.clone(),
            read_delay: self.kinetics_read_delay,
        }
    }

    pub fn endurance_config(&self) -> EnduranceConfig {
        let e = &self.endurance;
        EnduranceConfig {
            n_cycles: e.n_cycles,
            frequency: e.frequency,
            v_min: e.v_min,
            v_max: e.v_max,
            checkpoints: e.checkpoints.clone().unwrap_or_else(|| decade_checkpoints(e.n_cycles)),
            relax_pause: e.relax_pause,
            pund: self.pund,
            steps_per_ramp: e.steps_per_ramp,
        }
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.output.formats.contains(&format)
    }

    /// Cross-field checks, reported against the section they concern.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sem = |key: &str, e: fecap_core::Error| ConfigError {
            location: None,
            key: Some(key.to_string()),
            message: e.to_string(),
        };
        let model = self.device_model();
        model.stack.validate().map_err(|e| sem("stack", e))?;
        fecap_core::energy::depolarization_factor(&model.stack).map_err(|e| sem("stack", e))?;
        model.traps.validate().map_err(|e| sem("traps", e))?;
        model.leakage.validate().map_err(|e| sem("leakage", e))?;
        model.validate().map_err(|e| sem(if self.dynamics == DynamicsKind::Lk { "lk" } else { "ensemble" }, e))?;
        self.pund.validate().map_err(|e| sem("protocol.pund", e))?;
        self.read.validate().map_err(|e| sem("protocol.read", e))?;
        self.retention_config().validate().map_err(|e| sem("protocol.retention", e))?;
        if self.kinetics_amplitudes.is_empty() || self.kinetics_widths.is_empty() {
            return Err(sem("protocol.kinetics", fecap_core::Error::Config("grid must not be empty".into())));
        }
        self.endurance_config().validate().map_err(|e| sem("protocol.endurance", e))?;
        if self.sweep.widths.is_empty() || self.sweep.amplitudes.is_empty() {
            return Err(sem("protocol.sweep", fecap_core::Error::Config("grid must not be empty".into())));
        }
        if self.landscape.n_points < 3 {
            return Err(sem("landscape.n_points", fecap_core::Error::Config("need at least 3 points".into())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Check {
    Any,
    Positive,
    NonNegative,
}

type Get<T> = fn(&RunConfig) -> T;
type Set<T> = fn(&mut RunConfig, T);

enum Slot {
    Num(Dim, Check, Get<f64>, Set<f64>),
    OptNum(Dim, Check, Get<Option<f64>>, Set<Option<f64>>),
    Int(Get<u64>, Set<u64>),
    Bool(Get<bool>, Set<bool>),
    List(Dim, Get<Vec<f64>>, Set<Vec<f64>>),
    OptIntList(Get<Option<Vec<u64>>>, Set<Option<Vec<u64>>>),
    Word(&'static [&'static str], Get<&'static str>, Set<&'static str>),
    WordList(&'static [&'static str], Get<Vec<&'static str>>, Set<Vec<&'static str>>),
    OptStr(Get<Option<String>>, Set<Option<String>>),
}

struct Field {
    section: &'static str,
    key: &'static str,
    slot: Slot,
}

macro_rules! num {
    ($s:literal, $k:literal, $dim:ident, $check:ident, $($f:tt)+) => {
        Field { section: $s, key: $k, slot: Slot::Num(Dim::$dim, Check::$check, |c| c.$($f)+, |c, v| c.$($f)+ = v) }
    };
}
macro_rules! int {
    ($s:literal, $k:literal, $($f:tt)+) => {
        Field { section: $s, key: $k, slot: Slot::Int(|c| c.$($f)+ as u64, |c, v| c.$($f)+ = v as _) }
    };
}
macro_rules! list {
    ($s:literal, $k:literal, $dim:ident, $($f:tt)+) => {
        Field { section: $s, key: $k, slot: Slot::List(Dim::$dim, |c| c.$($f)+.clone(), |c, v| c.$($f)+ = v) }
    };
}

const POLARITIES: &[&str] = &["positive", "negative"];
const DYNAMICS: &[&str] = &["ensemble", "lk"];
const FORMATS: &[&str] = &["csv", "jsonl"];

fn fields() -> Vec<Field> {
    vec![
        int!("", "seed", seed),
        Field {
            section: "",
            key: "dynamics",
            slot: Slot::Word(
                DYNAMICS,
                |c| match c.dynamics {
                    DynamicsKind::Ensemble => "ensemble",
                    DynamicsKind::Lk => "lk",
                },
                |c, w| c.dynamics = if w == "lk" { DynamicsKind::Lk } else { DynamicsKind::Ensemble },
            ),
        },
        num!("stack", "alpha", None, Any, stack.alpha),
        num!("stack", "beta", None, Positive, stack.beta),
        num!("stack", "theta", Angle, Any, stack.theta),
        num!("stack", "d_fe", Length, Positive, stack.d_fe),
        num!("stack", "eps_fe", None, Positive, stack.eps_fe),
        num!("stack", "d_int", Length, NonNegative, stack.d_int),
        num!("stack", "eps_int", None, NonNegative, stack.eps_int),
        num!("stack", "area", Area, Positive, stack.area),
        Field {
            section: "stack",
            key: "polarity",
            slot: Slot::Word(
                POLARITIES,
                |c| match c.stack.polarity {
                    Polarity::Positive => "positive",
                    Polarity::Negative => "negative",
                },
                |c, w| c.stack.polarity = if w == "positive" { Polarity::Positive } else { Polarity::Negative },
            ),
        },
        int!("ensemble", "n_domains", ensemble.n_domains),
        num!("ensemble", "e_act_median", Field, Positive, ensemble.e_act_median),
        num!("ensemble", "e_act_log_sigma", None, NonNegative, ensemble.e_act_log_sigma),
        num!("ensemble", "tau0", Time, Positive, ensemble.tau0),
        num!("ensemble", "merz_n", None, Positive, ensemble.merz_n),
        num!("ensemble", "down_tau0", Time, Positive, ensemble.down_tau0),
        num!("ensemble", "down_act_ratio", None, Positive, ensemble.down_act_ratio),
        num!("ensemble", "down_act_exponent", None, NonNegative, ensemble.down_act_exponent),
        Field {
            section: "ensemble",
            key: "p_s",
            slot: Slot::OptNum(Dim::ChargeDensity, Check::Positive, |c| c.ensemble.p_s, |c, v| c.ensemble.p_s = v),
        },
        num!("lk", "rho", None, Positive, lk_rho),
        num!("lk", "abs_tol", ChargeDensity, Positive, lk.abs_tol),
        int!("lk", "max_substeps", lk.max_substeps),
        num!("traps", "n_v", SheetDensity, NonNegative, traps.n_v),
        num!("traps", "c0", Frequency, NonNegative, traps.c0),
        num!("traps", "e0", Frequency, NonNegative, traps.e0),
        num!("traps", "v_c", Voltage, Positive, traps.v_c),
        num!("traps", "v_e", Voltage, Positive, traps.v_e),
        num!("traps", "kappa", None, NonNegative, traps.kappa),
        num!("traps", "slow_weight", None, NonNegative, traps.slow_weight),
        num!("traps", "slow_c0", Frequency, NonNegative, traps.slow_c0),
        num!("traps", "slow_e0", Frequency, NonNegative, traps.slow_e0),
        num!("traps", "slow_v_c", Voltage, Positive, traps.slow_v_c),
        num!("traps", "slow_v_e", Voltage, Positive, traps.slow_v_e),
        num!("traps", "deact_max", None, NonNegative, traps.deact_max),
        num!("traps", "deact_rate", Frequency, NonNegative, traps.deact_rate),
        num!("traps", "deact_v_th", Voltage, NonNegative, traps.deact_v_th),
        num!("traps", "deact_v_scale", Voltage, Positive, traps.deact_v_scale),
        num!("traps", "recovery_rate", Frequency, NonNegative, traps.recovery_rate),
        num!("traps", "recovery_v_scale", Voltage, Positive, traps.recovery_v_scale),
        num!("leakage", "j0", CurrentDensity, NonNegative, leakage.j0),
        num!("leakage", "v0p", Voltage, Positive, leakage.v0p),
        num!("leakage", "v0n", Voltage, Positive, leakage.v0n),
        Field {
            section: "sim",
            key: "max_dt",
            slot: Slot::OptNum(Dim::Time, Check::Positive, |c| c.max_dt, |c, v| c.max_dt = v),
        },
        num!("landscape", "d_max", ChargeDensity, Positive, landscape.d_max),
        int!("landscape", "n_points", landscape.n_points),
        num!("protocol.pund", "frequency", Frequency, Positive, pund.frequency),
        num!("protocol.pund", "v_max", Voltage, Any, pund.v_max),
        num!("protocol.pund", "v_min", Voltage, Any, pund.v_min),
        num!("protocol.pund", "center", Voltage, Any, pund.center),
        int!("protocol.pund", "steps_per_ramp", pund.steps_per_ramp),
        Field {
            section: "protocol.pund",
            key: "precondition",
            slot: Slot::Bool(|c| c.pund.precondition, |c, v| c.pund.precondition = v),
        },
        num!("protocol.read", "preset_amplitude", Voltage, Positive, read.preset.amplitude),
        num!("protocol.read", "preset_width", Time, Positive, read.preset.width),
        num!("protocol.read", "read_amplitude", Voltage, Positive, read.read.amplitude),
        num!("protocol.read", "read_width", Time, Positive, read.read.width),
        num!("protocol.read", "edge", Time, Positive, read.edge),
        num!("protocol.read", "settle", Time, Positive, read.settle),
        num!("protocol.read", "read_gap", Time, Positive, read.read_gap),
        int!("protocol.read", "steps_per_segment", read.steps_per_segment),
        num!("protocol.retention", "program_amplitude", Voltage, Any, program.amplitude),
        num!("protocol.retention", "program_width", Time, Positive, program.width),
        list!("protocol.retention", "delays", Time, delays),
        list!("protocol.kinetics", "amplitudes", Voltage, kinetics_amplitudes),
        list!("protocol.kinetics", "widths", Time, kinetics_widths),
        num!("protocol.kinetics", "read_delay", Time, Positive, kinetics_read_delay),
        int!("protocol.endurance", "n_cycles", endurance.n_cycles),
        num!("protocol.endurance", "frequency", Frequency, Positive, endurance.frequency),
        num!("protocol.endurance", "v_min", Voltage, Any, endurance.v_min),
        num!("protocol.endurance", "v_max", Voltage, Any, endurance.v_max),
        Field {
            section: "protocol.endurance",
            key: "checkpoints",
            slot: Slot::OptIntList(|c| c.endurance.checkpoints.clone(), |c, v| c.endurance.checkpoints = v),
        },
        num!("protocol.endurance", "relax_pause", Time, NonNegative, endurance.relax_pause),
        int!("protocol.endurance", "steps_per_ramp", endurance.steps_per_ramp),
        list!("protocol.sweep", "widths", Time, sweep.widths),
        list!("protocol.sweep", "amplitudes", Voltage, sweep.amplitudes),
        Field {
            section: "output",
            key: "directory",
            slot: Slot::OptStr(|c| c.output.directory.clone(), |c, v| c.output.directory = v),
        },
        Field {
            section: "output",
            key: "formats",
            slot: Slot::WordList(
                FORMATS,
                |c| {
                    c.output
                        .formats
                        .iter()
                        .map(|f| match f {
                            OutputFormat::Csv => "csv",
                            OutputFormat::Jsonl => "jsonl",
                        })
                        .collect()
                },
                |c, v| {
                    c.output.formats =
                        v.iter().map(|w| if *w == "csv" { OutputFormat::Csv } else { OutputFormat::Jsonl }).collect()
                },
            ),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
enum Scalar {
    Num { value: f64, unit: String },
    Word(String),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Scalar(Scalar),
    List(Vec<(Scalar, usize)>),
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(line: usize, src: &str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::at(self.line, self.col(), msg)
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        matches!(self.peek(), None | Some('#'))
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn scalar(&mut self) -> Result<Scalar, ConfigError> {
        self.skip_ws();
        match self.peek() {
            None | Some('#') => Err(self.err("missing value")),
            Some('"') => {
                self.pos += 1;
                let mut s = String::new();
                loop {
                    match self.peek() {
                        None => return Err(self.err("unterminated string")),
                        Some('"') => {
                            self.pos += 1;
                            return Ok(Scalar::Str(s));
                        }
                        Some('\\') => {
                            self.pos += 1;
                            match self.peek() {
                                Some(c @ ('"' | '\\')) => s.push(c),
                                _ => return Err(self.err("unsupported escape")),
                            }
                            self.pos += 1;
                        }
                        Some(c) => {
                            s.push(c);
                            self.pos += 1;
                        }
                    }
                }
            }
            Some(c) if c.is_ascii_digit() || c == '+' || c == '-' || c == '.' => {
                let start = self.pos;
                if matches!(self.peek(), Some('+' | '-')) {
                    self.pos += 1;
                }
                let digits = |cur: &mut Self| {
                    let s = cur.pos;
                    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                        cur.pos += 1;
                    }
                    cur.pos > s
                };
                let mut any = digits(self);
                if self.peek() == Some('.') {
                    self.pos += 1;
                    any |= digits(self);
                }
                if !any {
                    return Err(ConfigError::at(self.line, start + 1, "malformed number"));
                }
                if matches!(self.peek(), Some('e' | 'E')) {
                    let save = self.pos;
                    self.pos += 1;
                    if matches!(self.peek(), Some('+' | '-')) {
                        self.pos += 1;
                    }
                    if !digits(self) {
                        self.pos = save;
                    }
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                let value: f64 =
                    text.parse().map_err(|_| ConfigError::at(self.line, start + 1, "malformed number"))?;
                self.skip_ws();
                let u0 = self.pos;
                while self.peek().is_some_and(|c| !matches!(c, ',' | ']' | '#' | ' ' | '\t')) {
                    self.pos += 1;
                }
                let unit: String = self.chars[u0..self.pos].iter().collect();
                Ok(Scalar::Num { value, unit })
            }
            Some(c) if c.is_alphabetic() || c == '_' => Ok(Scalar::Word(self.ident())),
            Some(c) => Err(self.err(format!("unexpected character `{c}`"))),
        }
    }

    fn value(&mut self) -> Result<Value, ConfigError> {
        self.skip_ws();
        if self.peek() != Some('[') {
            return Ok(Value::Scalar(self.scalar()?));
        }
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(']') {
                self.pos += 1;
                return Ok(Value::List(items));
            }
            self.skip_ws();
            let col = self.col();
            items.push((self.scalar()?, col));
            self.skip_ws();
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(']') => {}
                _ => return Err(self.err("expected `,` or `]` in list")),
            }
        }
    }
}

fn number(s: &Scalar, dim: Dim) -> Result<f64, String> {
    match s {
        Scalar::Num { value, unit } => {
            let f = if unit.is_empty() { 1.0 } else { unit_factor(unit, dim)? };
            let v = value * f;
            if !v.is_finite() {
                return Err("value is not finite".into());
            }
            Ok(v)
        }
        _ => Err("expected a number".into()),
    }
}

fn integer(s: &Scalar) -> Result<u64, String> {
    match s {
        Scalar::Num { value, unit } if unit.is_empty() => {
            if *value >= 0.0 && value.fract() == 0.0 && *value < 2f64.powi(53) {
                Ok(*value as u64)
            } else {
                Err("expected a non-negative integer".into())
            }
        }
        _ => Err("expected a non-negative integer without unit".into()),
    }
}

fn word(s: &Scalar, allowed: &'static [&'static str]) -> Result<&'static str, String> {
    match s {
        Scalar::Word(w) => allowed
            .iter()
            .find(|a| **a == w.as_str())
            .copied()
            .ok_or_else(|| format!("expected one of {}", allowed.join(", "))),
        _ => Err(format!("expected one of {}", allowed.join(", "))),
    }
}

fn check(v: f64, c: Check) -> Result<f64, String> {
    match c {
        Check::Positive if !(v > 0.0) => Err("must be > 0".into()),
        Check::NonNegative if !(v >= 0.0) => Err("must be >= 0".into()),
        _ => Ok(v),
    }
}

fn is_auto(v: &Value) -> bool {
    matches!(v, Value::Scalar(Scalar::Word(w)) if w == "auto")
}

fn apply(cfg: &mut RunConfig, slot: &Slot, value: &Value, col: usize, line: usize) -> Result<(), ConfigError> {
    let at = |c: usize, m: String| ConfigError::at(line, c, m);
    let one = |v: &Value| -> Result<Scalar, ConfigError> {
        match v {
            Value::Scalar(s) => Ok(s.clone()),
            Value::List(_) => Err(at(col, "expected a single value, not a list".into())),
        }
    };
    let many = |v: &Value| -> Result<Vec<(Scalar, usize)>, ConfigError> {
        match v {
            Value::List(items) => Ok(items.clone()),
            Value::Scalar(s) => Ok(vec![(s.clone(), col)]),
        }
    };
    match slot {
        Slot::Num(dim, c, _, set) => {
            let v = number(&one(value)?, *dim).and_then(|v| check(v, *c)).map_err(|m| at(col, m))?;
            set(cfg, v);
        }
        Slot::OptNum(dim, c, _, set) => {
            if is_auto(value) {
                set(cfg, None);
            } else {
                let v = number(&one(value)?, *dim).and_then(|v| check(v, *c)).map_err(|m| at(col, m))?;
                set(cfg, Some(v));
            }
        }
        Slot::Int(_, set) => set(cfg, integer(&one(value)?).map_err(|m| at(col, m))?),
        Slot::Bool(_, set) => match one(value)? {
            Scalar::Word(w) if w == "true" => set(cfg, true),
            Scalar::Word(w) if w == "false" => set(cfg, false),
            _ => return Err(at(col, "expected true or false".into())),
        },
        Slot::List(dim, _, set) => {
            let mut out = Vec::new();
            for (s, c) in many(value)? {
                out.push(number(&s, *dim).map_err(|m| at(c, m))?);
            }
            set(cfg, out);
        }
        Slot::OptIntList(_, set) => {
            if is_auto(value) {
                set(cfg, None);
            } else {
                let mut out = Vec::new();
                for (s, c) in many(value)? {
                    out.push(integer(&s).map_err(|m| at(c, m))?);
                }
                set(cfg, Some(out));
            }
        }
        Slot::Word(allowed, _, set) => set(cfg, word(&one(value)?, allowed).map_err(|m| at(col, m))?),
        Slot::WordList(allowed, _, set) => {
            let mut out = Vec::new();
            for (s, c) in many(value)? {
                out.push(word(&s, allowed).map_err(|m| at(c, m))?);
            }
            set(cfg, out);
        }
        Slot::OptStr(_, set) => {
            if is_auto(value) {
                set(cfg, None);
            } else {
                match one(value)? {
                    Scalar::Str(s) => set(cfg, Some(s)),
                    _ => return Err(at(col, "expected a quoted string or auto".into())),
                }
            }
        }
    }
    Ok(())
}

fn dotted(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Applies the file on top of the defaults without cross-field validation.
pub fn parse_unchecked(text: &str) -> Result<RunConfig, ConfigError> {
    let table = fields();
    let sections: Vec<&str> = {
        let mut s: Vec<&str> = table.iter().map(|f| f.section).collect();
        s.dedup();
        s
    };
    let mut cfg = RunConfig::default();
    let mut section = String::new();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut cur = Cursor::new(line, raw);
        if cur.at_end() {
            continue;
        }
        if cur.peek() == Some('[') {
            cur.pos += 1;
            cur.skip_ws();
            let col = cur.col();
            let name = cur.ident();
            cur.skip_ws();
            if cur.peek() != Some(']') {
                return Err(cur.err("expected `]` after section name"));
            }
            cur.pos += 1;
            if !cur.at_end() {
                return Err(cur.err("unexpected text after section header"));
            }
            if name.is_empty() || !sections.contains(&name.as_str()) {
                return Err(ConfigError::at(line, col, format!("unknown section `{name}`")));
            }
            section = name;
            continue;
        }
        let col = cur.col();
        let key = cur.ident();
        if key.is_empty() {
            return Err(cur.err("expected a key"));
        }
        let full = dotted(&section, &key);
        let Some(field) = table.iter().find(|f| f.section == section && f.key == key) else {
            return Err(ConfigError::at(line, col, "unknown key").with_key(&full));
        };
        if seen.contains(&full) {
            return Err(ConfigError::at(line, col, "duplicate key").with_key(&full));
        }
        seen.push(full.clone());
        cur.skip_ws();
        if cur.peek() != Some('=') {
            return Err(cur.err("expected `=`").with_key(&full));
        }
        cur.pos += 1;
        cur.skip_ws();
        let vcol = cur.col();
        let value = cur.value().map_err(|e| e.with_key(&full))?;
        if !cur.at_end() {
            return Err(cur.err("unexpected text after value").with_key(&full));
        }
        apply(&mut cfg, &field.slot, &value, vcol, line).map_err(|e| e.with_key(&full))?;
    }
    Ok(cfg)
}

/// Parses and validates a configuration file; missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg = parse_unchecked(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Shortest text that parses back to exactly `v`.
fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_str(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn fmt_list<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    format!("[{}]", items.iter().map(f).collect::<Vec<_>>().join(", "))
}

/// Canonical text: every key, SI base units, fixed order.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut section = "";
    for f in fields() {
        if f.section != section {
            out.push_str(&format!("\n[{}]\n", f.section));
            section = f.section;
        }
        let v = match &f.slot {
            Slot::Num(_, _, get, _) => fmt_num(get(cfg)),
            Slot::OptNum(_, _, get, _) => get(cfg).map_or("auto".into(), fmt_num),
            Slot::Int(get, _) => get(cfg).to_string(),
            Slot::Bool(get, _) => get(cfg).to_string(),
            Slot::List(_, get, _) => fmt_list(&get(cfg), |v| fmt_num(*v)),
            Slot::OptIntList(get, _) => get(cfg).map_or("auto".into(), |v| fmt_list(&v, |x| x.to_string())),
            Slot::Word(_, get, _) => get(cfg).to_string(),
            Slot::WordList(_, get, _) => fmt_list(&get(cfg), |w| w.to_string()),
            Slot::OptStr(get, _) => get(cfg).map_or("auto".into(), |s| fmt_str(&s)),
        };
        out.push_str(&format!("{} = {}\n", f.key, v));
    }
    out.trim_start().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# nothing\n\n   \n").unwrap(), RunConfig::default());
    }

    #[test]
    fn unit_suffixes() {
        let c = parse_config("[stack]\nd_fe = 6.6nm\n").unwrap();
        assert_eq!(c.stack.d_fe, 6.6e-9);
        let c = parse_config("[protocol.retention]\nprogram_amplitude = -4.5V\nprogram_width = 50us\n").unwrap();
        assert_eq!(c.program.amplitude, -4.5);
        assert!((c.program.width - 50e-6).abs() < 1e-20);
        let c = parse_config("[ensemble]\ne_act_median = 90 MV/cm\n").unwrap();
        assert!((c.ensemble.e_act_median - 9e9).abs() < 1e-3);
        let c = parse_config("[stack]\narea = 625 um^2\n").unwrap();
        assert!((c.stack.area - 625e-12).abs() < 1e-24);
    }

    #[test]
    fn malformed_unit_names_key_and_position() {
        let e = parse_config("[stack]\nd_fe = 6.6nmm\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("stack.d_fe"));
        assert_eq!(e.location, Some((2, 8)));
        assert!(e.to_string().contains("stack.d_fe"), "{e}");
        assert!(e.message.contains("nmm"));
    }

    #[test]
    fn wrong_dimension_rejected() {
        let e = parse_config("[stack]\nd_fe = 6.6V\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("stack.d_fe"));
    }

    #[test]
    fn unknown_keys_and_sections_rejected_with_location() {
        let e = parse_config("seed = 1\n[stack]\n  dfe = 1nm\n").unwrap_err();
        assert_eq!(e.location, Some((3, 3)));
        assert_eq!(e.key.as_deref(), Some("stack.dfe"));
        let e = parse_config("[stak]\n").unwrap_err();
        assert_eq!(e.location, Some((1, 2)));
        let e = parse_config("[stack]\nd_fe = 1nm\nd_fe = 2nm\n").unwrap_err();
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let e = parse_config("[stack]\nd_fe = -1nm\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("stack.d_fe"));
        let e = parse_config("[protocol.retention]\ndelays = [1ms, 1us]\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("protocol.retention"));
    }

    #[test]
    fn lists_words_and_strings() {
        let text = "dynamics = lk\n[output]\ndirectory = \"runs/a \\\"b\\\"\"\nformats = [csv]\n\
                    [protocol.endurance]\ncheckpoints = [0, 10, 1e3]\nn_cycles = 1000\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.dynamics, DynamicsKind::Lk);
        assert_eq!(c.output.directory.as_deref(), Some("runs/a \"b\""));
        assert_eq!(c.output.formats, vec![OutputFormat::Csv]);
        assert_eq!(c.endurance.checkpoints, Some(vec![0, 10, 1000]));
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = RunConfig::default();
        let text = serialize_config(&c);
        assert_eq!(parse_config(&text).unwrap(), c);
    }

    proptest! {
        #[test]
        fn random_values_round_trip(
            nums in proptest::collection::vec(1e-6f64..1e6, 80),
            scales in proptest::collection::vec(-30i32..30, 80),
            list in proptest::collection::vec(1e-9f64..1.0, 0..6),
            seed in any::<u32>(),
            flag in any::<bool>(),
        ) {
            let mut c = RunConfig { seed: seed as u64, ..RunConfig::default() };
            c.pund.precondition = flag;
            let mut k = 0;
            for f in fields() {
                if let Slot::Num(_, _, _, set) = f.slot {
                    set(&mut c, nums[k % nums.len()] * 10f64.powi(scales[k % scales.len()]));
                    k += 1;
                }
            }
            c.delays = list.clone();
            c.ensemble.p_s = if flag { Some(nums[0].abs() + 1.0) } else { None };
            c.endurance.checkpoints = if flag { Some(vec![0, seed as u64]) } else { None };
            c.output.directory = flag.then(|| format!("out/{seed}\"x\""));
            let text = serialize_config(&c);
            let back = parse_unchecked(&text).unwrap();
            prop_assert_eq!(&back, &c);
            prop_assert_eq!(serialize_config(&back), text);
        }
    }
}
