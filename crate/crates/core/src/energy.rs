//! Landau-Devonshire free energy of the ferroelectric layer, internal field
//! composition and stationary-point analysis.
//!
//! Coordinate convention: the Landau coordinate `D` is positive for the
//! P↑ state, i.e. the state programmed by a *negative* voltage on the top
//! electrode. Applied voltages enter through the polarity constant
//! `chi = -1`, so `e_applied = chi * eta * V / d_fe`. The internal bias
//! field of the device is negative in this coordinate (it stabilizes P↓).

use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::error::{Error, Result};

/// Sign constant mapping applied voltage onto the Landau coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// Geometry, permittivities and Landau coefficients of the capacitor stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    /// Landau quadratic coefficient, J·m/C².
    pub alpha: f64,
    /// Landau quartic coefficient, J·m⁵/C⁴.
    pub beta: f64,
    /// Angle between polar axis and field, rad.
    pub theta: f64,
    /// Ferroelectric thickness, m.
    pub d_fe: f64,
    /// Relative permittivity of the ferroelectric background.
    pub eps_fe: f64,
    /// Interface (series) layer thickness, m. Zero means perfect screening.
    pub d_int: f64,
    /// Relative permittivity of the interface layer.
    pub eps_int: f64,
    /// Device area, m².
    pub area: f64,
    pub polarity: Polarity,
}

pub const TABLE_ALPHA: f64 = -2.242e8;
pub const TABLE_BETA: f64 = 2.170e9;
pub const TABLE_D_FE: f64 = 6.6e-9;
pub const TABLE_D_INT: f64 = 0.2e-9;
pub const TABLE_EPS_INT: f64 = 75.0;
/// Fixed-charge bias magnitude of the landscape presets (100 kV/cm).
pub const TABLE_E_BIAS: f64 = 1.0e7;
/// 25 µm × 25 µm.
pub const DEFAULT_AREA: f64 = 25e-6 * 25e-6;

impl Default for StackConfig {
    /// Calibrated device stack used by the dynamic simulations.
    ///
    /// The interface keeps the 0.2 nm thickness of the landscape presets but
    /// uses a well-screened (conductive NbOx) permittivity of 1000, which puts
    /// the saturated depolarization field well below the 1e7 V/m bias.
    fn default() -> Self {
        StackConfig {
            alpha: TABLE_ALPHA,
            beta: TABLE_BETA,
            theta: 0.0,
            d_fe: TABLE_D_FE,
            eps_fe: 30.0,
            d_int: TABLE_D_INT,
            eps_int: 1000.0,
            area: DEFAULT_AREA,
            polarity: Polarity::Negative,
        }
    }
}

/// The three landscape configurations used for the free-energy triptych.
///
/// Intrinsic has no interface layer; interface adds 0.2 nm at `eps_int = 75`;
/// the fixed-charge case adds the bias field on top of the interface stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LandscapePreset {
    Intrinsic,
    Interface,
    FixedChargeInterface,
}

impl LandscapePreset {
    pub const ALL: [LandscapePreset; 3] = [
        LandscapePreset::Intrinsic,
        LandscapePreset::Interface,
        LandscapePreset::FixedChargeInterface,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LandscapePreset::Intrinsic => "intrinsic",
            LandscapePreset::Interface => "interface",
            LandscapePreset::FixedChargeInterface => "fixed_charge_interface",
        }
    }

    pub fn stack(self) -> StackConfig {
        let base = StackConfig {
            eps_int: TABLE_EPS_INT,
            ..StackConfig::default()
        };
        match self {
            LandscapePreset::Intrinsic => StackConfig { d_int: 0.0, ..base },
            LandscapePreset::Interface | LandscapePreset::FixedChargeInterface => base,
        }
    }

    /// Bias field in the Landau coordinate (negative stabilizes P↓).
    pub fn e_bias(self) -> f64 {
        match self {
            LandscapePreset::FixedChargeInterface => -TABLE_E_BIAS,
            _ => 0.0,
        }
    }
}

impl StackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.beta > 0.0) {
            return bad("stack.beta must be > 0");
        }
        if !(self.d_fe > 0.0) {
            return bad("stack.d_fe must be > 0");
        }
        if !(self.area > 0.0) {
            return bad("stack.area must be > 0");
        }
        if !(self.d_int >= 0.0) {
            return bad("stack.d_int must be >= 0");
        }
        if !(self.eps_fe > 0.0) {
            return bad("stack.eps_fe must be > 0");
        }
        if self.d_int > 0.0 && !(self.eps_int > 0.0) {
            return bad("stack.eps_int must be > 0 when d_int > 0");
        }
        if !self.alpha.is_finite() || !self.theta.is_finite() {
            return bad("stack.alpha and stack.theta must be finite");
        }
        Ok(())
    }

    /// `sqrt(-alpha/beta)`, or `None` when the quadratic term is not negative.
    pub fn saturation_polarization(&self) -> Option<f64> {
        (self.alpha < 0.0 && self.beta > 0.0).then(|| (-self.alpha / self.beta).sqrt())
    }

    /// `C_s / C_FE`; area cancels. Infinite when there is no interface layer.
    pub fn capacitance_ratio(&self) -> f64 {
        if self.d_int == 0.0 {
            f64::INFINITY
        } else {
            (self.eps_int / self.d_int) / (self.eps_fe / self.d_fe)
        }
    }

    /// Fraction of the terminal voltage dropped across the ferroelectric.
    pub fn voltage_divider(&self) -> f64 {
        if self.d_int == 0.0 {
            1.0
        } else {
            let r = self.capacitance_ratio();
            r / (1.0 + r)
        }
    }

    /// Series-combined background relative permittivity of the whole stack.
    pub fn effective_permittivity(&self) -> f64 {
        if self.d_int == 0.0 {
            self.eps_fe
        } else {
            (self.d_fe + self.d_int) / (self.d_fe / self.eps_fe + self.d_int / self.eps_int)
        }
    }

    /// Background capacitance per unit area, F/m².
    pub fn capacitance_density(&self) -> f64 {
        EPS0 * self.effective_permittivity() / (self.d_fe + self.d_int)
    }

    /// Field in the Landau coordinate produced by a terminal voltage.
    pub fn applied_field(&self, v: f64) -> f64 {
        self.polarity.sign() * self.voltage_divider() * v / self.d_fe
    }
}

/// Composition of the internal and applied fields, V/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub e_applied: f64,
    pub e_dep: f64,
    pub e_bias: f64,
    pub e_total: f64,
}

impl FieldState {
    pub fn compose(e_applied: f64, e_dep: f64, e_bias: f64) -> Self {
        FieldState {
            e_applied,
            e_dep,
            e_bias,
            e_total: e_applied + e_bias + e_dep,
        }
    }
}

/// Magnitude of the interface depolarization factor, V·m/C.
///
/// Enters the free energy as `+gamma * D^2` so that the interface always
/// penalizes polarized states.
pub fn depolarization_factor(stack: &StackConfig) -> Result<f64> {
    if !(stack.d_fe > 0.0) {
        return Err(Error::Config("stack.d_fe must be > 0".into()));
    }
    if stack.d_int == 0.0 {
        return Ok(0.0);
    }
    if !(stack.eps_int > 0.0) {
        return Err(Error::Config(
            "stack.eps_int must be > 0 when d_int > 0 (depolarization factor divides by it)".into(),
        ));
    }
    Ok(stack.d_int / (stack.d_fe * EPS0 * stack.eps_int))
}

fn gamma_of(stack: &StackConfig) -> f64 {
    depolarization_factor(stack).unwrap_or(f64::INFINITY)
}

/// Free energy density, J/m³.
pub fn free_energy_density(d: f64, stack: &StackConfig, e_ext: f64, e_bias: f64) -> f64 {
    let gamma = gamma_of(stack);
    let d2 = d * d;
    0.5 * stack.alpha * d2 + 0.25 * stack.beta * d2 * d2 + gamma * d2
        - d * (e_ext + e_bias) * stack.theta.cos()
}

/// `-dF/dD`, V/m.
pub fn effective_field(d: f64, stack: &StackConfig, e_ext: f64, e_bias: f64) -> f64 {
    let gamma = gamma_of(stack);
    -(stack.alpha * d + stack.beta * d * d * d + 2.0 * gamma * d
        - (e_ext + e_bias) * stack.theta.cos())
}

fn curvature(d: f64, stack: &StackConfig) -> f64 {
    stack.alpha + 2.0 * gamma_of(stack) + 3.0 * stack.beta * d * d
}

/// Depolarization field from imperfect screening through the series
/// interface capacitance, V/m. Always antiparallel to `p`.
pub fn depolarization_field(p: f64, stack: &StackConfig) -> f64 {
    if stack.d_int == 0.0 {
        return 0.0;
    }
    -(p / (EPS0 * stack.eps_fe)) / (1.0 + stack.capacitance_ratio())
}

/// Internal field at zero applied voltage.
pub fn total_internal_field(p: f64, stack: &StackConfig, e_bias: f64) -> FieldState {
    FieldState::compose(0.0, depolarization_field(p, stack), e_bias)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationaryKind {
    Minimum,
    Maximum,
    Inflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub d: f64,
    pub kind: StationaryKind,
}

/// Real roots of `dF/dD = 0`, ascending, classified by curvature.
///
/// `dF/dD = 0` is the depressed cubic `D³ + p·D + q = 0` with
/// `p = (alpha + 2 gamma)/beta` and `q = -E cos(theta)/beta`.
pub fn stationary_points(stack: &StackConfig, e_ext: f64, e_bias: f64) -> Result<Vec<StationaryPoint>> {
    if !(stack.beta > 0.0) {
        return Err(Error::Config("stationary points need beta > 0".into()));
    }
    let gamma = depolarization_factor(stack)?;
    let a = stack.alpha + 2.0 * gamma;
    let h = (e_ext + e_bias) * stack.theta.cos();
    let p = a / stack.beta;
    let q = -h / stack.beta;

    let disc = 4.0 * p * p * p + 27.0 * q * q;
    let scale = (4.0 * p * p * p).abs().max(27.0 * q * q);
    let mut points = Vec::with_capacity(3);

    if scale == 0.0 || disc.abs() <= 1e-12 * scale {
        if p == 0.0 {
            points.push(StationaryPoint { d: 0.0, kind: StationaryKind::Inflection });
        } else {
            let simple = 3.0 * q / p;
            let double = -1.5 * q / p;
            points.push(StationaryPoint { d: double, kind: StationaryKind::Inflection });
            points.push(classify(polish(simple, p, q), stack));
        }
    } else if disc < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        for k in 0..3 {
            let root = m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos();
            points.push(classify(polish(root, p, q), stack));
        }
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let root = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
        points.push(classify(polish(root, p, q), stack));
    }
    points.sort_by(|x, y| x.d.total_cmp(&y.d));
    Ok(points)
}

fn polish(mut x: f64, p: f64, q: f64) -> f64 {
    for _ in 0..3 {
        let f = x * x * x + p * x + q;
        let df = 3.0 * x * x + p;
        if df == 0.0 {
            break;
        }
        let next = x - f / df;
        if !next.is_finite() {
            break;
        }
        x = next;
    }
    x
}

fn classify(d: f64, stack: &StackConfig) -> StationaryPoint {
    let c = curvature(d, stack);
    let kind = if c > 0.0 {
        StationaryKind::Minimum
    } else if c < 0.0 {
        StationaryKind::Maximum
    } else {
        StationaryKind::Inflection
    };
    StationaryPoint { d, kind }
}

/// Pointwise free energy over a grid of `D` values.
pub fn landscape_curve(stack: &StackConfig, e_ext: f64, e_bias: f64, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&d| (d, free_energy_density(d, stack, e_ext, e_bias)))
        .collect()
}

/// Evenly spaced grid on `[lo, hi]` with `n` points.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Energy barriers of a double-well landscape, J/m³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellSummary {
    /// Minimum on the P↑ side (`D > 0`).
    pub d_up: f64,
    /// Minimum on the P↓ side (`D < 0`).
    pub d_down: f64,
    pub f_up: f64,
    pub f_down: f64,
    /// Barrier to leave the P↑ well toward P↓.
    pub barrier_up_to_down: f64,
    /// Barrier to leave the P↓ well toward P↑.
    pub barrier_down_to_up: f64,
}

/// Summarizes a landscape with two minima; `None` when it has a single well.
pub fn well_summary(stack: &StackConfig, e_ext: f64, e_bias: f64) -> Result<Option<WellSummary>> {
    let pts = stationary_points(stack, e_ext, e_bias)?;
    let minima: Vec<f64> = pts
        .iter()
        .filter(|p| p.kind == StationaryKind::Minimum)
        .map(|p| p.d)
        .collect();
    let maximum = pts.iter().find(|p| p.kind == StationaryKind::Maximum);
    let (Some(max), [down, up]) = (maximum, minima.as_slice()) else {
        return Ok(None);
    };
    let f = |d: f64| free_energy_density(d, stack, e_ext, e_bias);
    let f_top = f(max.d);
    Ok(Some(WellSummary {
        d_up: *up,
        d_down: *down,
        f_up: f(*up),
        f_down: f(*down),
        barrier_up_to_down: f_top - f(*up),
        barrier_down_to_up: f_top - f(*down),
    }))
}
