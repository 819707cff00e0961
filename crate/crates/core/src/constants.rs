//! Physical constants (SI).

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Elementary charge, C.
pub const Q_E: f64 = 1.602_176_634e-19;
