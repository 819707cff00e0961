//! Loop extraction, retention fitting and τ maps.

pub mod fit;
pub mod pund;
pub mod taumap;

pub use fit::{fit_exponential, fit_exponential_window, FitWindow, RetentionFit};
pub use pund::{integrate_pund, CurrentTrace, PolLoop};
pub use taumap::{build_tau_map, correlate_tau_polarization, TauMap, TauPoint};
