//! Voltage programs, the terminal current model and measurement protocols.

pub mod current;
pub mod protocols;
pub mod waveform;

pub use current::{synthesize_current, LeakageParams};
pub use protocols::*;
pub use waveform::{Segment, SegmentKind, Waveform};
