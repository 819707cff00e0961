//! Piecewise-linear voltage programs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Ramp,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub v_start: f64,
    pub v_end: f64,
    pub duration: f64,
}

impl Segment {
    pub fn voltage_at(&self, tau: f64) -> f64 {
        match self.kind {
            SegmentKind::Hold => self.v_start,
            SegmentKind::Ramp => {
                let x = (tau / self.duration).clamp(0.0, 1.0);
                self.v_start + (self.v_end - self.v_start) * x
            }
        }
    }
}

/// Contiguous sequence of ramps and holds with a nominal sampling interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub segments: Vec<Segment>,
    /// Sampling interval used by [`Waveform::sample`] and as the default
    /// upper bound of the simulation time step, s.
    pub sample_dt: f64,
    start: f64,
}

impl Waveform {
    pub fn starting_at(v0: f64, sample_dt: f64) -> Self {
        Waveform {
            segments: Vec::new(),
            sample_dt,
            start: v0,
        }
    }

    pub fn with_sample_dt(mut self, sample_dt: f64) -> Self {
        self.sample_dt = sample_dt;
        self
    }

    pub fn end_voltage(&self) -> f64 {
        self.segments.last().map_or(self.start, |s| s.v_end)
    }

    pub fn start_voltage(&self) -> f64 {
        self.start
    }

    pub fn ramp_to(mut self, v: f64, duration: f64) -> Self {
        let v_start = self.end_voltage();
        self.segments.push(Segment {
            kind: SegmentKind::Ramp,
            v_start,
            v_end: v,
            duration,
        });
        self
    }

    pub fn hold(mut self, duration: f64) -> Self {
        let v = self.end_voltage();
        self.segments.push(Segment {
            kind: SegmentKind::Hold,
            v_start: v,
            v_end: v,
            duration,
        });
        self
    }

    /// Trapezoidal pulse from the current level to `amplitude` and back.
    pub fn pulse(self, amplitude: f64, width: f64, edge: f64) -> Self {
        let base = self.end_voltage();
        self.ramp_to(amplitude, edge).hold(width).ramp_to(base, edge)
    }

    /// Triangular excursion to `peak` and back in `duration`.
    pub fn triangle(self, peak: f64, duration: f64) -> Self {
        let base = self.end_voltage();
        self.ramp_to(peak, 0.5 * duration).ramp_to(base, 0.5 * duration)
    }

    pub fn append(mut self, other: &Waveform) -> Self {
        self.segments.extend_from_slice(&other.segments);
        self
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start time of every segment.
    pub fn segment_starts(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                start
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_dt > 0.0) {
            return Err(Error::Waveform(format!("sample_dt must be > 0, got {}", self.sample_dt)));
        }
        if !self.start.is_finite() {
            return Err(Error::Waveform("start voltage is not finite".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::Waveform("no segments".into()));
        }
        let mut prev = self.start;
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(Error::Waveform(format!("segment {i}: duration must be finite and > 0")));
            }
            if !s.v_start.is_finite() || !s.v_end.is_finite() {
                return Err(Error::Waveform(format!("segment {i}: non-finite voltage")));
            }
            if s.v_start != prev {
                return Err(Error::Waveform(format!(
                    "segment {i}: starts at {} V but previous segment ends at {prev} V",
                    s.v_start
                )));
            }
            if s.kind == SegmentKind::Hold && s.v_end != s.v_start {
                return Err(Error::Waveform(format!("segment {i}: hold changes voltage")));
            }
            prev = s.v_end;
        }
        Ok(())
    }

    pub fn voltage_at(&self, t: f64) -> f64 {
        let mut t0 = 0.0;
        for s in &self.segments {
            if t <= t0 + s.duration {
                return s.voltage_at(t - t0);
            }
            t0 += s.duration;
        }
        self.end_voltage()
    }

    /// Uniform samples at `k * sample_dt` spanning the whole program.
    pub fn sample(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let total = self.duration();
        let n = (total / self.sample_dt * (1.0 + 1e-12)).floor() as usize;
        let mut ts = Vec::with_capacity(n + 1);
        let mut vs = Vec::with_capacity(n + 1);
        let mut seg = 0usize;
        let mut seg_t0 = 0.0;
        for k in 0..=n {
            let t = k as f64 * self.sample_dt;
            while seg + 1 < self.segments.len() && t > seg_t0 + self.segments[seg].duration {
                seg_t0 += self.segments[seg].duration;
                seg += 1;
            }
            ts.push(t);
            vs.push(self.segments[seg].voltage_at(t - seg_t0));
        }
        Ok((ts, vs))
    }
}
