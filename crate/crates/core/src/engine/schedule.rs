use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{C64, ZERO};

/// One constant-envelope piece of a drive schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub omega_q: C64,
    pub omega_r: C64,
}

impl Segment {
    pub fn new(duration: f64, omega_q: C64, omega_r: C64) -> Self {
        Self {
            duration,
            omega_q,
            omega_r,
        }
    }
}

/// Piecewise-constant complex envelopes for the qubit and resonator drives,
/// both at the common drive frequency.
///
/// A non-zero `rise_time` replaces each step between consecutive segments
/// (and the initial switch-on) with a raised-cosine ramp that starts at the
/// segment boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub rise_time: f64,
}

impl PulseSchedule {
    pub fn new(segments: Vec<Segment>, rise_time: f64) -> Result<Self> {
        let s = Self {
            segments,
            rise_time,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(duration: f64, omega_q: C64, omega_r: C64) -> Result<Self> {
        Self::new(vec![Segment::new(duration, omega_q, omega_r)], 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidSchedule("no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration.is_finite() && s.duration > 0.0) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} has non-positive duration {}",
                    s.duration
                )));
            }
            if !(s.omega_q.is_finite() && s.omega_r.is_finite()) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} has a non-finite amplitude"
                )));
            }
        }
        if !(self.rise_time.is_finite() && self.rise_time >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "rise_time {} must be non-negative",
                self.rise_time
            )));
        }
        let shortest = self
            .segments
            .iter()
            .map(|s| s.duration)
            .fold(f64::INFINITY, f64::min);
        if self.rise_time > shortest / 2.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidSchedule(format!(
                "rise_time {:.3e} s exceeds half the shortest segment ({:.3e} s)",
                self.rise_time, shortest
            )));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Start time of every segment followed by the end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        b.push(t);
        for s in &self.segments {
            t += s.duration;
            b.push(t);
        }
        b
    }

    /// Drive amplitudes `(Ω_q, Ω_r)` at local time `tau` inside segment `index`.
    pub fn drives_in_segment(&self, index: usize, tau: f64) -> (C64, C64) {
        let seg = &self.segments[index];
        if self.rise_time > 0.0 && tau < self.rise_time {
            let (pq, pr) = self.previous(index);
            let w = 0.5 * (1.0 - (PI * tau / self.rise_time).cos());
            (pq + (seg.omega_q - pq) * w, pr + (seg.omega_r - pr) * w)
        } else {
            (seg.omega_q, seg.omega_r)
        }
    }

    /// Drive amplitudes at absolute time `t`; zero outside the schedule.
    pub fn drives_at(&self, t: f64) -> (C64, C64) {
        if t < 0.0 {
            return (ZERO, ZERO);
        }
        let mut start = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if t < start + s.duration {
                return self.drives_in_segment(i, t - start);
            }
            start += s.duration;
        }
        (ZERO, ZERO)
    }

    fn previous(&self, index: usize) -> (C64, C64) {
        if index == 0 {
            (ZERO, ZERO)
        } else {
            let p = &self.segments[index - 1];
            (p.omega_q, p.omega_r)
        }
    }

    /// Largest `|Ω_q| + |Ω_r|` over all segments.
    pub fn max_drive(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.omega_q.norm() + s.omega_r.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|dΩ_q/dt|` of the ramps. For sharp steps the jump is spread
    /// over one integrator step `dt`.
    pub fn max_qubit_slew(&self, dt: f64) -> f64 {
        (0..self.segments.len())
            .map(|i| {
                let jump = (self.segments[i].omega_q - self.previous(i).0).norm();
                if self.rise_time > 0.0 {
                    jump * PI / (2.0 * self.rise_time)
                } else {
                    jump / dt
                }
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_segments() {
        assert!(PulseSchedule::constant(0.0, ZERO, ZERO).is_err());
        assert!(PulseSchedule::constant(-1e-9, ZERO, ZERO).is_err());
        let segs = vec![
            Segment::new(10e-9, ZERO, ZERO),
            Segment::new(4e-9, ZERO, ZERO),
        ];
        assert!(PulseSchedule::new(segs.clone(), 3e-9).is_err());
        assert!(PulseSchedule::new(segs, 2e-9).is_ok());
    }

    #[test]
    fn cosine_ramp() {
        let q = C64::new(2.0, 0.0);
        let s = PulseSchedule::new(
            vec![Segment::new(10.0, q, ZERO), Segment::new(10.0, -q, ZERO)],
            2.0,
        )
        .unwrap();
        assert_eq!(s.drives_at(0.0).0, ZERO);
        assert!((s.drives_at(1.0).0 - q * 0.5).norm() < 1e-15);
        assert_eq!(s.drives_at(5.0).0, q);
        assert!((s.drives_at(11.0).0).norm() < 1e-15);
        assert_eq!(s.drives_at(15.0).0, -q);
        assert_eq!(s.drives_at(25.0).0, ZERO);
        assert_eq!(s.boundaries(), vec![0.0, 10.0, 20.0]);
        assert!((s.max_qubit_slew(1.0) - 4.0 * PI / 4.0).abs() < 1e-12);
    }
}
