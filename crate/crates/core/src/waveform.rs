//! Piecewise-linear spike waveforms.
//!
//! A waveform is a list of `(time, voltage)` breakpoints relative to its
//! trigger. Consecutive points with distinct times are joined by straight
//! lines; a time listed twice marks a jump, and the second voltage is the
//! value from that instant on.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum WaveformError {
    Empty,
    /// The flat `t, V, t, V, ...` array had an odd number of entries.
    OddLength(usize),
    FirstTimeNotZero(f64),
    NonFinite {
        index: usize,
    },
    NegativeTime {
        index: usize,
    },
    DecreasingTime {
        index: usize,
    },
    /// A time value appeared three or more times in a row.
    TripleTime {
        index: usize,
    },
}

impl fmt::Display for WaveformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "waveform has no breakpoints"),
            Self::OddLength(n) => write!(
                f,
                "waveform array has {n} entries; expected alternating time,voltage pairs"
            ),
            Self::FirstTimeNotZero(t) => {
                write!(f, "waveform must start at time 0, first breakpoint is at {t}")
            }
            Self::NonFinite { index } => write!(f, "breakpoint {index} is not finite"),
            Self::NegativeTime { index } => write!(f, "breakpoint {index} has a negative time"),
            Self::DecreasingTime { index } => {
                write!(f, "breakpoint {index} goes back in time")
            }
            Self::TripleTime { index } => write!(
                f,
                "breakpoint {index} repeats a time a third time; only one jump per instant is allowed"
            ),
        }
    }
}

impl core::error::Error for WaveformError {}

/// Immutable piecewise-linear voltage waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    points: Vec<(f64, f64)>,
}

impl Waveform {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, WaveformError> {
        let first = points.first().ok_or(WaveformError::Empty)?;
        for (index, &(t, v)) in points.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(WaveformError::NonFinite { index });
            }
            if t < 0.0 {
                return Err(WaveformError::NegativeTime { index });
            }
        }
        if first.0 != 0.0 {
            return Err(WaveformError::FirstTimeNotZero(first.0));
        }
        for index in 1..points.len() {
            let (prev, cur) = (points[index - 1].0, points[index].0);
            if cur < prev {
                return Err(WaveformError::DecreasingTime { index });
            }
            if index >= 2 && cur == prev && points[index - 2].0 == cur {
                return Err(WaveformError::TripleTime { index });
            }
        }
        Ok(Self { points })
    }

    /// Builds a waveform from a flat `t0, V0, t1, V1, ...` array, the layout
    /// used in configuration files.
    pub fn from_flat(values: &[f64]) -> Result<Self, WaveformError> {
        if !values.len().is_multiple_of(2) {
            return Err(WaveformError::OddLength(values.len()));
        }
        Self::new(values.chunks_exact(2).map(|c| (c[0], c[1])).collect())
    }

    /// A constant-voltage pulse of the given width.
    pub fn rectangular(width: f64, volts: f64) -> Result<Self, WaveformError> {
        Self::new(alloc::vec![(0.0, volts), (width, volts)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn duration(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Voltage at `tau` seconds after the trigger. Zero outside
    /// `[0, duration]`, right-continuous at jumps.
    pub fn sample(&self, tau: f64) -> f64 {
        if !(0.0..=self.duration()).contains(&tau) {
            return 0.0;
        }
        // Last breakpoint with time <= tau; at a jump this is the right-hand value.
        let idx = self.points.partition_point(|&(t, _)| t <= tau) - 1;
        let (t0, v0) = self.points[idx];
        match self.points.get(idx + 1) {
            None => v0,
            Some(&(t1, v1)) => {
                let alpha = (tau - t0) / (t1 - t0);
                (1.0 - alpha) * v0 + alpha * v1
            }
        }
    }
}

/// A waveform placed on the global clock.
#[derive(Debug, Clone)]
pub struct ScheduledWaveform {
    pub waveform: Arc<Waveform>,
    pub origin: f64,
}

impl ScheduledWaveform {
    pub fn new(waveform: Arc<Waveform>, origin: f64) -> Self {
        debug_assert!(origin >= 0.0);
        Self { waveform, origin }
    }

    /// True on the half-open interval `[origin, origin + duration)`.
    pub fn active(&self, t: f64) -> bool {
        self.origin <= t && t < self.origin + self.waveform.duration()
    }

    pub fn sample(&self, t: f64) -> f64 {
        self.waveform.sample(t - self.origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ramp() -> Waveform {
        Waveform::new(vec![(0.0, 0.0), (1.0, 1.0)]).unwrap()
    }

    fn jump() -> Waveform {
        Waveform::new(vec![(0.0, 0.0), (1.0, 1.0), (1.0, -1.0), (2.0, 0.0)]).unwrap()
    }

    #[test]
    fn sample_interpolates() {
        assert_eq!(ramp().sample(0.5), 0.5);
    }

    #[test]
    fn sample_takes_right_value_at_jump() {
        assert_eq!(jump().sample(1.0), -1.0);
        assert_eq!(jump().sample(1.5), -0.5);
    }

    #[test]
    fn sample_is_zero_outside_support() {
        assert_eq!(ramp().sample(5.0), 0.0);
        assert_eq!(ramp().sample(-0.1), 0.0);
        assert_eq!(ramp().sample(1.0), 1.0);
    }

    #[test]
    fn durations() {
        let w = Waveform::new(vec![(0.0, 0.0), (3.0, 1.0)]).unwrap();
        assert_eq!(w.duration(), 3.0);
        let w = Waveform::new(vec![(0.0, 1.0)]).unwrap();
        assert_eq!(w.duration(), 0.0);
        assert_eq!(w.sample(0.0), 1.0);
        assert_eq!(jump().duration(), 2.0);
    }

    #[test]
    fn active_is_half_open() {
        let w = Arc::new(Waveform::rectangular(2e-3, 1.0).unwrap());
        assert!(ScheduledWaveform::new(w.clone(), 0.0).active(1e-3));
        assert!(!ScheduledWaveform::new(w.clone(), 0.0).active(2e-3));
        assert!(!ScheduledWaveform::new(w, 5e-3).active(1e-3));
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Waveform::new(vec![]), Err(WaveformError::Empty));
        assert_eq!(
            Waveform::new(vec![(0.0, 0.0), (1.0, 0.0), (0.5, 0.0)]),
            Err(WaveformError::DecreasingTime { index: 2 })
        );
        assert_eq!(
            Waveform::new(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]),
            Err(WaveformError::TripleTime { index: 3 })
        );
        assert_eq!(
            Waveform::new(vec![(0.5, 0.0)]),
            Err(WaveformError::FirstTimeNotZero(0.5))
        );
        assert_eq!(
            Waveform::from_flat(&[0.0, 1.0, 2.0]),
            Err(WaveformError::OddLength(3))
        );
        assert!(Waveform::new(vec![(0.0, f64::NAN)]).is_err());
    }

    fn arb_waveform() -> impl Strategy<Value = Waveform> {
        prop::collection::vec(
            (0.0f64..1.0, -5.0f64..5.0, prop::bool::weighted(0.2)),
            1..12,
        )
        .prop_map(|raw| {
            let mut pts = vec![(0.0, raw[0].1)];
            let mut t = 0.0;
            for &(dt, v, jump) in &raw[1..] {
                let last_is_jump = pts.len() >= 2 && pts[pts.len() - 2].0 == t;
                if !(jump && !last_is_jump) {
                    t += dt + 1e-3;
                }
                pts.push((t, v));
            }
            Waveform::new(pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn breakpoints_sample_to_their_right_value(w in arb_waveform()) {
            let pts = w.breakpoints();
            for (i, &(t, v)) in pts.iter().enumerate() {
                let s = w.sample(t);
                prop_assert!(s.is_finite());
                let is_left_of_jump = pts.get(i + 1).is_some_and(|&(tn, _)| tn == t);
                if !is_left_of_jump {
                    prop_assert_eq!(s, v);
                }
            }
        }

        #[test]
        fn linear_between_distinct_breakpoints(w in arb_waveform(), alpha in 0.0f64..1.0) {
            let pts = w.breakpoints();
            for pair in pts.windows(2) {
                let ((t0, v0), (t1, v1)) = (pair[0], pair[1]);
                if t0 == t1 {
                    continue;
                }
                let t = (1.0 - alpha) * t0 + alpha * t1;
                if t == t1 {
                    continue;
                }
                let a = (t - t0) / (t1 - t0);
                let expected = (1.0 - a) * v0 + a * v1;
                prop_assert!((w.sample(t) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }
}
