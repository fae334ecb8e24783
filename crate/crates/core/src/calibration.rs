//! Extracting `tau` and `thres` of a nanodevice neuron from measured
//! firing frequency versus input pulse width.
//!
//! The neuron is driven by a pulse train at `rate` pulses per second, each
//! pulse of width `w` depositing `amplitude * w` on the state variable, so
//! the mean drive is `D = rate * amplitude * w` per second. An IF neuron
//! fires at `D / thres`; a leaky one at
//! `1 / (tau * ln(D tau / (D tau - thres)))`, which falls below the IF line
//! as the drive grows and is silent for `D tau <= thres`.

use alloc::vec::Vec;
use core::fmt;

/// The pulse train used during the measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseDrive {
    /// State units per second of pulse.
    pub amplitude: f64,
    /// Pulses per second.
    pub rate: f64,
}

impl PulseDrive {
    pub fn drive(&self, width: f64) -> f64 {
        self.rate * self.amplitude * width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationError {
    TooFewPoints(usize),
    InvalidPoint { index: usize },
    InvalidDrive,
    DegenerateWidths,
    NonMonotone { width: f64 },
    NeverFires,
}

impl fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewPoints(n) => write!(f, "need at least 2 calibration points, got {n}"),
            Self::InvalidPoint { index } => write!(
                f,
                "calibration point {index}: width must be > 0 and frequency >= 0, both finite"
            ),
            Self::InvalidDrive => write!(f, "pulse amplitude and rate must be positive"),
            Self::DegenerateWidths => write!(f, "all calibration widths are equal"),
            Self::NonMonotone { width } => write!(
                f,
                "firing frequency decreases with pulse width at width {width}"
            ),
            Self::NeverFires => write!(f, "the device never fires in the calibration data"),
        }
    }
}

impl core::error::Error for CalibrationError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// `None` when the data is consistent with a non-leaky IF neuron.
    pub tau: Option<f64>,
    pub thres: f64,
    /// Root-mean-square frequency error of the fit, in Hz.
    pub residual: f64,
}

/// Firing frequency of a LIF neuron under constant mean drive.
pub fn lif_frequency(drive: f64, tau: f64, thres: f64) -> f64 {
    let charge = drive * tau;
    if charge <= thres {
        return 0.0;
    }
    1.0 / (tau * libm::log(charge / (charge - thres)))
}

fn sse(points: &[(f64, f64)], model: impl Fn(f64) -> f64) -> f64 {
    points
        .iter()
        .map(|&(d, f)| (model(d) - f) * (model(d) - f))
        .sum()
}

fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

pub fn calibrate_from_frequency(
    data: &[(f64, f64)],
    pulse: PulseDrive,
) -> Result<Calibration, CalibrationError> {
    if data.len() < 2 {
        return Err(CalibrationError::TooFewPoints(data.len()));
    }
    if !(pulse.amplitude > 0.0
        && pulse.rate > 0.0
        && pulse.amplitude.is_finite()
        && pulse.rate.is_finite())
    {
        return Err(CalibrationError::InvalidDrive);
    }
    for (index, &(w, f)) in data.iter().enumerate() {
        if !(w > 0.0 && w.is_finite() && f >= 0.0 && f.is_finite()) {
            return Err(CalibrationError::InvalidPoint { index });
        }
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted[0].0 == sorted[sorted.len() - 1].0 {
        return Err(CalibrationError::DegenerateWidths);
    }
    if let Some(w) = sorted.windows(2).find(|w| w[1].1 < w[0].1) {
        return Err(CalibrationError::NonMonotone { width: w[1].0 });
    }
    if sorted.iter().all(|&(_, f)| f == 0.0) {
        return Err(CalibrationError::NeverFires);
    }

    let points: Vec<(f64, f64)> = sorted.iter().map(|&(w, f)| (pulse.drive(w), f)).collect();
    let n = points.len() as f64;

    // Linear IF law f = D / thres through the origin.
    let sum_df: f64 = points.iter().map(|&(d, f)| d * f).sum();
    let sum_dd: f64 = points.iter().map(|&(d, _)| d * d).sum();
    let thres_if = sum_dd / sum_df;
    let sse_if = sse(&points, |d| d / thres_if);
    let scale: f64 = points.iter().map(|&(_, f)| f * f).sum();
    let linear = Calibration {
        tau: None,
        thres: thres_if,
        residual: libm::sqrt(sse_if / n),
    };
    if points.len() < 4 || sse_if <= 1e-18 * scale {
        return Ok(linear);
    }

    // Leaky fit: scan log(tau) on a grid, optimising log(thres) for each,
    // then refine around the best grid cell.
    let f_max = points.iter().map(|&(_, f)| f).fold(0.0, f64::max);
    let (log_tau_lo, log_tau_hi) = (libm::log(1e-3 / f_max), libm::log(1e4 / f_max));
    let (log_th_lo, log_th_hi) = (libm::log(thres_if / 20.0), libm::log(thres_if * 20.0));
    let inner = |log_tau: f64| {
        let tau = libm::exp(log_tau);
        golden_min(log_th_lo, log_th_hi, 80, |log_th| {
            let th = libm::exp(log_th);
            sse(&points, |d| lif_frequency(d, tau, th))
        })
    };
    const GRID: usize = 120;
    let step = (log_tau_hi - log_tau_lo) / GRID as f64;
    let best = (0..=GRID)
        .map(|i| log_tau_lo + i as f64 * step)
        .map(|lt| (lt, inner(lt).1))
        .fold(
            (0.0, f64::INFINITY),
            |acc, c| if c.1 < acc.1 { c } else { acc },
        );
    let (log_tau, _) = golden_min(best.0 - step, best.0 + step, 80, |lt| inner(lt).1);
    let (log_th, sse_lif) = inner(log_tau);

    // Optimum pinned at the top of the range: the data shows no leak.
    if sse_lif >= sse_if || log_tau >= log_tau_hi - step {
        return Ok(linear);
    }
    Ok(Calibration {
        tau: Some(libm::exp(log_tau)),
        thres: libm::exp(log_th),
        residual: libm::sqrt(sse_lif / n),
    })
}
