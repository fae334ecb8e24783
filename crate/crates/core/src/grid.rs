//! The simulation clock: step counts and grid snapping.

use core::fmt;

/// Relative tolerance when deciding whether a time lies on the `dt` grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    NonPositiveDt(f64),
    NegativeDuration(f64),
    /// `T / dt` is not an integer.
    OffGrid {
        duration: f64,
        dt: f64,
    },
    WindowShorterThanStep {
        window: f64,
        dt: f64,
    },
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositiveDt(dt) => write!(f, "time step dt must be positive, got {dt}"),
            Self::NegativeDuration(t) => write!(f, "duration must be finite and >= 0, got {t}"),
            Self::OffGrid { duration, dt } => {
                write!(
                    f,
                    "duration {duration} s is not a whole number of {dt} s steps"
                )
            }
            Self::WindowShorterThanStep { window, dt } => {
                write!(f, "window {window} s is shorter than one {dt} s step")
            }
        }
    }
}

impl core::error::Error for GridError {}

pub fn check_dt(dt: f64) -> Result<(), GridError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(GridError::NonPositiveDt(dt))
    }
}

/// Total number of timesteps `N = T / dt`; `T` must be a whole number of steps.
pub fn num_steps(duration: f64, dt: f64) -> Result<u64, GridError> {
    check_dt(dt)?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(GridError::NegativeDuration(duration));
    }
    let ratio = duration / dt;
    let n = libm::round(ratio);
    if libm::fabs(ratio - n) > GRID_TOLERANCE {
        return Err(GridError::OffGrid { duration, dt });
    }
    Ok(n as u64)
}

/// Index of the grid step containing time `t` (`t >= 0`), tolerant of
/// round-off just below a grid point.
pub fn floor_steps(t: f64, dt: f64) -> u64 {
    libm::floor(t / dt + GRID_TOLERANCE) as u64
}

/// Nearest grid step to `t`.
pub fn round_steps(t: f64, dt: f64) -> i64 {
    libm::round(t / dt) as i64
}
