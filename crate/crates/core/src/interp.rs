//! Piecewise-linear lookup tables.

use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TableError {
    TooShort,
    NonFinite { index: usize },
    NotIncreasing { index: usize },
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooShort => write!(f, "lookup table needs at least one knot"),
            Self::NonFinite { index } => write!(f, "knot {index} is not finite"),
            Self::NotIncreasing { index } => {
                write!(f, "knot {index} does not increase the input column")
            }
        }
    }
}

impl core::error::Error for TableError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    /// The input fell outside the table and was clamped to an end knot.
    pub clamped: bool,
}

/// `(input, output)` knots with strictly increasing inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, TableError> {
        if knots.is_empty() {
            return Err(TableError::TooShort);
        }
        for (index, &(x, y)) in knots.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(TableError::NonFinite { index });
            }
            if index > 0 && x <= knots[index - 1].0 {
                return Err(TableError::NotIncreasing { index });
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn lookup(&self, x: f64) -> Lookup {
        let (first, last) = (self.knots[0], self.knots[self.knots.len() - 1]);
        if x <= first.0 {
            return Lookup {
                value: first.1,
                clamped: x < first.0,
            };
        }
        if x >= last.0 {
            return Lookup {
                value: last.1,
                clamped: x > last.0,
            };
        }
        let hi = self.knots.partition_point(|&(kx, _)| kx <= x);
        let ((x0, y0), (x1, y1)) = (self.knots[hi - 1], self.knots[hi]);
        let alpha = (x - x0) / (x1 - x0);
        Lookup {
            value: y0 + alpha * (y1 - y0),
            clamped: false,
        }
    }
}
