//! Input spike encoders: Poisson, fixed-rate and AER event replay.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::grid::{self, GridError};

/// Probability per timestep above which the Bernoulli approximation of a
/// Poisson process is flagged.
pub const MAX_STEP_PROBABILITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum EncodingError {
    Grid(GridError),
    InvalidRates {
        r_min: f64,
        r_max: f64,
    },
    IntensityOutOfRange(f64),
    AddressOutOfRange {
        address: usize,
        channels: usize,
    },
    NegativeEventTime(f64),
    FeatureCount {
        expected: usize,
        found: usize,
    },
    /// Feature vectors given to an AER encoder or events to a rate encoder.
    InputKindMismatch,
}

impl fmt::Display for EncodingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid(e) => e.fmt(f),
            Self::InvalidRates { r_min, r_max } => {
                write!(
                    f,
                    "rates must satisfy 0 <= r_min <= r_max, got r_min={r_min}, r_max={r_max}"
                )
            }
            Self::IntensityOutOfRange(x) => write!(f, "intensity {x} is outside [0, 1]"),
            Self::AddressOutOfRange { address, channels } => {
                write!(
                    f,
                    "event address {address} out of range for {channels} input channels"
                )
            }
            Self::NegativeEventTime(t) => write!(f, "event time {t} is negative"),
            Self::FeatureCount { expected, found } => {
                write!(
                    f,
                    "sample has {found} features, input layer has {expected} neurons"
                )
            }
            Self::InputKindMismatch => {
                write!(f, "sample input kind does not match the configured encoder")
            }
        }
    }
}

impl core::error::Error for EncodingError {}

impl From<GridError> for EncodingError {
    fn from(e: GridError) -> Self {
        Self::Grid(e)
    }
}

/// Spike times on the `dt` grid, stored as step indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrain {
    dt: f64,
    steps: Vec<u64>,
    /// Per-spike sign; empty means all spikes are positive.
    signs: Vec<i8>,
}

impl SpikeTrain {
    pub fn empty(dt: f64) -> Self {
        Self {
            dt,
            steps: Vec::new(),
            signs: Vec::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(move |&k| k as f64 * self.dt)
    }

    pub fn sign(&self, index: usize) -> i8 {
        self.signs.get(index).copied().unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Self::On => 1,
            Self::Off => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AerEvent {
    pub t: f64,
    pub address: usize,
    pub polarity: Polarity,
}

/// How event polarity reaches the input layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolarityMode {
    /// ON events of address `a` drive channel `2a`, OFF events channel `2a + 1`.
    #[default]
    SeparateChannels,
    /// Both polarities drive channel `a`; OFF events carry a negative sign.
    Signed,
}

impl PolarityMode {
    pub fn channels_for(self, addresses: usize) -> usize {
        match self {
            Self::SeparateChannels => 2 * addresses,
            Self::Signed => addresses,
        }
    }
}

/// Maps a feature intensity in `[0, 1]` linearly onto `[r_min, r_max]` Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMap {
    pub r_min: f64,
    pub r_max: f64,
}

impl RateMap {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self, EncodingError> {
        if !(r_min.is_finite() && r_max.is_finite() && 0.0 <= r_min && r_min <= r_max) {
            return Err(EncodingError::InvalidRates { r_min, r_max });
        }
        Ok(Self { r_min, r_max })
    }

    pub fn rate(&self, intensity: f64) -> Result<f64, EncodingError> {
        if !(0.0..=1.0).contains(&intensity) {
            return Err(EncodingError::IntensityOutOfRange(intensity));
        }
        Ok(self.r_min + intensity * (self.r_max - self.r_min))
    }
}

fn window_steps(duration: f64, dt: f64) -> Result<u64, EncodingError> {
    grid::check_dt(dt)?;
    if !(duration >= dt) {
        return Err(GridError::WindowShorterThanStep {
            window: duration,
            dt,
        }
        .into());
    }
    Ok(grid::floor_steps(duration, dt))
}

/// Bernoulli-per-timestep approximation of a Poisson process.
pub fn poisson_encode<R: Rng + ?Sized>(
    intensity: f64,
    rates: RateMap,
    duration: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SpikeTrain, EncodingError> {
    let n = window_steps(duration, dt)?;
    let p = rates.rate(intensity)? * dt;
    if p > MAX_STEP_PROBABILITY {
        log::warn!(
            "poisson encoding: spike probability {p:.3} per step exceeds {MAX_STEP_PROBABILITY}; dt is coarse for this rate"
        );
    }
    let mut train = SpikeTrain::empty(dt);
    if p <= 0.0 {
        return Ok(train);
    }
    for k in 0..n {
        if rng.random::<f64>() < p {
            train.steps.push(k);
        }
    }
    Ok(train)
}

/// Deterministic train with spikes at `k / rate`, phase 0, floored onto the grid.
pub fn fixed_rate_encode(
    intensity: f64,
    rates: RateMap,
    duration: f64,
    dt: f64,
) -> Result<SpikeTrain, EncodingError> {
    let n = window_steps(duration, dt)?;
    let rate = rates.rate(intensity)?;
    let mut train = SpikeTrain::empty(dt);
    if rate <= 0.0 {
        return Ok(train);
    }
    for k in 0u64.. {
        let step = grid::floor_steps(k as f64 / rate, dt);
        if step >= n {
            break;
        }
        if train.steps.last() != Some(&step) {
            train.steps.push(step);
        }
    }
    Ok(train)
}

/// Replays AER events as one spike train per input channel over a window
/// starting at time 0. Events at or after `duration` are dropped; events
/// that land on the same step of the same channel are merged (last sign wins).
pub fn aer_encode(
    events: &[AerEvent],
    channels: usize,
    mode: PolarityMode,
    duration: f64,
    dt: f64,
) -> Result<Vec<SpikeTrain>, EncodingError> {
    let n = window_steps(duration, dt)?;
    let mut per_channel: Vec<Vec<(u64, i8)>> = alloc::vec![Vec::new(); channels];
    for ev in events {
        if !(ev.t >= 0.0) {
            return Err(EncodingError::NegativeEventTime(ev.t));
        }
        let channel = match mode {
            PolarityMode::SeparateChannels => {
                2 * ev.address + usize::from(ev.polarity == Polarity::Off)
            }
            PolarityMode::Signed => ev.address,
        };
        if channel >= channels {
            return Err(EncodingError::AddressOutOfRange {
                address: ev.address,
                channels,
            });
        }
        let step = grid::floor_steps(ev.t, dt);
        if step < n {
            per_channel[channel].push((step, ev.polarity.sign()));
        }
    }
    Ok(per_channel
        .into_iter()
        .map(|mut spikes| {
            spikes.sort_by_key(|&(k, _)| k);
            let mut train = SpikeTrain::empty(dt);
            for (k, sign) in spikes {
                if train.steps.last() == Some(&k) {
                    *train.signs.last_mut().unwrap() = sign;
                } else {
                    train.steps.push(k);
                    train.signs.push(sign);
                }
            }
            if train.signs.iter().all(|&s| s == 1) {
                train.signs.clear();
            }
            train
        })
        .collect())
}

/// Input to the first layer for one presentation.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleInput {
    Features(Vec<f64>),
    Events(Vec<AerEvent>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: SampleInput,
    pub label: Option<usize>,
}

impl Sample {
    pub fn features(features: Vec<f64>, label: Option<usize>) -> Self {
        Self {
            input: SampleInput::Features(features),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Encoder {
    Poisson(RateMap),
    FixedRate(RateMap),
    Aer(PolarityMode),
}

impl Encoder {
    /// Encodes one sample into `channels` spike trains covering `duration`.
    pub fn encode<R: Rng + ?Sized>(
        &self,
        sample: &Sample,
        channels: usize,
        duration: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<Vec<SpikeTrain>, EncodingError> {
        match (&sample.input, self) {
            (SampleInput::Events(events), Encoder::Aer(mode)) => {
                aer_encode(events, channels, *mode, duration, dt)
            }
            (SampleInput::Events(_), _) => Err(EncodingError::InputKindMismatch),
            (SampleInput::Features(_), Encoder::Aer(_)) => Err(EncodingError::InputKindMismatch),
            (SampleInput::Features(features), enc) => {
                if features.len() != channels {
                    return Err(EncodingError::FeatureCount {
                        expected: channels,
                        found: features.len(),
                    });
                }
                features
                    .iter()
                    .map(|&x| match *enc {
                        Encoder::Poisson(r) => poisson_encode(x, r, duration, dt, rng),
                        Encoder::FixedRate(r) => fixed_rate_encode(x, r, duration, dt),
                        Encoder::Aer(_) => unreachable!("AER encoders take event input"),
                    })
                    .collect()
            }
        }
    }
}
