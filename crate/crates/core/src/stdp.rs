//! Pre/post pairing protocol on a single synapse.
//!
//! A pre-spike starts at `t_pre` and a post-spike at `t_pre + delta_t`, both
//! snapped to the grid. The synapse is stepped with the same mode rules as
//! in a network until both waveforms have ended, and the net conductance
//! change is reported.

use alloc::vec::Vec;
use core::fmt;

use crate::engine::line;
use crate::grid::{check_dt, round_steps, GridError};
use crate::neuron::NeuronModel;
use crate::synapse::{classify_presence, CircuitModel, DeviceModel, Pulse};
use crate::vocab::{self, Slots};

#[derive(Debug, Clone, PartialEq)]
pub enum StdpError {
    Grid(GridError),
    Conductance(f64),
    Circuit {
        step: u64,
        source: crate::expr::ExprError,
    },
}

impl fmt::Display for StdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid(e) => e.fmt(f),
            Self::Conductance(g) => write!(f, "initial conductance {g} outside device range"),
            Self::Circuit { step, source } => write!(f, "pairing step {step}: {source}"),
        }
    }
}

impl core::error::Error for StdpError {}

/// Models taking part in the protocol. Spike shapes and rest levels come
/// from `neuron`: its `pre` waveform drives the input line and its `post1`
/// and `post2` waveforms the output lines.
#[derive(Debug, Clone, Copy)]
pub struct Pairing<'a> {
    pub neuron: &'a NeuronModel,
    pub circuit: &'a CircuitModel,
    pub device: &'a DeviceModel,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdpPoint {
    pub initial_g: f64,
    /// `t_post - t_pre` after grid snapping.
    pub delta_t: f64,
    pub delta_g: f64,
}

fn steps_of(duration: f64, dt: f64) -> u64 {
    libm::ceil(duration / dt - crate::grid::GRID_TOLERANCE).max(0.0) as u64
}

impl Pairing<'_> {
    pub fn delta_g(&self, initial_g: f64, delta_t: f64) -> Result<StdpPoint, StdpError> {
        check_dt(self.dt).map_err(StdpError::Grid)?;
        let (dev, dt) = (self.device, self.dt);
        if !(initial_g >= dev.g_min() && initial_g <= dev.g_max()) {
            return Err(StdpError::Conductance(initial_g));
        }
        let lag = round_steps(delta_t, dt);
        let pre_at = lag.min(0).unsigned_abs();
        let post_at = (pre_at as i64 + lag) as u64;
        let waves = self.neuron.waveforms();
        let rest = self.neuron.rest();
        let end = (pre_at + steps_of(waves.pre.duration(), dt))
            .max(post_at + steps_of(waves.post1.duration(), dt))
            .max(post_at + steps_of(waves.post2.duration(), dt));

        let mut g = initial_g;
        for k in 0..end {
            let v_pre = line(Some(pre_at), k, dt, &waves.pre);
            let v_post1 = line(Some(post_at), k, dt, &waves.post1);
            let v_post2 = line(Some(post_at), k, dt, &waves.post2);
            let mut slots = Slots::default();
            slots[vocab::V_PRE] = v_pre.unwrap_or(rest.pre);
            slots[vocab::V_POST1] = v_post1.unwrap_or(rest.post1);
            slots[vocab::V_POST2] = v_post2.unwrap_or(rest.post2);
            slots[vocab::G] = g;
            slots[vocab::V] = self.neuron.params().v_reset;
            slots[vocab::DT] = dt;
            slots[vocab::TAU] = self.neuron.tau();
            slots[vocab::THRES] = self.neuron.thres();
            slots[vocab::R_MEM] = self.neuron.params().r_mem;
            let presence = classify_presence(v_pre.is_some(), v_post1.is_some());
            let decision = self
                .circuit
                .resolve_mode(presence, &mut slots)
                .map_err(|source| StdpError::Circuit { step: k, source })?;
            if let Some(direction) = decision.mode.direction() {
                let pulse = Pulse {
                    amplitude: libm::fabs(decision.v_tb),
                    width: dt,
                };
                g = dev.program(g, direction, pulse).g;
            }
        }
        Ok(StdpPoint {
            initial_g,
            delta_t: lag as f64 * dt,
            delta_g: g - initial_g,
        })
    }

    /// `points` values of `delta_t` evenly spaced over `[min, max]`, for
    /// each initial conductance in turn.
    pub fn curve(
        &self,
        initial: &[f64],
        min: f64,
        max: f64,
        points: usize,
    ) -> Result<Vec<StdpPoint>, StdpError> {
        let mut out = Vec::with_capacity(initial.len() * points);
        for &g0 in initial {
            for p in 0..points {
                let delta_t = if points == 1 {
                    min
                } else {
                    min + (max - min) * p as f64 / (points - 1) as f64
                };
                out.push(self.delta_g(g0, delta_t)?);
            }
        }
        Ok(out)
    }
}
