//! LIF/IF neurons: integration, firing, spike emission, pulse conversion
//! and dynamic power accounting.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{ExprError, Expression, Program};
use crate::interp::PiecewiseLinear;
use crate::vocab::{self, Slots};
use crate::waveform::{ScheduledWaveform, Waveform};

#[derive(Debug, Clone, PartialEq)]
pub enum NeuronError {
    Parameter {
        name: &'static str,
        value: f64,
    },
    ThresholdBelowReset {
        thres: f64,
        v_reset: f64,
    },
    Expr {
        slot: &'static str,
        source: ExprError,
    },
    NonFiniteState {
        v: f64,
    },
    MissingConvertTable,
}

impl fmt::Display for NeuronError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parameter { name, value } => write!(f, "invalid {name}: {value}"),
            Self::ThresholdBelowReset { thres, v_reset } => {
                write!(f, "thres ({thres}) must exceed v_reset ({v_reset})")
            }
            Self::Expr { slot, source } => write!(f, "{slot}: {source}"),
            Self::NonFiniteState { v } => write!(f, "neuron state became non-finite ({v})"),
            Self::MissingConvertTable => write!(f, "no pulse_convert table configured"),
        }
    }
}

impl core::error::Error for NeuronError {}

/// Spike shapes a neuron drives onto its synapses.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeWaveforms {
    /// Pre-spike applied by the input drivers to this layer's synapses.
    pub pre: Arc<Waveform>,
    /// Sent back to the neuron's incoming synapses.
    pub post1: Arc<Waveform>,
    /// Forwarded as the pre-spike of the next layer.
    pub post2: Arc<Waveform>,
    /// Sent to inhibited peers.
    pub inhib: Option<Arc<Waveform>>,
}

/// Line voltages while no spike is being driven.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RestLevels {
    pub pre: f64,
    pub post1: f64,
    pub post2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    pub tau: f64,
    pub thres: f64,
    pub v_reset: f64,
    pub t_refrac: f64,
    pub r_mem: f64,
    /// `dV/dt`; the default is `(-V + r_mem * I) / tau`.
    pub state_eqs: Option<Expression>,
    /// Dynamic power in watts, integrated into the energy counter.
    pub power_expr: Option<Expression>,
    pub waveforms: SpikeWaveforms,
    pub rest: RestLevels,
    /// Applied to the total input current before integration.
    pub pulse_convert: Option<PiecewiseLinear>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronModel {
    params: NeuronParams,
    state_eqs: Option<Program>,
    power: Option<Program>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeuronState {
    pub v: f64,
    pub refractory_until: f64,
    pub spike_times: Vec<f64>,
    pub energy: f64,
}

impl NeuronState {
    pub fn at_rest(model: &NeuronModel) -> Self {
        Self {
            v: model.params.v_reset,
            refractory_until: f64::NEG_INFINITY,
            ..Self::default()
        }
    }
}

/// Waveforms scheduled by one spike.
#[derive(Debug, Clone)]
pub struct SpikeEmission {
    pub post1: ScheduledWaveform,
    pub post2: ScheduledWaveform,
    pub inhib: Option<ScheduledWaveform>,
}

impl NeuronModel {
    pub fn new(
        params: NeuronParams,
        constants: &BTreeMap<String, f64>,
    ) -> Result<Self, NeuronError> {
        for (name, value, ok) in [
            ("tau", params.tau, params.tau > 0.0),
            ("t_refrac", params.t_refrac, params.t_refrac >= 0.0),
            ("r_mem", params.r_mem, true),
            ("thres", params.thres, true),
            ("v_reset", params.v_reset, true),
        ] {
            if !(ok && value.is_finite()) {
                return Err(NeuronError::Parameter { name, value });
            }
        }
        if !(params.thres > params.v_reset) {
            return Err(NeuronError::ThresholdBelowReset {
                thres: params.thres,
                v_reset: params.v_reset,
            });
        }
        let compile = |slot: &'static str, e: &Option<Expression>| {
            e.as_ref()
                .map(|e| e.compile(&vocab::NAMES, constants))
                .transpose()
                .map_err(|source| NeuronError::Expr { slot, source })
        };
        let state_eqs = compile("state_eqs", &params.state_eqs)?;
        let power = compile("power_expr", &params.power_expr)?;
        Ok(Self {
            params,
            state_eqs,
            power,
        })
    }

    pub fn params(&self) -> &NeuronParams {
        &self.params
    }

    pub fn tau(&self) -> f64 {
        self.params.tau
    }

    pub fn thres(&self) -> f64 {
        self.params.thres
    }

    pub fn waveforms(&self) -> &SpikeWaveforms {
        &self.params.waveforms
    }

    pub fn rest(&self) -> RestLevels {
        self.params.rest
    }

    /// Piecewise-linear width/amplitude conversion; inputs outside the table
    /// are clamped to its end knots.
    pub fn pulse_convert(&self, value: f64) -> Result<f64, NeuronError> {
        let table = self
            .params
            .pulse_convert
            .as_ref()
            .ok_or(NeuronError::MissingConvertTable)?;
        let out = table.lookup(value);
        if out.clamped {
            log::warn!("pulse_convert: input {value} outside table range, clamped");
        }
        Ok(out.value)
    }

    fn fill(&self, slots: &mut Slots, v: f64, i: f64, dt: f64) {
        slots[vocab::V] = v;
        slots[vocab::I] = i;
        slots[vocab::DT] = dt;
        slots[vocab::TAU] = self.params.tau;
        slots[vocab::THRES] = self.params.thres;
        slots[vocab::R_MEM] = self.params.r_mem;
    }

    /// One explicit-Euler step of the state variable at time `t`.
    pub fn integrate(
        &self,
        state: &mut NeuronState,
        i_total: f64,
        t: f64,
        dt: f64,
    ) -> Result<(), NeuronError> {
        let i = match &self.params.pulse_convert {
            Some(_) => self.pulse_convert(i_total)?,
            None => i_total,
        };
        let mut slots = Slots::default();
        if t < state.refractory_until - crate::grid::GRID_TOLERANCE * dt {
            state.v = self.params.v_reset;
        } else {
            let dv = match &self.state_eqs {
                Some(p) => {
                    self.fill(&mut slots, state.v, i, dt);
                    p.eval(slots.as_slice())
                        .map_err(|source| NeuronError::Expr {
                            slot: "state_eqs",
                            source,
                        })?
                }
                None => (-state.v + self.params.r_mem * i) / self.params.tau,
            };
            state.v += dt * dv;
            if !state.v.is_finite() {
                return Err(NeuronError::NonFiniteState { v: state.v });
            }
        }
        if let Some(p) = &self.power {
            self.fill(&mut slots, state.v, i, dt);
            let watts = p
                .eval(slots.as_slice())
                .map_err(|source| NeuronError::Expr {
                    slot: "power_expr",
                    source,
                })?;
            state.energy += dt * watts;
        }
        Ok(())
    }

    /// Fires if the state reached threshold. Emitted waveforms start one
    /// step later, at `t + dt`.
    pub fn fire_check(&self, state: &mut NeuronState, t: f64, dt: f64) -> Option<SpikeEmission> {
        if state.v < self.params.thres {
            return None;
        }
        state.spike_times.push(t);
        state.v = self.params.v_reset;
        state.refractory_until = t + self.params.t_refrac;
        let origin = t + dt;
        let w = &self.params.waveforms;
        Some(SpikeEmission {
            post1: ScheduledWaveform::new(w.post1.clone(), origin),
            post2: ScheduledWaveform::new(w.post2.clone(), origin),
            inhib: w
                .inhib
                .clone()
                .map(|inhib| ScheduledWaveform::new(inhib, origin)),
        })
    }
}
