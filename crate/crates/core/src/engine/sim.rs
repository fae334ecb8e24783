use alloc::vec;
use alloc::vec::Vec;

use crate::encoding::SpikeTrain;
use crate::grid::GRID_TOLERANCE;
use crate::synapse::{classify_presence, ModeDecision, Pulse, SynapseMode};
use crate::vocab::{self, Slots};
use crate::waveform::Waveform;

use super::network::{InputQueue, Network};
use super::SimError;

/// Everything observable about one non-input layer after a timestep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerTrace {
    /// Mode of each synapse, row-major `[pre * n_post + post]`; `None` where
    /// no synapse exists.
    pub modes: Vec<Option<SynapseMode>>,
    /// Device voltage of each synapse, 0 for idle or missing ones.
    pub v_tb: Vec<f64>,
    /// Total input current of each neuron, excitatory minus inhibitory.
    pub currents: Vec<f64>,
    /// State variable after integration and reset.
    pub v: Vec<f64>,
    pub fired: Vec<bool>,
    /// Conductances after the weight update.
    pub g: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepTrace {
    pub step: u64,
    /// Input channels that emitted a pre-spike this step.
    pub input_spikes: Vec<bool>,
    /// `layers[l - 1]` describes layer `l`.
    pub layers: Vec<LayerTrace>,
}

/// Value on a line driven by the waveform emitted at `origin`, or `None`
/// when no waveform is active at step `k`.
pub(crate) fn line(origin: Option<u64>, k: u64, dt: f64, waveform: &Waveform) -> Option<f64> {
    let o = origin?;
    if o > k {
        return None;
    }
    // The nudge keeps grid round-off from pulling a sample back across a
    // breakpoint that lies exactly on the grid.
    let tau = (k - o) as f64 * dt + GRID_TOLERANCE * dt;
    (tau < waveform.duration()).then(|| waveform.sample(tau))
}

impl Network {
    /// Queues encoded spike trains, one per input channel, starting at the
    /// current clock.
    pub fn load_input(&mut self, trains: &[SpikeTrain]) -> Result<(), SimError> {
        if trains.len() != self.inputs.len() {
            return Err(SimError::InputChannels {
                expected: self.inputs.len(),
                found: trains.len(),
            });
        }
        let base = self.clock;
        for (queue, train) in self.inputs.iter_mut().zip(trains) {
            *queue = InputQueue {
                spikes: train
                    .steps()
                    .iter()
                    .enumerate()
                    .map(|(n, &s)| (base + s, train.sign(n)))
                    .collect(),
                cursor: 0,
            };
        }
        Ok(())
    }

    /// Schedules one extra pre-spike on an input channel at an absolute step.
    pub fn inject_input(&mut self, channel: usize, step: u64, sign: i8) {
        let queue = &mut self.inputs[channel];
        let at = queue.spikes.partition_point(|&(s, _)| s <= step);
        queue.spikes.insert(at.max(queue.cursor), (step, sign));
    }

    pub fn run_timestep(&mut self, dt: f64) -> Result<(), SimError> {
        self.advance(dt, None)
    }

    pub fn run_timestep_traced(&mut self, dt: f64) -> Result<StepTrace, SimError> {
        let mut trace = StepTrace::default();
        self.advance(dt, Some(&mut trace))?;
        Ok(trace)
    }

    fn advance(&mut self, dt: f64, mut trace: Option<&mut StepTrace>) -> Result<(), SimError> {
        let k = self.clock;
        let t = k as f64 * dt;

        let input = &mut self.state[0];
        let mut input_spikes = vec![false; self.inputs.len()];
        for (c, queue) in self.inputs.iter_mut().enumerate() {
            while let Some(&(s, sign)) = queue.spikes.get(queue.cursor) {
                if s > k {
                    break;
                }
                if s == k {
                    input.post2[c] = Some(k);
                    input.sign[c] = sign;
                    input.spike_counts[c] += 1;
                    input_spikes[c] = true;
                }
                queue.cursor += 1;
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.step = k;
            tr.input_spikes = input_spikes;
        }

        for l in 1..self.spec.layers.len() {
            let models = self.spec.layers[l]
                .models
                .clone()
                .expect("validated at build");
            let (neuron, circuit, device) = (&*models.neuron, &*models.circuit, &*models.device);

            let pre: Vec<Option<f64>> = if l == 1 {
                let w = &neuron.waveforms().pre;
                let src = &self.state[0];
                (0..src.post2.len())
                    .map(|i| line(src.post2[i], k, dt, w).map(|v| v * f64::from(src.sign[i])))
                    .collect()
            } else {
                let up = &self.spec.layers[l - 1].models.as_ref().unwrap().neuron;
                let w = &up.waveforms().post2;
                self.state[l - 1]
                    .post2
                    .iter()
                    .map(|&o| line(o, k, dt, w))
                    .collect()
            };
            let pre_rest = if l == 1 {
                neuron.rest().pre
            } else {
                self.spec.layers[l - 1]
                    .models
                    .as_ref()
                    .unwrap()
                    .neuron
                    .rest()
                    .post2
            };

            let n_post = self.spec.layers[l].neurons;
            let mut inhibition = vec![0.0; n_post];
            for (j, inh) in inhibition.iter_mut().enumerate() {
                for &(sl, s) in &self.inhibitors[l][j] {
                    let src = &self.spec.layers[sl].models.as_ref().unwrap().neuron;
                    let w = src.waveforms().inhib.as_ref().expect("validated at build");
                    if let Some(v) = line(self.state[sl].inhib[s], k, dt, w) {
                        *inh += self.spec.inh_g * v;
                    }
                }
            }

            let layer = &mut self.state[l];
            let waves = neuron.waveforms();
            let rest = neuron.rest();
            let post1: Vec<Option<f64>> = layer
                .post1
                .iter()
                .map(|&o| line(o, k, dt, &waves.post1))
                .collect();
            let post2: Vec<Option<f64>> = layer
                .post2
                .iter()
                .map(|&o| line(o, k, dt, &waves.post2))
                .collect();

            let matrix = &self.synapses[l - 1];
            let mut decisions = vec![ModeDecision::IDLE; matrix.cells.len()];
            let mut excitation = vec![0.0; n_post];
            for (i, &v_pre) in pre.iter().enumerate() {
                for j in 0..n_post {
                    let cell = i * n_post + j;
                    let Some(syn) = &matrix.cells[cell] else {
                        continue;
                    };
                    let presence = classify_presence(v_pre.is_some(), post1[j].is_some());
                    let mut slots = Slots::default();
                    slots[vocab::V_PRE] = v_pre.unwrap_or(pre_rest);
                    slots[vocab::V_POST1] = post1[j].unwrap_or(rest.post1);
                    slots[vocab::V_POST2] = post2[j].unwrap_or(rest.post2);
                    slots[vocab::G] = syn.g;
                    slots[vocab::I] = layer.last_current[j];
                    slots[vocab::V] = layer.neurons[j].v;
                    slots[vocab::DT] = dt;
                    slots[vocab::TAU] = neuron.tau();
                    slots[vocab::THRES] = neuron.thres();
                    slots[vocab::R_MEM] = neuron.params().r_mem;
                    let circuit_err = |source| SimError::Circuit {
                        layer: l,
                        pre: i,
                        post: j,
                        step: k,
                        source,
                    };
                    let decision = circuit
                        .resolve_mode(presence, &mut slots)
                        .map_err(circuit_err)?;
                    let current = circuit
                        .transmit_current(decision.mode, &slots)
                        .map_err(circuit_err)?;
                    if !current.is_finite() {
                        return Err(circuit_err(crate::expr::ExprError::NonFinite));
                    }
                    excitation[j] += current;
                    decisions[cell] = decision;
                }
            }

            let mut fired = vec![false; n_post];
            for j in 0..n_post {
                let total = excitation[j] - inhibition[j];
                let state = &mut layer.neurons[j];
                neuron
                    .integrate(state, total, t, dt)
                    .map_err(|source| SimError::Neuron {
                        layer: l,
                        neuron: j,
                        step: k,
                        source,
                    })?;
                if neuron.fire_check(state, t, dt).is_some() {
                    layer.post1[j] = Some(k + 1);
                    layer.post2[j] = Some(k + 1);
                    layer.inhib[j] = Some(k + 1);
                    layer.spike_counts[j] += 1;
                    fired[j] = true;
                }
                layer.last_current[j] = total;
            }

            let learn = self.spec.layers[l].plastic && !self.frozen;
            let matrix = &mut self.synapses[l - 1];
            for (cell, decision) in decisions.iter().enumerate() {
                let Some(syn) = matrix.cells[cell].as_mut() else {
                    continue;
                };
                syn.last_mode = decision.mode;
                if !learn {
                    continue;
                }
                if let Some(direction) = decision.mode.direction() {
                    let pulse = Pulse {
                        amplitude: libm::fabs(decision.v_tb),
                        width: dt,
                    };
                    let outcome = device.program(syn.g, direction, pulse);
                    syn.g = outcome.g;
                    if outcome.saturated {
                        syn.saturations += 1;
                    }
                }
            }

            if let Some(tr) = trace.as_deref_mut() {
                tr.layers.push(LayerTrace {
                    modes: matrix
                        .cells
                        .iter()
                        .zip(&decisions)
                        .map(|(c, d)| c.as_ref().map(|_| d.mode))
                        .collect(),
                    v_tb: decisions.iter().map(|d| d.v_tb).collect(),
                    currents: layer.last_current.clone(),
                    v: layer.neurons.iter().map(|n| n.v).collect(),
                    fired,
                    g: matrix
                        .cells
                        .iter()
                        .map(|c| c.as_ref().map(|s| s.g))
                        .collect(),
                });
            }
        }
        self.clock += 1;
        Ok(())
    }
}
