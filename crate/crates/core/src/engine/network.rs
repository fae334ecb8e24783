use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::neuron::{NeuronModel, NeuronState};
use crate::rng::{derive_seed, seeded};
use crate::synapse::{CircuitModel, DeviceModel, SynapseState};

use super::{STREAM_INIT, STREAM_SPARSE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConnType {
    AllToAll,
    OneToOne,
    /// Each pair connected independently with this probability.
    Sparse(f64),
}

/// Models shared by the neurons of one layer and their incoming synapses.
#[derive(Debug, Clone)]
pub struct LayerModels {
    pub neuron: Arc<NeuronModel>,
    pub circuit: Arc<CircuitModel>,
    pub device: Arc<DeviceModel>,
}

#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub neurons: usize,
    pub plastic: bool,
    pub label: bool,
    /// Connectivity from the previous layer; ignored for the input layer.
    pub conn: ConnType,
    /// `None` only for the input layer.
    pub models: Option<LayerModels>,
}

impl LayerSpec {
    pub fn input(neurons: usize) -> Self {
        Self {
            neurons,
            plastic: false,
            label: false,
            conn: ConnType::AllToAll,
            models: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitWeights {
    /// Uniform over the middle half of each device's `[g_min, g_max]`.
    #[default]
    MidRange,
    Uniform {
        lo: f64,
        hi: f64,
    },
    Constant(f64),
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    /// Layer 0 is the input layer fed by the encoder.
    pub layers: Vec<LayerSpec>,
    /// `(start, end)` layer pairs joined by inhibitory synapses; `start == end`
    /// gives lateral inhibition within a layer.
    pub inh_conn: Vec<(usize, usize)>,
    /// Fixed conductance of every inhibitory synapse, siemens.
    pub inh_g: f64,
    pub seed: u64,
    pub init_weights: InitWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    TooFewLayers,
    EmptyLayer(usize),
    MissingModels(usize),
    OneToOneSizes {
        layer: usize,
        pre: usize,
        post: usize,
    },
    SparseProbability {
        layer: usize,
        p: f64,
    },
    LabelLayers(usize),
    InhibitionIndex {
        start: usize,
        end: usize,
    },
    MissingInhibWaveform(usize),
    InhibConductance(f64),
    InitRange {
        lo: f64,
        hi: f64,
    },
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooFewLayers => write!(f, "a network needs an input layer and at least one more"),
            Self::EmptyLayer(l) => write!(f, "layer {l} has no neurons"),
            Self::MissingModels(l) => {
                write!(f, "layer {l} needs neuron, circuit and device models")
            }
            Self::OneToOneSizes { layer, pre, post } => write!(
                f,
                "layer {layer}: one_to_one needs equal sizes, got {pre} -> {post}"
            ),
            Self::SparseProbability { layer, p } => {
                write!(f, "layer {layer}: sparse_p must lie in (0, 1], got {p}")
            }
            Self::LabelLayers(n) => {
                write!(f, "exactly one layer must have label = true, found {n}")
            }
            Self::InhibitionIndex { start, end } => write!(
                f,
                "inhibitory connection ({start}, {end}) must join non-input layers that exist"
            ),
            Self::MissingInhibWaveform(l) => write!(
                f,
                "layer {l} sends inhibition but its neuron model has no inhib waveform"
            ),
            Self::InhibConductance(g) => {
                write!(f, "inhibitory conductance must be finite and >= 0, got {g}")
            }
            Self::InitRange { lo, hi } => {
                write!(
                    f,
                    "initial weight range [{lo}, {hi}] is empty or not finite"
                )
            }
        }
    }
}

impl core::error::Error for BuildError {}

/// Conductances between two adjacent layers, row-major by presynaptic index.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseMatrix {
    pub(crate) n_pre: usize,
    pub(crate) n_post: usize,
    pub(crate) cells: Vec<Option<SynapseState>>,
}

impl SynapseMatrix {
    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&SynapseState> {
        self.cells[i * self.n_post + j].as_ref()
    }

    pub(crate) fn get_mut(&mut self, i: usize, j: usize) -> Option<&mut SynapseState> {
        self.cells[i * self.n_post + j].as_mut()
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// `(i, j, state)` for every existing synapse in index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &SynapseState)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(k, c)| c.as_ref().map(|s| (k / self.n_post, k % self.n_post, s)))
    }

    pub fn mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }
}

/// Per-layer dynamic state.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerState {
    pub(crate) neurons: Vec<NeuronState>,
    /// Origin step of the latest emitted post-spike1 / post-spike2 / inhib
    /// waveform, or of the latest input pre-spike for layer 0.
    pub(crate) post1: Vec<Option<u64>>,
    pub(crate) post2: Vec<Option<u64>>,
    pub(crate) inhib: Vec<Option<u64>>,
    /// Sign of the latest input spike (layer 0 only).
    pub(crate) sign: Vec<i8>,
    pub(crate) last_current: Vec<f64>,
    pub(crate) spike_counts: Vec<u64>,
}

impl LayerState {
    fn new(n: usize, model: Option<&NeuronModel>) -> Self {
        Self {
            neurons: model.map_or_else(Vec::new, |m| vec![NeuronState::at_rest(m); n]),
            post1: vec![None; n],
            post2: vec![None; n],
            inhib: vec![None; n],
            sign: vec![1; n],
            last_current: vec![0.0; n],
            spike_counts: vec![0; n],
        }
    }
}

/// Scheduled input spikes of one channel, in absolute steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct InputQueue {
    pub(crate) spikes: Vec<(u64, i8)>,
    pub(crate) cursor: usize,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) spec: NetworkSpec,
    /// `synapses[l - 1]` connects layer `l - 1` to layer `l`.
    pub(crate) synapses: Vec<SynapseMatrix>,
    pub(crate) state: Vec<LayerState>,
    /// For each layer and neuron, the `(layer, neuron)` sources inhibiting it.
    pub(crate) inhibitors: Vec<Vec<Vec<(usize, usize)>>>,
    pub(crate) inputs: Vec<InputQueue>,
    pub(crate) labels: Vec<Option<usize>>,
    pub(crate) label_layer: usize,
    pub(crate) clock: u64,
    pub(crate) frozen: bool,
}

fn validate(spec: &NetworkSpec) -> Result<usize, BuildError> {
    if spec.layers.len() < 2 {
        return Err(BuildError::TooFewLayers);
    }
    for (l, layer) in spec.layers.iter().enumerate() {
        if layer.neurons == 0 {
            return Err(BuildError::EmptyLayer(l));
        }
        if l == 0 {
            continue;
        }
        if layer.models.is_none() {
            return Err(BuildError::MissingModels(l));
        }
        match layer.conn {
            ConnType::OneToOne if layer.neurons != spec.layers[l - 1].neurons => {
                return Err(BuildError::OneToOneSizes {
                    layer: l,
                    pre: spec.layers[l - 1].neurons,
                    post: layer.neurons,
                });
            }
            ConnType::Sparse(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(BuildError::SparseProbability { layer: l, p });
            }
            _ => {}
        }
    }
    let labelled: Vec<usize> = (0..spec.layers.len())
        .filter(|&l| spec.layers[l].label)
        .collect();
    if labelled.len() != 1 || labelled[0] == 0 {
        return Err(BuildError::LabelLayers(labelled.len()));
    }
    if !(spec.inh_g >= 0.0 && spec.inh_g.is_finite()) {
        return Err(BuildError::InhibConductance(spec.inh_g));
    }
    for &(start, end) in &spec.inh_conn {
        let n = spec.layers.len();
        if start == 0 || end == 0 || start >= n || end >= n {
            return Err(BuildError::InhibitionIndex { start, end });
        }
        let model = &spec.layers[start].models.as_ref().unwrap().neuron;
        if model.waveforms().inhib.is_none() {
            return Err(BuildError::MissingInhibWaveform(start));
        }
    }
    match spec.init_weights {
        InitWeights::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
            Err(BuildError::InitRange { lo, hi })
        }
        InitWeights::Constant(g) if !g.is_finite() => Err(BuildError::InitRange { lo: g, hi: g }),
        _ => Ok(labelled[0]),
    }
}

fn connectivity(spec: &NetworkSpec, l: usize) -> Vec<bool> {
    let (n_pre, n_post) = (spec.layers[l - 1].neurons, spec.layers[l].neurons);
    match spec.layers[l].conn {
        ConnType::AllToAll => vec![true; n_pre * n_post],
        ConnType::OneToOne => (0..n_pre * n_post)
            .map(|k| k / n_post == k % n_post)
            .collect(),
        ConnType::Sparse(p) => {
            let mut rng = seeded(derive_seed(spec.seed, STREAM_SPARSE, l as u64));
            let mut mask = vec![false; n_pre * n_post];
            for j in 0..n_post {
                let mut draws = 0;
                loop {
                    for i in 0..n_pre {
                        mask[i * n_post + j] = rng.random_bool(p);
                    }
                    draws += 1;
                    if (0..n_pre).any(|i| mask[i * n_post + j]) {
                        break;
                    }
                }
                if draws > 1 {
                    log::info!(
                        "layer {l}: neuron {j} drew no inputs, redrawn {} time(s)",
                        draws - 1
                    );
                }
            }
            mask
        }
    }
}

impl Network {
    pub fn build(spec: NetworkSpec) -> Result<Self, BuildError> {
        let label_layer = validate(&spec)?;
        let mut synapses = Vec::with_capacity(spec.layers.len() - 1);
        for l in 1..spec.layers.len() {
            let device = &spec.layers[l].models.as_ref().unwrap().device;
            let (lo, hi) = match spec.init_weights {
                InitWeights::MidRange => {
                    let span = device.g_max() - device.g_min();
                    (device.g_min() + 0.25 * span, device.g_max() - 0.25 * span)
                }
                InitWeights::Uniform { lo, hi } => (lo, hi),
                InitWeights::Constant(g) => (g, g),
            };
            let mut rng = seeded(derive_seed(spec.seed, STREAM_INIT, l as u64));
            let cells = connectivity(&spec, l)
                .into_iter()
                .map(|present| {
                    let u: f64 = rng.random();
                    present.then(|| SynapseState::new(device.clamp(lo + u * (hi - lo))))
                })
                .collect();
            synapses.push(SynapseMatrix {
                n_pre: spec.layers[l - 1].neurons,
                n_post: spec.layers[l].neurons,
                cells,
            });
        }

        let mut inhibitors: Vec<Vec<Vec<(usize, usize)>>> = spec
            .layers
            .iter()
            .map(|l| vec![Vec::new(); l.neurons])
            .collect();
        for &(start, end) in &spec.inh_conn {
            for (j, sources) in inhibitors[end].iter_mut().enumerate() {
                for k in 0..spec.layers[start].neurons {
                    if start != end || k != j {
                        sources.push((start, k));
                    }
                }
            }
        }

        let state = spec
            .layers
            .iter()
            .map(|l| LayerState::new(l.neurons, l.models.as_ref().map(|m| &*m.neuron)))
            .collect();
        let n_labels = spec.layers[label_layer].neurons;
        let n_inputs = spec.layers[0].neurons;
        Ok(Self {
            spec,
            synapses,
            state,
            inhibitors,
            inputs: vec![InputQueue::default(); n_inputs],
            labels: vec![None; n_labels],
            label_layer,
            clock: 0,
            frozen: false,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn num_layers(&self) -> usize {
        self.spec.layers.len()
    }

    pub fn layer_size(&self, layer: usize) -> usize {
        self.spec.layers[layer].neurons
    }

    /// Synapses from layer `layer - 1` into `layer` (`layer >= 1`).
    pub fn synapses(&self, layer: usize) -> &SynapseMatrix {
        &self.synapses[layer - 1]
    }

    pub fn synapses_mut(&mut self, layer: usize) -> &mut SynapseMatrix {
        &mut self.synapses[layer - 1]
    }

    /// Sets the conductance of an existing synapse, clamped to device bounds.
    pub fn set_conductance(&mut self, layer: usize, i: usize, j: usize, g: f64) -> bool {
        let device = self.spec.layers[layer]
            .models
            .as_ref()
            .unwrap()
            .device
            .clone();
        match self.synapses[layer - 1].get_mut(i, j) {
            Some(s) => {
                s.g = device.clamp(g);
                true
            }
            None => false,
        }
    }

    pub fn neuron_states(&self, layer: usize) -> &[NeuronState] {
        &self.state[layer].neurons
    }

    pub fn neuron_states_mut(&mut self, layer: usize) -> &mut [NeuronState] {
        &mut self.state[layer].neurons
    }

    pub fn inhibitors(&self, layer: usize, neuron: usize) -> &[(usize, usize)] {
        &self.inhibitors[layer][neuron]
    }

    pub fn label_layer(&self) -> usize {
        self.label_layer
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<Option<usize>>) {
        assert_eq!(labels.len(), self.labels.len());
        self.labels = labels;
    }

    /// Spikes per neuron of `layer` since the last [`reset_counts`](Self::reset_counts).
    pub fn spike_counts(&self, layer: usize) -> &[u64] {
        &self.state[layer].spike_counts
    }

    pub fn reset_counts(&mut self) {
        for layer in &mut self.state {
            layer.spike_counts.iter_mut().for_each(|c| *c = 0);
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Disables weight updates in every layer.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    /// Returns membrane state, refractory windows, pending waveforms, input
    /// queues and the clock to their initial values. Weights and labels stay.
    pub fn reset_dynamics(&mut self) {
        for (l, layer) in self.state.iter_mut().enumerate() {
            let model = self.spec.layers[l].models.as_ref().map(|m| &*m.neuron);
            let energy: Vec<f64> = layer.neurons.iter().map(|n| n.energy).collect();
            let counts = core::mem::take(&mut layer.spike_counts);
            *layer = LayerState::new(self.spec.layers[l].neurons, model);
            for (n, e) in layer.neurons.iter_mut().zip(energy) {
                n.energy = e;
            }
            layer.spike_counts = counts;
        }
        for q in &mut self.inputs {
            *q = InputQueue::default();
        }
        self.clock = 0;
    }
}
