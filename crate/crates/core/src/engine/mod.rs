//! Clock-driven network simulation: topology, the per-step update,
//! training, labelling, inference and weight persistence.

mod learn;
mod network;
mod persist;
mod sim;

use core::fmt;

use crate::encoding::EncodingError;
use crate::expr::ExprError;
use crate::grid::GridError;
use crate::neuron::NeuronError;

pub use learn::{
    assign_labels, infer, inference_seed, train, winner, Checkpoint, ConfusionMatrix,
    InferenceReport, SimConfig, TrainReport,
};
pub use network::{
    BuildError, ConnType, InitWeights, LayerModels, LayerSpec, Network, NetworkSpec, SynapseMatrix,
};
pub use persist::{PersistError, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub(crate) use sim::line;
pub use sim::{LayerTrace, StepTrace};

// Random stream identifiers for `rng::derive_seed`.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SPARSE: u64 = 2;
pub(crate) const STREAM_SHUFFLE: u64 = 3;
pub(crate) const STREAM_TRAIN: u64 = 4;
pub(crate) const STREAM_LABEL: u64 = 5;
pub(crate) const STREAM_INFER: u64 = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Grid(GridError),
    Encoding {
        sample: usize,
        source: EncodingError,
    },
    Circuit {
        layer: usize,
        pre: usize,
        post: usize,
        step: u64,
        source: ExprError,
    },
    Neuron {
        layer: usize,
        neuron: usize,
        step: u64,
        source: NeuronError,
    },
    InputChannels {
        expected: usize,
        found: usize,
    },
    UnlabeledSample(usize),
    NoData,
}

impl From<GridError> for SimError {
    fn from(e: GridError) -> Self {
        Self::Grid(e)
    }
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Grid(e) => e.fmt(f),
            Self::Encoding { sample, source } => write!(f, "sample {sample}: {source}"),
            Self::Circuit {
                layer,
                pre,
                post,
                step,
                source,
            } => write!(
                f,
                "synapse ({pre}, {post}) of layer {layer} at step {step}: {source}"
            ),
            Self::Neuron {
                layer,
                neuron,
                step,
                source,
            } => {
                write!(
                    f,
                    "neuron {neuron} of layer {layer} at step {step}: {source}"
                )
            }
            Self::InputChannels { expected, found } => {
                write!(
                    f,
                    "network has {expected} input channels, encoder produced {found}"
                )
            }
            Self::UnlabeledSample(i) => write!(f, "sample {i} has no label"),
            Self::NoData => write!(f, "dataset is empty"),
        }
    }
}

impl core::error::Error for SimError {}
