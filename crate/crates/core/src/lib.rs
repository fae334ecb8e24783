//! Simulation core for spiking neural networks built from nanodevice
//! synapses and neurons.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration and the
//! command line live in the `spikeforge` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod calibration;
pub mod encoding;
pub mod engine;
pub mod expr;
pub mod grid;
pub mod interp;
pub mod neuron;
pub mod rng;
pub mod stdp;
pub mod synapse;
pub mod tuner;
pub mod vocab;
pub mod waveform;
