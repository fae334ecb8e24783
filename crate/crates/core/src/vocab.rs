//! Variable names available inside circuit and neuron equations.
//!
//! Every compiled equation shares one slot layout; the engine fills the
//! slots it knows for the synapse or neuron being evaluated.

use core::ops::{Index, IndexMut};

pub const V_PRE: usize = 0;
pub const V_POST1: usize = 1;
pub const V_POST2: usize = 2;
pub const V_NODE1: usize = 3;
pub const V_NODE2: usize = 4;
pub const V_TB: usize = 5;
/// Device conductance.
pub const G: usize = 6;
/// Total input current of the neuron.
pub const I: usize = 7;
/// Neuron state variable.
pub const V: usize = 8;
pub const DT: usize = 9;
pub const TAU: usize = 10;
pub const THRES: usize = 11;
pub const R_MEM: usize = 12;

pub const NAMES: [&str; 13] = [
    "V_pre", "V_post1", "V_post2", "V_node1", "V_node2", "V_TB", "G", "I", "V", "dt", "tau",
    "thres", "r_mem",
];

/// Values for every vocabulary slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slots(pub [f64; NAMES.len()]);

impl Slots {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Slots {
    type Output = f64;
    fn index(&self, idx: usize) -> &f64 {
        &self.0[idx]
    }
}

impl IndexMut<usize> for Slots {
    fn index_mut(&mut self, idx: usize) -> &mut f64 {
        &mut self.0[idx]
    }
}
