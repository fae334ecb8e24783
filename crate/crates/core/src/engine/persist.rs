//! Plain-text serialisation of trained conductances and neuron labels.
//!
//! ```text
//! spikeforge-net v1
//! 1,0,0,1.5e-6
//! 1,0,1,2e-6
//! label,0,1
//! label,1,none
//! ```
//!
//! Weight lines are `layer,pre,post,siemens` for every existing synapse;
//! `label` lines cover every neuron of the label layer. Values are written
//! in shortest round-trip form, so reloading restores them bit for bit.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use super::network::{ConnType, Network};

pub const WEIGHTS_MAGIC: &str = "spikeforge-net";
pub const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum PersistError {
    VersionMismatch { found: String, expected: u32 },
    Corrupt { line: usize, reason: String },
}

impl fmt::Display for PersistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::VersionMismatch { found, expected } => write!(
                f,
                "weights file version {found} does not match supported version {expected}"
            ),
            Self::Corrupt { line: 0, reason } => write!(f, "corrupt weights file: {reason}"),
            Self::Corrupt { line, reason } => {
                write!(f, "corrupt weights file, line {line}: {reason}")
            }
        }
    }
}

impl core::error::Error for PersistError {}

fn corrupt(line: usize, reason: impl Into<String>) -> PersistError {
    PersistError::Corrupt {
        line,
        reason: reason.into(),
    }
}

impl Network {
    pub fn weights_text(&self) -> String {
        let mut out = format!("{WEIGHTS_MAGIC} v{WEIGHTS_VERSION}\n");
        for (m, matrix) in self.synapses.iter().enumerate() {
            for (i, j, s) in matrix.iter() {
                let _ = writeln!(out, "{},{i},{j},{:e}", m + 1, s.g);
            }
        }
        for (n, label) in self.labels.iter().enumerate() {
            match label {
                Some(c) => {
                    let _ = writeln!(out, "label,{n},{c}");
                }
                None => {
                    let _ = writeln!(out, "label,{n},none");
                }
            }
        }
        out
    }

    /// Replaces all conductances and labels with those in `text`. The file
    /// must describe this network's topology completely; sparse layers take
    /// their connectivity from the file. Nothing changes on error.
    pub fn apply_weights_text(&mut self, text: &str) -> Result<(), PersistError> {
        let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
        let header = loop {
            match lines.next() {
                Some((_, "")) => continue,
                Some((n, l)) => break (n, l),
                None => return Err(corrupt(0, "file is empty")),
            }
        };
        let version = header
            .1
            .strip_prefix(WEIGHTS_MAGIC)
            .and_then(|rest| rest.trim().strip_prefix('v'))
            .ok_or_else(|| {
                corrupt(
                    header.0,
                    format!("expected header '{WEIGHTS_MAGIC} v{WEIGHTS_VERSION}'"),
                )
            })?;
        if version.parse::<u32>() != Ok(WEIGHTS_VERSION) {
            return Err(PersistError::VersionMismatch {
                found: version.to_string(),
                expected: WEIGHTS_VERSION,
            });
        }

        let mut weights: Vec<Vec<Option<f64>>> = self
            .synapses
            .iter()
            .map(|m| vec![None; m.cells.len()])
            .collect();
        let mut labels: Vec<Option<Option<usize>>> = vec![None; self.labels.len()];
        for (n, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields[0] == "label" {
                let [_, neuron, class] = fields[..] else {
                    return Err(corrupt(n, "label lines need 3 fields"));
                };
                let neuron: usize = neuron.parse().map_err(|_| corrupt(n, "bad neuron index"))?;
                let slot = labels
                    .get_mut(neuron)
                    .ok_or_else(|| corrupt(n, format!("label neuron {neuron} out of range")))?;
                if slot.is_some() {
                    return Err(corrupt(n, format!("duplicate label for neuron {neuron}")));
                }
                *slot = Some(match class {
                    "none" => None,
                    c => Some(c.parse().map_err(|_| corrupt(n, "bad class"))?),
                });
                continue;
            }
            let [layer, i, j, g] = fields[..] else {
                return Err(corrupt(n, "weight lines need 4 fields"));
            };
            let parse = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|_| corrupt(n, format!("bad {what} index '{s}'")))
            };
            let (layer, i, j) = (parse(layer, "layer")?, parse(i, "pre")?, parse(j, "post")?);
            let g: f64 = g
                .parse()
                .map_err(|_| corrupt(n, format!("bad conductance '{g}'")))?;
            if layer == 0 || layer > self.synapses.len() {
                return Err(corrupt(
                    n,
                    format!("layer {layer} has no incoming synapses"),
                ));
            }
            let matrix = &self.synapses[layer - 1];
            if i >= matrix.n_pre || j >= matrix.n_post {
                return Err(corrupt(
                    n,
                    format!("synapse ({i}, {j}) outside layer {layer}"),
                ));
            }
            let cell = i * matrix.n_post + j;
            let sparse = matches!(self.spec.layers[layer].conn, ConnType::Sparse(_));
            if !sparse && matrix.cells[cell].is_none() {
                return Err(corrupt(
                    n,
                    format!("layer {layer} has no synapse ({i}, {j})"),
                ));
            }
            let device = &self.spec.layers[layer].models.as_ref().unwrap().device;
            if !(g >= device.g_min() && g <= device.g_max()) {
                return Err(corrupt(n, format!("conductance {g} outside device range")));
            }
            if weights[layer - 1][cell].replace(g).is_some() {
                return Err(corrupt(
                    n,
                    format!("duplicate synapse ({i}, {j}) in layer {layer}"),
                ));
            }
        }

        for (m, matrix) in self.synapses.iter().enumerate() {
            let sparse = matches!(self.spec.layers[m + 1].conn, ConnType::Sparse(_));
            for (cell, w) in weights[m].iter().enumerate() {
                if !sparse && matrix.cells[cell].is_some() && w.is_none() {
                    let (i, j) = (cell / matrix.n_post, cell % matrix.n_post);
                    return Err(corrupt(
                        0,
                        format!("missing synapse ({i}, {j}) of layer {}", m + 1),
                    ));
                }
            }
            if sparse {
                for j in 0..matrix.n_post {
                    if (0..matrix.n_pre).all(|i| weights[m][i * matrix.n_post + j].is_none()) {
                        return Err(corrupt(
                            0,
                            format!("neuron {j} of layer {} has no inputs", m + 1),
                        ));
                    }
                }
            }
        }
        if let Some(n) = labels.iter().position(Option::is_none) {
            return Err(corrupt(0, format!("missing label for neuron {n}")));
        }

        for (matrix, w) in self.synapses.iter_mut().zip(weights) {
            for (cell, g) in matrix.cells.iter_mut().zip(w) {
                match (cell.as_mut(), g) {
                    (Some(s), Some(g)) => s.g = g,
                    (None, Some(g)) => *cell = Some(crate::synapse::SynapseState::new(g)),
                    (_, None) => *cell = None,
                }
            }
        }
        self.labels = labels.into_iter().map(Option::unwrap).collect();
        Ok(())
    }
}
