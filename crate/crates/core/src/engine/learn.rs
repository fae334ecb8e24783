use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::encoding::{Encoder, Sample};
use crate::grid::{check_dt, num_steps};
use crate::rng::{derive_seed, seeded};

use super::network::Network;
use super::{SimError, STREAM_INFER, STREAM_LABEL, STREAM_SHUFFLE, STREAM_TRAIN};

/// Timing and ordering of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Total training time in seconds.
    pub duration: f64,
    pub dt: f64,
    /// Presentation window of one sample in seconds.
    pub sample_window: f64,
    /// Reset membrane state and pending waveforms before each training
    /// presentation. Labelling and inference always reset.
    pub reset_between_samples: bool,
    pub shuffle: bool,
    pub seed: u64,
    /// Report training accuracy every this many steps.
    pub checkpoint_steps: Option<u64>,
}

impl SimConfig {
    /// `(total steps, steps per sample)`.
    pub fn steps(&self) -> Result<(u64, u64), SimError> {
        check_dt(self.dt)?;
        let total = num_steps(self.duration, self.dt)?;
        let window = num_steps(self.sample_window, self.dt)?;
        if window == 0 {
            return Err(crate::grid::GridError::WindowShorterThanStep {
                window: self.sample_window,
                dt: self.dt,
            }
            .into());
        }
        Ok((total, window))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub steps: u64,
    pub presentations: u64,
    /// Accuracy on the training set at each checkpoint; always ends with
    /// the final state.
    pub checkpoints: Vec<Checkpoint>,
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    /// `counts[true][predicted]`, with column `classes` counting samples
    /// that got no prediction.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![vec![0; classes + 1]; classes],
        }
    }

    fn record(&mut self, truth: usize, predicted: Option<usize>) {
        let col = predicted
            .filter(|&p| p < self.classes)
            .unwrap_or(self.classes);
        self.counts[truth][col] += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub predictions: Vec<Option<usize>>,
    /// Spike counts of the label layer for each sample.
    pub spike_counts: Vec<Vec<u64>>,
    /// Fraction of labelled samples predicted correctly; `None` without
    /// labelled samples.
    pub accuracy: Option<f64>,
    pub confusion: ConfusionMatrix,
}

/// Seed of the spike trains that encode sample `index` during labelling
/// and inference.
pub fn inference_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, STREAM_INFER, index as u64)
}

/// Index of the largest count, lowest index on ties; `None` if all are zero.
pub fn winner(counts: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

fn classes(data: &[Sample], labels: &[Option<usize>]) -> usize {
    data.iter()
        .filter_map(|s| s.label)
        .chain(labels.iter().flatten().copied())
        .max()
        .map_or(0, |m| m + 1)
}

/// Runs one sample for `steps` steps and returns the label-layer counts.
#[allow(clippy::too_many_arguments)]
fn present(
    net: &mut Network,
    sample: &Sample,
    index: usize,
    encoder: &Encoder,
    cfg: &SimConfig,
    steps: u64,
    seed: u64,
    reset: bool,
) -> Result<Vec<u64>, SimError> {
    if reset {
        net.reset_dynamics();
    }
    net.reset_counts();
    let mut rng = seeded(seed);
    let trains = encoder
        .encode(
            sample,
            net.layer_size(0),
            cfg.sample_window,
            cfg.dt,
            &mut rng,
        )
        .map_err(|source| SimError::Encoding {
            sample: index,
            source,
        })?;
    net.load_input(&trains)?;
    for _ in 0..steps {
        net.run_timestep(cfg.dt)?;
    }
    Ok(net.spike_counts(net.label_layer()).to_vec())
}

/// Runs `f` with plasticity disabled, restoring the previous setting.
fn frozen<T>(
    net: &mut Network,
    f: impl FnOnce(&mut Network) -> Result<T, SimError>,
) -> Result<T, SimError> {
    let was = core::mem::replace(&mut net.frozen, true);
    let out = f(net);
    net.frozen = was;
    out
}

/// Presents every sample with plasticity frozen, each from a reset state,
/// and labels each label-layer neuron with the class it fired most for.
/// Silent neurons stay unlabelled.
pub fn assign_labels(
    net: &mut Network,
    data: &[Sample],
    encoder: &Encoder,
    cfg: &SimConfig,
) -> Result<Vec<Option<usize>>, SimError> {
    let (_, window) = cfg.steps()?;
    if data.is_empty() {
        return Err(SimError::NoData);
    }
    let n_classes = classes(data, &[]);
    let n = net.layer_size(net.label_layer());
    let mut response = vec![vec![0u64; n_classes]; n];
    frozen(net, |net| {
        for (index, sample) in data.iter().enumerate() {
            let label = sample.label.ok_or(SimError::UnlabeledSample(index))?;
            let seed = derive_seed(cfg.seed, STREAM_LABEL, index as u64);
            let counts = present(net, sample, index, encoder, cfg, window, seed, true)?;
            for (neuron, c) in counts.into_iter().enumerate() {
                response[neuron][label] += c;
            }
        }
        Ok(())
    })?;
    let labels: Vec<Option<usize>> = response.iter().map(|r| winner(r)).collect();
    net.set_labels(labels.clone());
    Ok(labels)
}

/// Classifies every sample with plasticity frozen, each from a reset
/// network state so predictions do not depend on sample order.
pub fn infer(
    net: &mut Network,
    data: &[Sample],
    encoder: &Encoder,
    cfg: &SimConfig,
) -> Result<InferenceReport, SimError> {
    let (_, window) = cfg.steps()?;
    if data.is_empty() {
        return Err(SimError::NoData);
    }
    frozen(net, |net| {
        let mut confusion = ConfusionMatrix::new(classes(data, net.labels()));
        let mut predictions = Vec::with_capacity(data.len());
        let mut spike_counts = Vec::with_capacity(data.len());
        let (mut scored, mut correct) = (0u64, 0u64);
        for (index, sample) in data.iter().enumerate() {
            let seed = inference_seed(cfg.seed, index);
            let counts = present(net, sample, index, encoder, cfg, window, seed, true)?;
            let predicted = winner(&counts).and_then(|w| net.labels()[w]);
            if let Some(truth) = sample.label {
                scored += 1;
                correct += u64::from(predicted == Some(truth));
                confusion.record(truth, predicted);
            }
            predictions.push(predicted);
            spike_counts.push(counts);
        }
        Ok(InferenceReport {
            predictions,
            spike_counts,
            accuracy: (scored > 0).then(|| correct as f64 / scored as f64),
            confusion,
        })
    })
}

fn training_accuracy(
    net: &mut Network,
    data: &[Sample],
    encoder: &Encoder,
    cfg: &SimConfig,
) -> Result<f64, SimError> {
    assign_labels(net, data, encoder, cfg)?;
    Ok(infer(net, data, encoder, cfg)?.accuracy.unwrap_or(0.0))
}

/// Unsupervised training for the configured duration, followed by label
/// assignment on the training set.
pub fn train(
    net: &mut Network,
    data: &[Sample],
    encoder: &Encoder,
    cfg: &SimConfig,
) -> Result<TrainReport, SimError> {
    let (total, window) = cfg.steps()?;
    if data.is_empty() {
        return Err(SimError::NoData);
    }
    if let Some(index) = data.iter().position(|s| s.label.is_none()) {
        return Err(SimError::UnlabeledSample(index));
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut pass = 0u64;
    let reorder = |order: &mut Vec<usize>, pass: u64| {
        if cfg.shuffle {
            order.sort_unstable();
            order.shuffle(&mut seeded(derive_seed(cfg.seed, STREAM_SHUFFLE, pass)));
        }
    };
    reorder(&mut order, pass);

    net.frozen = false;
    net.reset_dynamics();
    let mut checkpoints = Vec::new();
    let (mut done, mut presentations, mut cursor) = (0u64, 0u64, 0usize);
    while done < total {
        if cursor == order.len() {
            cursor = 0;
            pass += 1;
            reorder(&mut order, pass);
        }
        let index = order[cursor];
        cursor += 1;
        let steps = window.min(total - done);
        let seed = derive_seed(cfg.seed, STREAM_TRAIN, presentations);
        present(
            net,
            &data[index],
            index,
            encoder,
            cfg,
            steps,
            seed,
            cfg.reset_between_samples,
        )?;
        presentations += 1;
        let before = done;
        done += steps;
        if let Some(every) = cfg.checkpoint_steps.filter(|&c| c > 0) {
            if done < total && before / every < done / every {
                let mut probe = net.clone();
                let acc = training_accuracy(&mut probe, data, encoder, cfg)?;
                log::info!("step {done}: training accuracy {acc:.4}");
                checkpoints.push(Checkpoint {
                    step: done,
                    training_accuracy: acc,
                });
            }
        }
    }

    let acc = training_accuracy(net, data, encoder, cfg)?;
    checkpoints.push(Checkpoint {
        step: total,
        training_accuracy: acc,
    });
    Ok(TrainReport {
        steps: total,
        presentations,
        checkpoints,
        training_accuracy: acc,
    })
}
