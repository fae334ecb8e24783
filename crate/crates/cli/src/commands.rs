use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use spikeforge_core::encoding::Sample;
use spikeforge_core::engine::{self, inference_seed, ConfusionMatrix};
use spikeforge_core::rng::{derive_seed, seeded};
use spikeforge_core::stdp::Pairing;
use spikeforge_core::tuner::{
    ga_optimize, Candidate, GaConfig, GaError, GaOutcome, ParamKind, ParamRange,
};

use crate::config::{Config, TuneSettings};
use crate::error::CliError;
use crate::io::{read_dataset, write_csv, write_text};

/// Random stream for the tuner's train/validation split.
const STREAM_SPLIT: u64 = 0x5350_4c49;

#[derive(Debug, Parser)]
#[command(
    name = "spikeforge",
    version,
    about = "Clock-driven spiking network simulator for nanodevice hardware"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Parameter file.
    pub config: PathBuf,
    /// Overrides `[sim] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the training set; write weights and checkpoint metrics.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "weights.txt")]
        weights: PathBuf,
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
    },
    /// Classify a dataset with trained weights.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Weights file written by `train`.
        #[arg(long)]
        weights: PathBuf,
        /// Dataset to classify; defaults to the configured test set, then
        /// the training set.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "confusion.csv")]
        confusion: PathBuf,
    },
    /// Search the `[tune]` parameter space with a genetic algorithm.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tuning.csv")]
        report: PathBuf,
        /// Worker threads for candidate evaluation; all cores by default.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Conductance change of one synapse against pre/post spike lag.
    StdpCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -0.05, allow_negative_numbers = true)]
        dt_min: f64,
        #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
        dt_max: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value = "stdp.csv")]
        out: PathBuf,
    },
    /// Write the input spike trains of one sample as presented at inference.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "encode.csv")]
        out: PathBuf,
    },
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::io("<stdout>", e))
}

fn load(common: &Common) -> Result<Config, CliError> {
    let mut cfg = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn dataset(cfg: &Config, choices: &[Option<&Path>]) -> Result<Vec<Sample>, CliError> {
    let path = choices.iter().flatten().next().ok_or_else(|| {
        CliError::Usage("no dataset: set [data] train_path or pass --data".into())
    })?;
    let samples = read_dataset(path, &cfg.dataset_format)?;
    if samples.is_empty() {
        return Err(CliError::Usage(format!(
            "{} holds no samples",
            path.display()
        )));
    }
    Ok(samples)
}

fn fmt_accuracy(acc: Option<f64>) -> String {
    acc.map_or_else(|| "n/a (no labelled samples)".into(), |a| a.to_string())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Train {
            common,
            weights,
            metrics,
        } => train(common, weights, metrics, out),
        Command::Infer {
            common,
            weights,
            data,
            confusion,
        } => infer(common, weights, data.as_deref(), confusion, out),
        Command::Tune {
            common,
            report,
            threads,
        } => tune(common, report, *threads, out),
        Command::StdpCurve {
            common,
            dt_min,
            dt_max,
            points,
            out: path,
        } => stdp_curve(common, *dt_min, *dt_max, *points, path, out),
        Command::Encode {
            common,
            sample,
            data,
            out: path,
        } => encode(common, *sample, data.as_deref(), path, out),
    }
}

fn train(
    common: &Common,
    weights: &Path,
    metrics: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load(common)?;
    let data = dataset(&cfg, &[cfg.data.train.as_deref()])?;
    let mut net = cfg.build_network()?;
    let report = engine::train(&mut net, &data, &cfg.encoder, &cfg.sim).map_err(CliError::sim)?;
    write_text(weights, &net.weights_text())?;
    write_csv(
        metrics,
        &["epoch_step".into(), "train_acc".into()],
        report
            .checkpoints
            .iter()
            .map(|c| vec![c.step.to_string(), c.training_accuracy.to_string()]),
    )?;
    say(
        out,
        format_args!("training_accuracy: {}", report.training_accuracy),
    )?;
    if let Some(test) = &cfg.data.test {
        let test = dataset(&cfg, &[Some(test)])?;
        let report =
            engine::infer(&mut net, &test, &cfg.encoder, &cfg.sim).map_err(CliError::sim)?;
        say(
            out,
            format_args!("testing_accuracy: {}", fmt_accuracy(report.accuracy)),
        )?;
    }
    Ok(())
}

fn confusion_rows(m: &ConfusionMatrix) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["class".to_string()];
    header.extend((0..m.classes).map(|c| format!("predicted_{c}")));
    header.push("predicted_none".into());
    let rows = m
        .counts
        .iter()
        .enumerate()
        .map(|(c, row)| {
            std::iter::once(c.to_string())
                .chain(row.iter().map(u64::to_string))
                .collect()
        })
        .collect();
    (header, rows)
}

fn infer(
    common: &Common,
    weights: &Path,
    data: Option<&Path>,
    confusion: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load(common)?;
    let samples = dataset(
        &cfg,
        &[data, cfg.data.test.as_deref(), cfg.data.train.as_deref()],
    )?;
    let mut net = cfg.build_network()?;
    let text = std::fs::read_to_string(weights).map_err(|e| CliError::io(weights, e))?;
    net.apply_weights_text(&text)
        .map_err(|source| CliError::Weights {
            path: weights.to_path_buf(),
            source,
        })?;
    let report =
        engine::infer(&mut net, &samples, &cfg.encoder, &cfg.sim).map_err(CliError::sim)?;
    let (header, rows) = confusion_rows(&report.confusion);
    write_csv(confusion, &header, rows)?;
    say(
        out,
        format_args!("testing_accuracy: {}", fmt_accuracy(report.accuracy)),
    )
}

/// Splits sample indices into (training, validation) with a seeded shuffle.
fn split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    use rand::seq::SliceRandom;
    if n < 2 {
        return Err(CliError::Usage(
            "tuning needs at least two training samples".into(),
        ));
    }
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(derive_seed(seed, STREAM_SPLIT, 0)));
    let (mut val, mut train) = (order[..n_val].to_vec(), order[n_val..].to_vec());
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

fn describe(space: &[ParamRange], values: &[f64]) -> String {
    space
        .iter()
        .zip(values)
        .map(|(r, v)| format!("{}={v}", r.name))
        .collect::<Vec<_>>()
        .join(";")
}

fn evaluate(
    cfg: &Config,
    cand: &Candidate,
    train: &[Sample],
    val: &[Sample],
) -> Result<f64, CliError> {
    let mut c = cfg.with_params(&cand.params)?;
    c.set_seed(cand.seed);
    let mut net = c.build_network()?;
    engine::train(&mut net, train, &c.encoder, &c.sim).map_err(CliError::sim)?;
    let report = engine::infer(&mut net, val, &c.encoder, &c.sim).map_err(CliError::sim)?;
    Ok(report.accuracy.unwrap_or(0.0))
}

/// Runs the GA for `cfg` on `data`, evaluating candidates on `threads`
/// workers (0 for all cores).
pub fn tune_outcome(
    cfg: &Config,
    settings: &TuneSettings,
    data: &[Sample],
    threads: usize,
) -> Result<GaOutcome, CliError> {
    let seed = settings.seed.unwrap_or(cfg.sim.seed);
    let (train_idx, val_idx) = split(data.len(), settings.validation_split, seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    let (train, val) = (pick(&train_idx), pick(&val_idx));
    let ga = GaConfig {
        seed,
        ..settings.ga.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| {
        ga_optimize(&settings.space, &ga, |cands: &[Candidate]| {
            cands
                .par_iter()
                .map(|c| evaluate(cfg, c, &train, &val))
                .collect()
        })
    })
    .map_err(|e| match e {
        GaError::Setup(e) => CliError::Usage(e.to_string()),
        GaError::Fitness { params, source } => CliError::Candidate {
            params: describe(&settings.space, &params),
            source: Box::new(source),
        },
    })
}

/// TOML snippet that applies `values`, grouped by section.
pub fn echo_params(space: &[ParamRange], values: &[f64]) -> String {
    let mut sections: Vec<(&str, Vec<String>)> = Vec::new();
    for (r, &v) in space.iter().zip(values) {
        let (section, key) = r.name.rsplit_once('.').unwrap_or(("", &r.name));
        let value = match r.kind {
            ParamKind::Integer => format!("{}", v as i64),
            ParamKind::Real => format!("{v:?}"),
        };
        let line = format!("{key} = {value}");
        match sections.iter_mut().find(|(s, _)| *s == section) {
            Some((_, lines)) => lines.push(line),
            None => sections.push((section, vec![line])),
        }
    }
    sections
        .into_iter()
        .map(|(s, lines)| format!("[{s}]\n{}\n", lines.join("\n")))
        .collect::<Vec<_>>()
        .join("\n")
}

fn tune(
    common: &Common,
    report: &Path,
    threads: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load(common)?;
    let settings = cfg
        .tune
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{} has no [tune] section", cfg.path.display())))?;
    let data = dataset(&cfg, &[cfg.data.train.as_deref()])?;
    let outcome = tune_outcome(&cfg, &settings, &data, threads.unwrap_or(0))?;
    write_csv(
        report,
        &[
            "generation".into(),
            "best_fitness".into(),
            "mean_fitness".into(),
            "best_params".into(),
        ],
        outcome.history.iter().map(|g| {
            vec![
                g.generation.to_string(),
                g.best_fitness.to_string(),
                g.mean_fitness.to_string(),
                describe(&settings.space, &g.best_params),
            ]
        }),
    )?;
    say(out, format_args!("best_fitness: {}", outcome.best_fitness))?;
    say(
        out,
        format_args!(
            "# best parameters; apply with `train`\n{}",
            echo_params(&settings.space, &outcome.best_params)
        ),
    )
}

fn stdp_curve(
    common: &Common,
    dt_min: f64,
    dt_max: f64,
    points: usize,
    path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if points == 0 || !(dt_min <= dt_max) {
        return Err(CliError::Usage(
            "need --points >= 1 and --dt-min <= --dt-max".into(),
        ));
    }
    let cfg = load(common)?;
    let models = cfg.network.layers[cfg.stdp.layer]
        .models
        .as_ref()
        .expect("validated: stdp layer has models");
    let pairing = Pairing {
        neuron: &models.neuron,
        circuit: &models.circuit,
        device: &models.device,
        dt: cfg.sim.dt,
    };
    let curve = pairing
        .curve(&cfg.stdp.initial_g, dt_min, dt_max, points)
        .map_err(CliError::sim)?;
    write_csv(
        path,
        &[
            "initial_g_siemens".into(),
            "delta_t_seconds".into(),
            "delta_g_siemens".into(),
        ],
        curve.iter().map(|p| {
            vec![
                format!("{:e}", p.initial_g),
                p.delta_t.to_string(),
                format!("{:e}", p.delta_g),
            ]
        }),
    )?;
    say(
        out,
        format_args!("wrote {} points to {}", curve.len(), path.display()),
    )
}

fn encode(
    common: &Common,
    index: usize,
    data: Option<&Path>,
    path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load(common)?;
    let samples = dataset(&cfg, &[data, cfg.data.train.as_deref()])?;
    let sample = samples.get(index).ok_or_else(|| {
        CliError::Usage(format!(
            "sample {index} out of range; dataset has {}",
            samples.len()
        ))
    })?;
    let mut rng = seeded(inference_seed(cfg.sim.seed, index));
    let channels = cfg.network.layers[0].neurons;
    let trains = cfg
        .encoder
        .encode(
            sample,
            channels,
            cfg.sim.sample_window,
            cfg.sim.dt,
            &mut rng,
        )
        .map_err(CliError::sim)?;
    let rows: Vec<Vec<String>> = trains
        .iter()
        .enumerate()
        .flat_map(|(c, t)| {
            t.times()
                .map(move |time| vec![c.to_string(), time.to_string()])
        })
        .collect();
    let n = rows.len();
    write_csv(path, &["channel".into(), "time_seconds".into()], rows)?;
    say(out, format_args!("wrote {n} spikes to {}", path.display()))
}
