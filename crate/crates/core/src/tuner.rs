//! Real-coded genetic algorithm for tuning configuration parameters.
//!
//! Genes live in scale space: the raw value for linear parameters and its
//! natural log for log-scaled ones. Fitness is maximised. Evaluation is
//! delegated to a caller-supplied batch function so a whole generation can
//! be scored concurrently; every candidate carries its own seed derived from
//! `(seed, generation, index)`, and results are consumed in index order.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::{derive_seed, seeded, SimRng};

const STREAM_OPERATORS: u64 = 0x6761;
const STREAM_EVAL: u64 = 0x6576;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamKind {
    #[default]
    Real,
    Integer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub scale: Scale,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TunerError {
    EmptySpace,
    Range { name: String, lo: f64, hi: f64 },
    LogRange { name: String, lo: f64 },
    Config(&'static str),
    GenomeLength { expected: usize, found: usize },
}

impl fmt::Display for TunerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptySpace => write!(f, "no parameters to tune"),
            Self::Range { name, lo, hi } => {
                write!(f, "parameter {name}: need finite lo < hi, got [{lo}, {hi}]")
            }
            Self::LogRange { name, lo } => {
                write!(f, "parameter {name}: log scale needs lo > 0, got {lo}")
            }
            Self::Config(msg) => write!(f, "invalid GA configuration: {msg}"),
            Self::GenomeLength { expected, found } => {
                write!(
                    f,
                    "genome has {found} genes, parameter space has {expected}"
                )
            }
        }
    }
}

impl core::error::Error for TunerError {}

impl ParamRange {
    pub fn new(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        scale: Scale,
        kind: ParamKind,
    ) -> Result<Self, TunerError> {
        let r = Self {
            name: name.into(),
            lo,
            hi,
            scale,
            kind,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), TunerError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(TunerError::Range {
                name: self.name.clone(),
                lo: self.lo,
                hi: self.hi,
            });
        }
        if self.scale == Scale::Log && self.lo <= 0.0 {
            return Err(TunerError::LogRange {
                name: self.name.clone(),
                lo: self.lo,
            });
        }
        Ok(())
    }

    /// Gene bounds in scale space.
    pub fn gene_bounds(&self) -> (f64, f64) {
        match self.scale {
            Scale::Linear => (self.lo, self.hi),
            Scale::Log => (libm::log(self.lo), libm::log(self.hi)),
        }
    }

    pub fn decode_gene(&self, gene: f64) -> f64 {
        let value = match self.scale {
            Scale::Linear => gene,
            Scale::Log => libm::exp(gene),
        };
        let value = match self.kind {
            ParamKind::Real => value,
            ParamKind::Integer => libm::floor(value + 0.5),
        };
        value.clamp(self.lo, self.hi)
    }
}

/// Maps a genome onto parameter values, one per range.
pub fn decode(genome: &[f64], space: &[ParamRange]) -> Result<Vec<f64>, TunerError> {
    if genome.len() != space.len() {
        return Err(TunerError::GenomeLength {
            expected: space.len(),
            found: genome.len(),
        });
    }
    Ok(genome
        .iter()
        .zip(space)
        .map(|(&g, r)| r.decode_gene(g))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 20,
            generations: 15,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma: 0.1,
            elitism: 1,
            tournament_size: 2,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), TunerError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.population < self.elitism + 1 {
            return Err(TunerError::Config("population must exceed elitism"));
        }
        if self.tournament_size < 2 {
            return Err(TunerError::Config("tournament_size must be at least 2"));
        }
        if !unit(self.crossover_rate) || !unit(self.mutation_rate) {
            return Err(TunerError::Config(
                "crossover_rate and mutation_rate must lie in [0, 1]",
            ));
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return Err(TunerError::Config("mutation_sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub fitness: Option<f64>,
}

/// One fitness evaluation requested from the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub generation: usize,
    pub index: usize,
    /// Decoded parameter values in space order.
    pub params: Vec<f64>,
    /// Seed for any randomness inside this evaluation.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Individual,
    pub best_params: Vec<f64>,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaError<E> {
    Setup(TunerError),
    Fitness { params: Vec<f64>, source: E },
}

impl<E: fmt::Display> fmt::Display for GaError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Setup(e) => e.fmt(f),
            Self::Fitness { params, source } => {
                write!(
                    f,
                    "fitness evaluation failed for parameters {params:?}: {source}"
                )
            }
        }
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for GaError<E> {}

pub fn candidate_seed(seed: u64, generation: usize, index: usize) -> u64 {
    derive_seed(
        derive_seed(seed, STREAM_EVAL, generation as u64),
        STREAM_EVAL,
        index as u64,
    )
}

fn score(raw: f64) -> f64 {
    if raw.is_nan() {
        log::warn!("fitness evaluated to NaN, treated as -inf");
        f64::NEG_INFINITY
    } else {
        raw
    }
}

fn fitness(ind: &Individual) -> f64 {
    ind.fitness.unwrap_or(f64::NEG_INFINITY)
}

fn tournament(pop: &[Individual], size: usize, rng: &mut SimRng) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if fitness(&pop[c]) > fitness(&pop[best])
            || (fitness(&pop[c]) == fitness(&pop[best]) && c < best)
        {
            best = c;
        }
    }
    best
}

/// Runs the GA. `evaluate` receives each generation's unscored candidates
/// and must return one result per candidate, in the same order.
pub fn ga_optimize<E, F>(
    space: &[ParamRange],
    cfg: &GaConfig,
    mut evaluate: F,
) -> Result<GaOutcome, GaError<E>>
where
    F: FnMut(&[Candidate]) -> Vec<Result<f64, E>>,
{
    if space.is_empty() {
        return Err(GaError::Setup(TunerError::EmptySpace));
    }
    for r in space {
        r.validate().map_err(GaError::Setup)?;
    }
    cfg.validate().map_err(GaError::Setup)?;

    let bounds: Vec<(f64, f64)> = space.iter().map(ParamRange::gene_bounds).collect();
    let mut rng = seeded(derive_seed(cfg.seed, STREAM_OPERATORS, 0));
    let mut pop: Vec<Individual> = (0..cfg.population)
        .map(|_| Individual {
            genome: bounds
                .iter()
                .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                .collect(),
            fitness: None,
        })
        .collect();

    let mut history = Vec::with_capacity(cfg.generations + 1);
    let mut best_ever: Option<Individual> = None;
    for generation in 0..=cfg.generations {
        if generation > 0 {
            pop = breed(&pop, &bounds, cfg, &mut rng);
        }

        let pending: Vec<usize> = (0..pop.len())
            .filter(|&i| pop[i].fitness.is_none())
            .collect();
        let batch: Vec<Candidate> = pending
            .iter()
            .map(|&index| Candidate {
                generation,
                index,
                params: decode(&pop[index].genome, space).expect("genome matches space"),
                seed: candidate_seed(cfg.seed, generation, index),
            })
            .collect();
        let results = evaluate(&batch);
        assert_eq!(
            results.len(),
            batch.len(),
            "evaluator must score every candidate"
        );
        for (cand, result) in batch.into_iter().zip(results) {
            match result {
                Ok(f) => pop[cand.index].fitness = Some(score(f)),
                Err(source) => {
                    return Err(GaError::Fitness {
                        params: cand.params,
                        source,
                    })
                }
            }
        }

        let best = (0..pop.len())
            .reduce(|a, b| {
                if fitness(&pop[b]) > fitness(&pop[a]) {
                    b
                } else {
                    a
                }
            })
            .expect("population is non-empty");
        let mean = pop.iter().map(fitness).sum::<f64>() / pop.len() as f64;
        history.push(GenerationStats {
            generation,
            best_fitness: fitness(&pop[best]),
            mean_fitness: mean,
            best_params: decode(&pop[best].genome, space).expect("genome matches space"),
        });
        if best_ever
            .as_ref()
            .is_none_or(|b| fitness(&pop[best]) > fitness(b))
        {
            best_ever = Some(pop[best].clone());
        }
    }

    let best = best_ever.expect("at least one generation evaluated");
    Ok(GaOutcome {
        best_params: decode(&best.genome, space).expect("genome matches space"),
        best_fitness: fitness(&best),
        best,
        history,
    })
}

fn breed(
    pop: &[Individual],
    bounds: &[(f64, f64)],
    cfg: &GaConfig,
    rng: &mut SimRng,
) -> Vec<Individual> {
    let mut ranked: Vec<usize> = (0..pop.len()).collect();
    ranked.sort_by(|&a, &b| {
        fitness(&pop[b])
            .total_cmp(&fitness(&pop[a]))
            .then(a.cmp(&b))
    });
    let mut next: Vec<Individual> = ranked[..cfg.elitism]
        .iter()
        .map(|&i| pop[i].clone())
        .collect();

    let normals: Vec<Option<Normal<f64>>> = bounds
        .iter()
        .map(|&(lo, hi)| Normal::new(0.0, cfg.mutation_sigma * (hi - lo)).ok())
        .collect();
    while next.len() < cfg.population {
        let a = &pop[tournament(pop, cfg.tournament_size, rng)].genome;
        let b = &pop[tournament(pop, cfg.tournament_size, rng)].genome;
        let (mut c1, mut c2) = (a.clone(), b.clone());
        if rng.random::<f64>() < cfg.crossover_rate {
            for g in 0..c1.len() {
                if rng.random::<bool>() {
                    core::mem::swap(&mut c1[g], &mut c2[g]);
                }
            }
        }
        for child in [c1, c2] {
            if next.len() == cfg.population {
                break;
            }
            let mut genome = child;
            for (g, gene) in genome.iter_mut().enumerate() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    if let Some(n) = &normals[g] {
                        let (lo, hi) = bounds[g];
                        *gene = (*gene + n.sample(rng)).clamp(lo, hi);
                    }
                }
            }
            next.push(Individual {
                genome,
                fitness: None,
            });
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn range(lo: f64, hi: f64, scale: Scale, kind: ParamKind) -> ParamRange {
        ParamRange::new("p", lo, hi, scale, kind).unwrap()
    }

    #[test]
    fn decoding() {
        let lin = range(0.0, 1.0, Scale::Linear, ParamKind::Real);
        assert_eq!(lin.decode_gene(0.5), 0.5);
        let log = range(1.0, 100.0, Scale::Log, ParamKind::Real);
        let (lo, hi) = log.gene_bounds();
        assert!((log.decode_gene(0.5 * (lo + hi)) - 10.0).abs() < 1e-12);
        let int = range(1.0, 5.0, Scale::Linear, ParamKind::Integer);
        assert_eq!(int.decode_gene(2.5), 3.0);
        assert_eq!(int.decode_gene(5.4), 5.0);
        assert_eq!(
            decode(&[1.0], &[lin.clone(), lin]),
            Err(TunerError::GenomeLength {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(ParamRange::new("x", 1.0, 1.0, Scale::Linear, ParamKind::Real).is_err());
        assert!(ParamRange::new("x", 0.0, 1.0, Scale::Log, ParamKind::Real).is_err());
        let cfg = GaConfig {
            population: 1,
            elitism: 1,
            ..GaConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_generations_returns_best_initial() {
        let space = vec![range(-1.0, 1.0, Scale::Linear, ParamKind::Real)];
        let cfg = GaConfig {
            generations: 0,
            ..GaConfig::default()
        };
        let out = ga_optimize::<(), _>(&space, &cfg, |batch| {
            batch
                .iter()
                .map(|c| Ok(-c.params[0] * c.params[0]))
                .collect()
        })
        .unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best_fitness, out.history[0].best_fitness);
    }

    #[test]
    fn fitness_errors_carry_params() {
        let space = vec![range(0.0, 1.0, Scale::Linear, ParamKind::Real)];
        let err = ga_optimize(&space, &GaConfig::default(), |batch| {
            batch.iter().map(|_| Err("boom")).collect()
        })
        .unwrap_err();
        assert!(
            matches!(err, GaError::Fitness { source: "boom", ref params } if params.len() == 1)
        );
    }
}
