//! Catalog-wide runs: every shape of a catalog under every seed of one mode.

use std::fmt;

use rayon::prelude::*;

use crate::error::Result;
use crate::nca::Nca;
use crate::quant::Quantizer;
use crate::shape::Catalog;
use crate::sim::{firmware_run, listing1_validate, sync_run, LinkCodec, RunReport, SimClockConfig, SimMode};

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub catalog: Catalog,
    pub mode: SimMode,
    pub seeds: Vec<u64>,
    pub max_updates: usize,
    /// Timer and link settings for firmware runs; the seed is replaced per run.
    pub clock: SimClockConfig,
}

impl ExperimentSpec {
    /// Default mode per catalog: firmware, except the 6×7 digits which only ran in simulation.
    pub fn new(catalog: Catalog) -> Self {
        let mode = match catalog {
            Catalog::ScaledUp => SimMode::Listing1,
            _ => SimMode::Firmware,
        };
        ExperimentSpec {
            catalog,
            mode,
            seeds: DEFAULT_SEEDS.to_vec(),
            max_updates: 30,
            clock: SimClockConfig::default(),
        }
    }

    pub fn with_mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub label: u8,
    pub seed: u64,
    pub report: RunReport,
}

impl ExperimentRun {
    pub fn convergence(&self) -> Option<usize> {
        self.report.convergence_update()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    /// Ordered by catalog position, then seed order.
    pub runs: Vec<ExperimentRun>,
}

/// Runs one mode on a single shape.
pub fn run_mode(
    nca: &Nca,
    shape: &crate::shape::ShapeGrid,
    mode: SimMode,
    seed: u64,
    max_updates: usize,
    codec: &LinkCodec,
    clock: &SimClockConfig,
) -> Result<RunReport> {
    match mode {
        SimMode::Sync => Ok(sync_run(nca, shape, max_updates)),
        SimMode::Listing1 => Ok(listing1_validate(nca, shape, max_updates, seed)),
        SimMode::Firmware => {
            let clock = SimClockConfig {
                rng_seed: seed,
                max_updates: max_updates as u32,
                ..clock.clone()
            };
            firmware_run(nca, shape, codec, &clock)
        }
    }
}

pub fn run_experiment(spec: &ExperimentSpec, nca: &Nca, quantizer: &Quantizer) -> Result<ExperimentOutcome> {
    let codec = LinkCodec::Quantized(*quantizer);
    let jobs: Vec<_> = spec
        .catalog
        .shapes()
        .into_iter()
        .flat_map(|shape| spec.seeds.iter().map(move |&seed| (shape.clone(), seed)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(shape, seed)| {
            let report = run_mode(nca, shape, spec.mode, *seed, spec.max_updates, &codec, &spec.clock)?;
            Ok(ExperimentRun {
                label: shape.label(),
                seed: *seed,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome {
        spec: spec.clone(),
        runs,
    })
}

pub fn median(values: &[usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] + v[mid]) as f64 / 2.0
    })
}

impl ExperimentOutcome {
    pub fn labels(&self) -> Vec<u8> {
        let mut labels: Vec<u8> = self.runs.iter().map(|r| r.label).collect();
        labels.dedup();
        labels
    }

    /// Labels whose every seeded run converged.
    pub fn successful_labels(&self) -> Vec<u8> {
        self.labels()
            .into_iter()
            .filter(|&l| self.runs.iter().filter(|r| r.label == l).all(|r| r.convergence().is_some()))
            .collect()
    }

    pub fn success_fraction(&self) -> f64 {
        let labels = self.labels();
        if labels.is_empty() {
            return 0.0;
        }
        self.successful_labels().len() as f64 / labels.len() as f64
    }

    /// Convergence updates of the runs that converged.
    pub fn convergence_updates(&self) -> Vec<usize> {
        self.runs.iter().filter_map(ExperimentRun::convergence).collect()
    }

    pub fn median_convergence(&self) -> Option<f64> {
        median(&self.convergence_updates())
    }

    pub fn median_convergence_for(&self, label: u8) -> Option<f64> {
        let updates: Vec<usize> = self
            .runs
            .iter()
            .filter(|r| r.label == label)
            .filter_map(ExperimentRun::convergence)
            .collect();
        median(&updates)
    }
}

impl fmt::Display for ExperimentOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment {} mode={}", self.spec.catalog.name(), self.spec.mode)?;
        writeln!(f, "label seed convergence")?;
        for run in &self.runs {
            match run.convergence() {
                Some(u) => writeln!(f, "{:>5} {:>4} {u}", run.label, run.seed)?,
                None => writeln!(f, "{:>5} {:>4} FAIL", run.label, run.seed)?,
            }
        }
        let ok = self.successful_labels().len();
        writeln!(f, "success {}/{} shapes ({:.2})", ok, self.labels().len(), self.success_fraction())?;
        match self.median_convergence() {
            Some(m) => write!(f, "median convergence update {m}"),
            None => write!(f, "median convergence update -"),
        }
    }
}
