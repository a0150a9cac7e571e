//! The regulariser x batch-size grid, run from one shared initialization.

mod csv;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{make_batches, sha256_hex, Split};
use crate::linalg::Matrix;
use crate::network::{backward, evaluate_prepared, forward, init_params, sgd_step, MlpParams};
use crate::prng::RngStream;
use crate::regularise::{Phase, Regulariser};
use crate::{Error, Result};

pub use self::csv::{curves_to_csv, parse_curves_csv, summary_to_csv, write_csv, CSV_HEADER};
pub use self::svg::{render_svg, write_svg};

/// A run's epochs-to-threshold is the first epoch whose test error lies
/// within this distance of the run's final error.
pub const CONVERGENCE_BAND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub train_count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_sizes: Vec<usize>,
    pub regularisers: Vec<Regulariser>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            train_count: 256,
            epochs: 100,
            learning_rate: 1.0,
            batch_sizes: vec![32, 64, 128, 256],
            regularisers: vec![
                Regulariser::None,
                Regulariser::Dropout { rate: 0.5 },
                Regulariser::Dither { half_width: 0.5 },
            ],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_sizes.is_empty() || self.regularisers.is_empty() {
            return Err(Error::Config("need at least one batch size and one regulariser".into()));
        }
        for &bs in &self.batch_sizes {
            make_batches(self.train_count, bs)?;
        }
        for reg in &self.regularisers {
            match *reg {
                Regulariser::Dropout { rate } => {
                    Regulariser::dropout(rate)?;
                }
                Regulariser::Dither { half_width } => {
                    Regulariser::dither(half_width)?;
                }
                Regulariser::None => {}
            }
        }
        Ok(())
    }
}

/// Test error after each full sweep over the training subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub regulariser: String,
    pub batch_size: usize,
    pub seed: u64,
    /// Hash of the parameters the run started from; absent when read back from CSV.
    pub init_hash: Option<String>,
    /// `errors[e]` is the test error after epoch `e + 1`.
    pub errors: Vec<f64>,
}

impl LearningCurve {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("learning curve has at least one epoch")
    }

    /// First epoch (1-based) whose error is within `band` of the final error.
    pub fn epochs_to_threshold(&self, band: f64) -> usize {
        let target = self.final_error();
        self.errors.iter().position(|e| (e - target).abs() <= band).expect("final epoch is always within the band") + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

pub fn shared_init(master_seed: u64) -> MlpParams {
    init_params(&mut RngStream::derive(master_seed, &["init".into()]))
}

/// Noise stream for one batch presentation of one run.
pub fn noise_stream(master_seed: u64, reg: &Regulariser, batch_size: usize, epoch: usize, batch: usize) -> RngStream {
    RngStream::derive(
        master_seed,
        &["noise".into(), reg.name().into(), batch_size.into(), epoch.into(), batch.into()],
    )
}

/// Trains one model from `init` and records the test error after every epoch.
pub fn run_single(
    cfg: &ExperimentConfig,
    split: &Split,
    reg: &Regulariser,
    batch_size: usize,
    init: &MlpParams,
) -> Result<LearningCurve> {
    let plan = make_batches(split.train.len(), batch_size)?;
    let batches: Vec<(Matrix, &[u8])> = plan
        .batches
        .iter()
        .map(|r| (split.train.images.columns(r.start, r.end), &split.train.labels[r.clone()]))
        .collect();

    let mut params = init.clone();
    let mut errors = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        for (index, (images, labels)) in batches.iter().enumerate() {
            let mut stream = noise_stream(cfg.master_seed, reg, batch_size, epoch, index);
            let trace = forward(&params, images, reg, Phase::Train(&mut stream));
            let grads = backward(&trace, labels, &params);
            params = sgd_step(params, &grads, cfg.learning_rate);
        }
        errors.push(evaluate_prepared(&params, &split.test_eval, reg));
    }
    Ok(LearningCurve {
        regulariser: reg.name().to_string(),
        batch_size,
        seed: cfg.master_seed,
        init_hash: Some(init.content_hash()),
        errors,
    })
}

pub fn run_grid(cfg: &ExperimentConfig, split: &Split) -> Result<Vec<LearningCurve>> {
    run_grid_with(cfg, split, Execution::Parallel)
}

/// One curve per (regulariser, batch size), in config order, all from the
/// same initial parameters.
pub fn run_grid_with(cfg: &ExperimentConfig, split: &Split, exec: Execution) -> Result<Vec<LearningCurve>> {
    run_many(cfg, split, &[cfg.master_seed], exec)
}

fn run_many(cfg: &ExperimentConfig, split: &Split, seeds: &[u64], exec: Execution) -> Result<Vec<LearningCurve>> {
    cfg.validate()?;
    if split.train.len() != cfg.train_count {
        return Err(Error::Config(format!(
            "training split has {} examples, config expects {}",
            split.train.len(),
            cfg.train_count
        )));
    }
    let inits: Vec<MlpParams> = seeds.iter().map(|&s| shared_init(s)).collect();
    let jobs: Vec<(usize, Regulariser, usize)> = (0..seeds.len())
        .flat_map(|s| {
            cfg.regularisers
                .iter()
                .flat_map(move |&reg| cfg.batch_sizes.iter().map(move |&bs| (s, reg, bs)))
        })
        .collect();
    let run = |&(s, reg, bs): &(usize, Regulariser, usize)| {
        let run_cfg = ExperimentConfig { master_seed: seeds[s], ..cfg.clone() };
        run_single(&run_cfg, split, &reg, bs, &inits[s])
    };
    match exec {
        Execution::Serial => jobs.iter().map(run).collect(),
        Execution::Parallel => jobs.par_iter().map(run).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub regulariser: String,
    pub batch_size: usize,
    pub runs: usize,
    pub median_final_error: f64,
    pub median_epochs_to_threshold: f64,
}

#[derive(Debug, Clone)]
pub struct SeedStudy {
    pub curves: Vec<LearningCurve>,
    pub summary: Vec<SummaryRow>,
}

impl SeedStudy {
    pub fn row(&self, regulariser: &str, batch_size: usize) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.regulariser == regulariser && r.batch_size == batch_size)
    }
}

/// Runs the grid once per seed and aggregates medians per cell.
pub fn run_seeds(cfg: &ExperimentConfig, split: &Split, seeds: &[u64]) -> Result<SeedStudy> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let curves = run_many(cfg, split, seeds, Execution::Parallel)?;
    let summary = aggregate(&curves);
    Ok(SeedStudy { curves, summary })
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Median final error and median epochs-to-threshold per (regulariser,
/// batch size), rows sorted by regulariser name then batch size.
pub fn aggregate(curves: &[LearningCurve]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, usize)> = curves.iter().map(|c| (c.regulariser.clone(), c.batch_size)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(regulariser, batch_size)| {
            let cell: Vec<&LearningCurve> =
                curves.iter().filter(|c| c.regulariser == regulariser && c.batch_size == batch_size).collect();
            let mut finals: Vec<f64> = cell.iter().map(|c| c.final_error()).collect();
            let mut epochs: Vec<f64> =
                cell.iter().map(|c| c.epochs_to_threshold(CONVERGENCE_BAND) as f64).collect();
            SummaryRow {
                regulariser,
                batch_size,
                runs: cell.len(),
                median_final_error: median(&mut finals),
                median_epochs_to_threshold: median(&mut epochs),
            }
        })
        .collect()
}

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FIGURE_FILE: &str = "figure.svg";
pub const JOURNAL_FILE: &str = "journal.json";

#[derive(Debug, Serialize)]
struct Journal<'a> {
    config: &'a ExperimentConfig,
    seeds: &'a [u64],
    mean_offset: f64,
    initial_params_sha256: Vec<(u64, String)>,
    outputs: Vec<(String, String)>,
}

/// Writes curves, summary, figure and a journal of config plus output
/// hashes into `out_dir`. Returns the paths written.
pub fn write_outputs(
    out_dir: &Path,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    split: &Split,
    study: &SeedStudy,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = [
        (CURVES_FILE, curves_to_csv(&study.curves)),
        (SUMMARY_FILE, summary_to_csv(&study.summary)),
        (FIGURE_FILE, render_svg(&study.curves)),
    ];
    let mut written = Vec::new();
    let mut outputs = Vec::new();
    for (name, contents) in &files {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        outputs.push((name.to_string(), sha256_hex(contents.as_bytes())));
        written.push(path);
    }
    let journal = Journal {
        config: cfg,
        seeds,
        mean_offset: split.train.mean_offset,
        initial_params_sha256: seeds.iter().map(|&s| (s, shared_init(s).content_hash())).collect(),
        outputs,
    };
    let path = out_dir.join(JOURNAL_FILE);
    let mut text = serde_json::to_string_pretty(&journal).expect("journal serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
