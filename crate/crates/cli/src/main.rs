use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ditherlab::dataset::{load_mnist, render_ascii, verify_checksums, Split};
use ditherlab::experiment::{parse_curves_csv, run_seeds, write_outputs, write_svg, ExperimentConfig};
use ditherlab::regularise::{Regulariser, DEFAULT_DROPOUT_RATE};

#[derive(Parser)]
#[command(name = "ditherlab", version, about = "Dropout versus input dither on a small MNIST network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the regulariser x batch-size grid and write curves, summary and figure.
    Run(RunArgs),
    /// Render a curves CSV as an SVG figure.
    Plot {
        /// CSV written by `run`.
        input: PathBuf,
        #[arg(short, long, default_value = "figure.svg")]
        output: PathBuf,
    },
    /// Print one image as ASCII art together with its label.
    Inspect {
        #[arg(long, default_value = "data/mnist")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, value_enum, default_value_t = Set::Train)]
        set: Set,
    },
    /// Check the MNIST files against their pinned SHA-256 digests.
    VerifyData {
        #[arg(long, default_value = "data/mnist")]
        data_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Set {
    Train,
    Test,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegName {
    None,
    Dropout,
    Dither,
}

#[derive(Args)]
struct RunArgs {
    /// Directory holding the four canonical MNIST IDX files.
    #[arg(long, default_value = "data/mnist")]
    data_dir: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Master seed; repeat to aggregate over several seeds.
    #[arg(long = "seed", default_values_t = [1u64])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    train_count: usize,
    #[arg(long = "batch-size", default_values_t = [32usize, 64, 128, 256])]
    batch_sizes: Vec<usize>,
    #[arg(long = "regulariser", value_enum, default_values_t = [RegName::None, RegName::Dropout, RegName::Dither])]
    regularisers: Vec<RegName>,
    /// Total width of the uniform dither noise (1.0 gives U[-0.5, 0.5)).
    #[arg(long, default_value_t = 1.0)]
    dither_width: f64,
    #[arg(long, default_value_t = DEFAULT_DROPOUT_RATE)]
    dropout_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    lr: f64,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let regularisers = self
            .regularisers
            .iter()
            .map(|r| match r {
                RegName::None => Ok(Regulariser::None),
                RegName::Dropout => Regulariser::dropout(self.dropout_rate),
                RegName::Dither => Regulariser::dither(self.dither_width / 2.0),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut seen = Vec::new();
        for r in &regularisers {
            if seen.contains(&r.name()) {
                bail!("regulariser {} given more than once", r.name());
            }
            seen.push(r.name());
        }
        let cfg = ExperimentConfig {
            master_seed: self.seeds[0],
            train_count: self.train_count,
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_sizes: self.batch_sizes.clone(),
            regularisers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let mut seeds = args.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let mnist = load_mnist(&args.data_dir)?;
    let split = Split::prepare(&mnist.train, &mnist.test, cfg.train_count)?;
    eprintln!(
        "training {} runs ({} seeds x {} regularisers x {} batch sizes), {} epochs each",
        seeds.len() * cfg.regularisers.len() * cfg.batch_sizes.len(),
        seeds.len(),
        cfg.regularisers.len(),
        cfg.batch_sizes.len(),
        cfg.epochs
    );
    let started = Instant::now();
    let study = run_seeds(&cfg, &split, &seeds)?;
    eprintln!("done in {:.1}s", started.elapsed().as_secs_f64());

    for path in write_outputs(&args.out_dir, &cfg, &seeds, &split, &study)? {
        eprintln!("wrote {}", path.display());
    }
    println!("{:<10} {:>10} {:>5} {:>12} {:>16}", "regulariser", "batch", "runs", "final error", "epochs-to-band");
    for row in &study.summary {
        println!(
            "{:<10} {:>10} {:>5} {:>12.4} {:>16.1}",
            row.regulariser, row.batch_size, row.runs, row.median_final_error, row.median_epochs_to_threshold
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Plot { input, output } => plot(input, output),
        Command::Inspect { data_dir, index, set } => inspect(data_dir, index, set),
        Command::VerifyData { data_dir } => verify_checksums(&data_dir)
            .map(|()| println!("{}: all four files match", data_dir.display()))
            .map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn plot(input: PathBuf, output: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
    let curves = parse_curves_csv(&text).with_context(|| format!("parsing {}", input.display()))?;
    write_svg(&curves, &output)?;
    eprintln!("wrote {} ({} curves)", output.display(), curves.len());
    Ok(())
}

fn inspect(data_dir: PathBuf, index: usize, set: Set) -> Result<()> {
    let mnist = load_mnist(&data_dir)?;
    let raw = match set {
        Set::Train => &mnist.train,
        Set::Test => &mnist.test,
    };
    if index >= raw.len() {
        bail!("index {index} out of range, set has {} images", raw.len());
    }
    let pixels: Vec<f64> = raw.images.image(index).iter().map(|&b| f64::from(b) / 255.0).collect();
    println!("label {}", raw.labels[index]);
    print!("{}", render_ascii(&pixels));
    Ok(())
}
