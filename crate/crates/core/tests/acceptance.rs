//! Prints one PASS/FAIL line per acceptance criterion and exits non-zero
//! if any fail. The learning-curve criteria use medians over seeds 1..=5
//! of the full 100-epoch grid.

mod common;

use std::process::ExitCode;

use common::gradcheck::{all_entries, check, instance, regularisers, TOLERANCE};
use ditherlab::dataset::IMAGE_SIDE;
use ditherlab::experiment::{
    curves_to_csv, render_svg, run_seeds, shared_init, write_outputs, ExperimentConfig, SeedStudy, CURVES_FILE,
    FIGURE_FILE,
};
use ditherlab::prng::RngStream;
use ditherlab::regularise::{Phase, Regulariser};
use ditherlab::Matrix;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("criterion {id} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn cell(study: &SeedStudy, reg: &str, bs: usize) -> (f64, f64) {
    let row = study.row(reg, bs).unwrap_or_else(|| panic!("missing cell {reg}/{bs}"));
    (row.median_final_error, row.median_epochs_to_threshold)
}

fn learning_curves(r: &mut Report, study: &SeedStudy) {
    let (none, _) = cell(study, "none", 32);
    let (dropout, dropout_epochs) = cell(study, "dropout", 32);
    let (dither, dither_epochs) = cell(study, "dither", 32);
    let (dither_256, _) = cell(study, "dither", 256);

    r.line(
        1,
        "regularisation helps at batch 32",
        dropout < none && dither < none,
        format!("median final error none {none:.4}, dropout {dropout:.4}, dither {dither:.4}"),
    );
    let gap = (dither - dropout).abs();
    r.line(2, "dither and dropout converge together", gap <= 0.02, format!("|dither - dropout| = {gap:.4} (limit 0.02)"));
    r.line(
        3,
        "dither converges no later than dropout",
        dither_epochs <= dropout_epochs,
        format!("median epochs-to-threshold dither {dither_epochs}, dropout {dropout_epochs}"),
    );
    r.line(
        4,
        "dither best at batch 32",
        dither <= dither_256,
        format!("dither median final error bs32 {dither:.4}, bs256 {dither_256:.4}"),
    );
}

fn gradients(r: &mut Report) {
    let mut worst = 0.0f64;
    for reg in regularisers() {
        for case in 0..20 {
            let inst = instance(case, reg);
            worst = worst.max(check(&inst, all_entries(&inst.params).into_iter()));
        }
    }
    r.line(5, "gradients match finite differences", worst < TOLERANCE, format!("max relative error {worst:.3e} over 60 instances"));
}

fn distributions(r: &mut Report) {
    let mut s = RngStream::derive(3, &["dropout-fraction".into()]);
    let (_, mask) = Regulariser::Dropout { rate: 0.5 }.apply_hidden(Matrix::ones(100, 1000), Phase::Train(&mut s));
    let kept = mask.expect("training mask").sum() / 100_000.0;

    let mut s = RngStream::derive(3, &["dither-noise".into()]);
    let zeros = Matrix::zeros(1000, 1000);
    let noisy = Regulariser::Dither { half_width: 0.5 }.apply_input(&zeros, Phase::Train(&mut s));
    let v = noisy.as_slice();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let pass = (0.495..=0.505).contains(&kept) && mean.abs() < 0.005 && lo >= -0.5 && hi < 0.5;
    r.line(
        6,
        "dropout and dither distributions",
        pass,
        format!("retained {kept:.4}; dither mean {mean:.5}, range [{lo}, {hi}]"),
    );
}

fn determinism(r: &mut Report) {
    let cfg = ExperimentConfig { master_seed: 7, epochs: 5, batch_sizes: vec![32, 256], ..ExperimentConfig::default() };
    let split = common::split();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let study = run_seeds(&cfg, split, &[7]).unwrap();
        write_outputs(dir.path(), &cfg, &[7], split, &study).unwrap();
    }
    let read = |i: usize, name: &str| std::fs::read_to_string(dirs[i].path().join(name)).unwrap();
    let identical = [CURVES_FILE, FIGURE_FILE].iter().all(|n| read(0, n) == read(1, n));

    let golden = |name: &str| std::fs::read_to_string(common::golden_path(name)).unwrap_or_default();
    let study = run_seeds(&cfg, split, &[7]).unwrap();
    let matches_golden = curves_to_csv(&study.curves) == golden("small_grid.csv")
        && render_svg(&study.curves) == golden("small_grid.svg")
        && read(0, CURVES_FILE) == golden("small_grid.csv");
    r.line(
        7,
        "byte-identical outputs",
        identical && matches_golden,
        format!("repeat identical: {identical}; matches checked-in golden files: {matches_golden}"),
    );
}

fn data_integrity(r: &mut Report) {
    let m = common::mnist();
    let dims_ok = [&m.train.images, &m.test.images].iter().all(|i| i.rows == IMAGE_SIDE && i.cols == IMAGE_SIDE);
    let first = m.train.labels[0];
    r.line(
        8,
        "MNIST parse",
        m.train.len() == 60_000 && m.test.len() == 10_000 && dims_ok && first == 5,
        format!("train {}, test {}, 28x28 {dims_ok}, first label {first}", m.train.len(), m.test.len()),
    );
}

fn shared_initialisation(r: &mut Report, study: &SeedStudy) {
    let mut pass = true;
    let mut counts = Vec::new();
    for seed in SEEDS {
        let expected = shared_init(seed).content_hash();
        let grid: Vec<_> = study.curves.iter().filter(|c| c.seed == seed).collect();
        pass &= grid.len() == 12 && grid.iter().all(|c| c.init_hash.as_deref() == Some(expected.as_str()));
        counts.push(grid.len());
    }
    r.line(9, "shared initial parameters", pass, format!("runs per seed {counts:?}, one hash per seed"));
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    eprintln!("running the 5-seed grid (60 runs x 100 epochs)...");
    let study = run_seeds(&ExperimentConfig::default(), common::split(), &SEEDS).expect("5-seed grid");
    learning_curves(&mut r, &study);
    gradients(&mut r);
    distributions(&mut r);
    determinism(&mut r);
    data_integrity(&mut r);
    shared_initialisation(&mut r, &study);
    println!("acceptance: {} of 9 criteria passed", 9 - r.failures);
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
