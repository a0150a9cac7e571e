use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LearningCurve, SummaryRow};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "regulariser,batch_size,seed,epoch,test_error";

/// One row per (curve, epoch), sorted by regulariser, batch size, seed and
/// epoch; errors printed with six decimals.
pub fn curves_to_csv(curves: &[LearningCurve]) -> String {
    let mut sorted: Vec<&LearningCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| (&a.regulariser, a.batch_size, a.seed).cmp(&(&b.regulariser, b.batch_size, b.seed)));
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in sorted {
        for (i, e) in c.errors.iter().enumerate() {
            writeln!(out, "{},{},{},{},{:.6}", c.regulariser, c.batch_size, c.seed, i + 1, e).unwrap();
        }
    }
    out
}

pub fn write_csv(curves: &[LearningCurve], path: &Path) -> Result<()> {
    fs::write(path, curves_to_csv(curves)).map_err(|e| Error::io(path, e))
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("regulariser,batch_size,runs,median_final_error,median_epochs_to_threshold\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.1}",
            r.regulariser, r.batch_size, r.runs, r.median_final_error, r.median_epochs_to_threshold
        )
        .unwrap();
    }
    out
}

#[derive(Debug, serde::Deserialize)]
struct Row {
    regulariser: String,
    batch_size: usize,
    seed: u64,
    epoch: usize,
    test_error: f64,
}

/// Reads curves back from the format written by [`curves_to_csv`].
///
/// Each (regulariser, batch size, seed) group must have epochs `1..=n`
/// exactly once, in any row order.
pub fn parse_curves_csv(text: &str) -> Result<Vec<LearningCurve>> {
    let mut reader = ::csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Format(format!("csv header: {e}")))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Format(format!("expected header {CSV_HEADER:?}")));
    }

    let mut groups: BTreeMap<(String, usize, u64), BTreeMap<usize, f64>> = BTreeMap::new();
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("csv row {}: {e}", line + 2)))?;
        if row.regulariser.is_empty() {
            return Err(Error::Format(format!("csv row {}: empty regulariser", line + 2)));
        }
        if !(0.0..=1.0).contains(&row.test_error) {
            return Err(Error::Format(format!("csv row {}: test_error {} outside [0, 1]", line + 2, row.test_error)));
        }
        let epochs = groups.entry((row.regulariser, row.batch_size, row.seed)).or_default();
        if epochs.insert(row.epoch, row.test_error).is_some() {
            return Err(Error::Format(format!("csv row {}: duplicate epoch {}", line + 2, row.epoch)));
        }
    }

    groups
        .into_iter()
        .map(|((regulariser, batch_size, seed), epochs)| {
            if !epochs.keys().copied().eq(1..=epochs.len()) {
                return Err(Error::Format(format!(
                    "{regulariser}/{batch_size}/seed {seed}: epochs are not 1..={}",
                    epochs.len()
                )));
            }
            Ok(LearningCurve { regulariser, batch_size, seed, init_hash: None, errors: epochs.into_values().collect() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(reg: &str, bs: usize, seed: u64, errors: &[f64]) -> LearningCurve {
        LearningCurve { regulariser: reg.into(), batch_size: bs, seed, init_hash: None, errors: errors.to_vec() }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(curves_to_csv(&[]), format!("{CSV_HEADER}\n"));
        assert!(parse_curves_csv(&curves_to_csv(&[])).unwrap().is_empty());
    }

    #[test]
    fn rows_sorted_and_formatted() {
        let csv = curves_to_csv(&[curve("none", 64, 1, &[0.5, 0.25]), curve("dither", 256, 1, &[0.125])]);
        assert_eq!(
            csv,
            "regulariser,batch_size,seed,epoch,test_error\n\
             dither,256,1,1,0.125000\n\
             none,64,1,1,0.500000\n\
             none,64,1,2,0.250000\n"
        );
    }

    #[test]
    fn row_count() {
        let curves: Vec<_> = (0..12).map(|i| curve("none", 32 * (i + 1), 1, &[0.5; 100])).collect();
        assert_eq!(curves_to_csv(&curves).lines().count(), 1201);
    }

    #[test]
    fn parse_roundtrip() {
        let curves = vec![curve("dither", 32, 3, &[0.5, 0.25]), curve("none", 32, 3, &[0.75, 0.5])];
        assert_eq!(parse_curves_csv(&curves_to_csv(&curves)).unwrap(), curves);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(parse_curves_csv("").is_err());
        assert!(parse_curves_csv("a,b\n1,2\n").is_err());
        let h = CSV_HEADER;
        assert!(parse_curves_csv(&format!("{h}\nnone,32,1,2,0.5\n")).is_err());
        assert!(parse_curves_csv(&format!("{h}\nnone,32,1,1,0.5\nnone,32,1,1,0.4\n")).is_err());
        assert!(parse_curves_csv(&format!("{h}\nnone,32,1,1,1.5\n")).is_err());
        assert!(parse_curves_csv(&format!("{h}\nnone,x,1,1,0.5\n")).is_err());
        assert!(parse_curves_csv(&format!("{h}\n,32,1,1,0.5\n")).is_err());
    }
}
