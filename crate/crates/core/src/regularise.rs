//! The three training conditions: nothing, 50% hidden-unit dropout, and
//! uniform dither added to the input images.
//!
//! Randomness only enters through the stream carried by [`Phase::Train`];
//! in [`Phase::Test`] every regulariser is deterministic.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::prng::RngStream;
use crate::{Error, Result};

pub const DEFAULT_DROPOUT_RATE: f64 = 0.5;
/// Half-width of the default dither, giving noise of total width 1.
pub const DEFAULT_DITHER_HALF_WIDTH: f64 = 0.5;

pub enum Phase<'a> {
    Train(&'a mut RngStream),
    Test,
}

impl Phase<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Phase::Train(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regulariser {
    None,
    /// Drops each hidden unit with probability `rate` while training and
    /// scales hidden activations by `1 - rate` at test time.
    Dropout { rate: f64 },
    /// Adds iid `U[-half_width, half_width)` noise to each input pixel while training.
    Dither { half_width: f64 },
}

impl Regulariser {
    pub fn dropout(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")));
        }
        Ok(Regulariser::Dropout { rate })
    }

    pub fn dither(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("dither half-width must be positive, got {half_width}")));
        }
        Ok(Regulariser::Dither { half_width })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regulariser::None => "none",
            Regulariser::Dropout { .. } => "dropout",
            Regulariser::Dither { .. } => "dither",
        }
    }

    pub fn apply_input<'m>(&self, batch: &'m Matrix, phase: Phase<'_>) -> Cow<'m, Matrix> {
        match (self, phase) {
            (&Regulariser::Dither { half_width }, Phase::Train(stream)) => {
                let mut noisy = batch.clone();
                for v in noisy.as_mut_slice() {
                    *v += stream.next_uniform(-half_width, half_width);
                }
                Cow::Owned(noisy)
            }
            _ => Cow::Borrowed(batch),
        }
    }

    /// Returns the transformed activations and, for training-mode dropout,
    /// the `{0, 1}` keep mask that backprop must reapply.
    pub fn apply_hidden(&self, hidden: Matrix, phase: Phase<'_>) -> (Matrix, Option<Matrix>) {
        match (self, phase) {
            (&Regulariser::Dropout { rate }, Phase::Train(stream)) => {
                let mut mask = Matrix::zeros(hidden.rows(), hidden.cols());
                for m in mask.as_mut_slice() {
                    *m = if stream.next_f64() >= rate { 1.0 } else { 0.0 };
                }
                (hidden.mul(&mask), Some(mask))
            }
            (&Regulariser::Dropout { rate }, Phase::Test) => (hidden.scale(1.0 - rate), None),
            _ => (hidden, None),
        }
    }
}

impl fmt::Display for Regulariser {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `none`, `dropout` or `dither` with their default parameters.
impl FromStr for Regulariser {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Regulariser::None),
            "dropout" => Ok(Regulariser::Dropout { rate: DEFAULT_DROPOUT_RATE }),
            "dither" => Ok(Regulariser::Dither { half_width: DEFAULT_DITHER_HALF_WIDTH }),
            other => Err(Error::Config(format!("unknown regulariser {other:?}, expected none|dropout|dither"))),
        }
    }
}
