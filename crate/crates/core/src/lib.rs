//! Training laboratory comparing dropout and additive input dither as
//! regularisers for a 784x100x10 network on a 256-example MNIST subset.
//!
//! Everything is deterministic: a single master seed fixes the initial
//! weights, every dropout mask and every dither sample.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod network;
pub mod prng;
pub mod regularise;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use prng::RngStream;
