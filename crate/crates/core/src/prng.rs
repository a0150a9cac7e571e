//! Counter-based random streams.
//!
//! A stream is identified by a 64-bit key derived from the master seed and
//! a list of labels (run name, purpose, epoch, batch index, ...). Draw `i`
//! of a stream is a pure function of `(key, i)`, so the noise a batch sees
//! depends only on its labels, never on which runs executed before it or
//! on which thread.
//!
//! Key derivation, which golden files depend on:
//!
//! ```text
//! label_hash = FNV-1a-64 over the label encoding
//!     Str(s) => 0x53, len(s) as u64 LE, bytes of s
//!     Int(n) => 0x49, n as u64 LE
//! key        = mix64(label_hash ^ mix64(master_seed))
//! draw(i)    = mix64(key + (i + 1) * 0x9E3779B97F4A7C15)    (wrapping)
//! ```
//!
//! `mix64` is the SplitMix64 finalizer, so a stream is exactly the
//! SplitMix64 sequence seeded with `key`.

use std::f64::consts::TAU;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

const TAG_STR: u8 = 0x53;
const TAG_INT: u8 = 0x49;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

impl<'a> From<&'a String> for Label<'a> {
    fn from(s: &'a String) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(n: u64) -> Self {
        Label::Int(n)
    }
}

impl From<usize> for Label<'_> {
    fn from(n: usize) -> Self {
        Label::Int(n as u64)
    }
}

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(hash, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn label_hash(labels: &[Label<'_>]) -> u64 {
    labels.iter().fold(FNV_OFFSET, |h, label| match *label {
        Label::Str(s) => {
            let h = fnv1a(h, &[TAG_STR]);
            let h = fnv1a(h, &(s.len() as u64).to_le_bytes());
            fnv1a(h, s.as_bytes())
        }
        Label::Int(n) => {
            let h = fnv1a(h, &[TAG_INT]);
            fnv1a(h, &n.to_le_bytes())
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    pub fn derive(master_seed: u64, labels: &[Label<'_>]) -> Self {
        Self { key: mix64(label_hash(labels) ^ mix64(master_seed)), counter: 0 }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of 64-bit draws consumed so far.
    pub fn position(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`. Panics unless `lo < hi`.
    #[inline]
    pub fn next_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo < hi, "next_uniform requires lo < hi, got [{lo}, {hi})");
        let v = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on hi for some ranges
        if v >= hi {
            hi.next_down()
        } else {
            v
        }
    }

    /// Box-Muller; consumes exactly two draws. Panics if `std < 0`.
    pub fn next_gaussian(&mut self, mean: f64, std: f64) -> f64 {
        assert!(std >= 0.0, "next_gaussian requires std >= 0, got {std}");
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let z = (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos();
        mean + std * z
    }
}
