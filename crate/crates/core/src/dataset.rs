//! MNIST IDX parsing, normalization and batching.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::linalg::Matrix;
use crate::network::EvalSet;
use crate::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;
pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// SHA-256 of the four uncompressed canonical files.
pub const CANONICAL_SHA256: [(&str, &str); 4] = [
    (TRAIN_IMAGES, "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db"),
    (TRAIN_LABELS, "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5"),
    (TEST_IMAGES, "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7"),
    (TEST_LABELS, "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2"),
];

/// Raw image bytes, one flattened row-major image after another.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl RawImages {
    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let n = self.pixels_per_image();
        &self.pixels[index * n..(index + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawMnist {
    pub images: RawImages,
    pub labels: Vec<u8>,
}

impl RawMnist {
    pub fn new(images: RawImages, labels: Vec<u8>) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::Format(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| usize::from(l) >= NUM_CLASSES) {
            return Err(Error::Format(format!("label {bad} out of range 0-9")));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The first `n` examples.
    pub fn take(&self, n: usize) -> Result<RawMnist> {
        if n > self.len() {
            return Err(Error::Config(format!("requested {n} examples but only {} available", self.len())));
        }
        let per = self.images.pixels_per_image();
        Ok(RawMnist {
            images: RawImages { count: n, pixels: self.images.pixels[..n * per].to_vec(), ..self.images },
            labels: self.labels[..n].to_vec(),
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let chunk = self.take(4, what)?;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "truncated {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let magic = self.u32_be("magic")?;
        if magic != expected {
            return Err(Error::Format(format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}")));
        }
        Ok(())
    }
}

/// Parses an IDX3 image file (magic 0x00000803).
pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImages> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(IMAGE_MAGIC)?;
    let count = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    let total = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format(format!("image payload size overflows: {count}x{rows}x{cols}")))?;
    let pixels = r.take(total, "image payload")?.to_vec();
    Ok(RawImages { count, rows, cols, pixels })
}

/// Parses an IDX1 label file (magic 0x00000801). Labels above 9 are rejected.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0 };
    r.magic(LABEL_MAGIC)?;
    let count = r.u32_be("label count")? as usize;
    let labels = r.take(count, "label payload")?;
    if let Some((i, bad)) = labels.iter().enumerate().find(|(_, &l)| usize::from(l) >= NUM_CLASSES) {
        return Err(Error::Format(format!("label {bad} at index {i} out of range 0-9")));
    }
    Ok(labels.to_vec())
}

pub fn encode_idx_images(images: &RawImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Grand mean of `byte / 255` over every pixel of the first `n` images.
pub fn mean_of_training_subset(raw: &RawMnist, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("training subset must contain at least one example".into()));
    }
    let subset = raw.take(n)?;
    let total: u64 = subset.images.pixels.iter().map(|&p| u64::from(p)).sum();
    let pixels = subset.images.pixels.len() as f64;
    Ok(total as f64 / (255.0 * pixels))
}

/// Normalized images (feature-major, one example per column) with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Matrix,
    pub labels: Vec<u8>,
    pub mean_offset: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Maps every pixel to `byte / 255 - subset_mean`.
pub fn normalize(raw: &RawMnist, subset_mean: f64) -> Dataset {
    let per = raw.images.pixels_per_image();
    let count = raw.len();
    let images = Matrix::from_fn(per, count, |pixel, example| {
        f64::from(raw.images.pixels[example * per + pixel]) / 255.0 - subset_mean
    });
    Dataset { images, labels: raw.labels.clone(), mean_offset: subset_mean }
}

/// Train subset plus full test set, both normalized with the training offset.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// `test` in the sparse form used for per-epoch evaluation.
    pub test_eval: EvalSet,
}

impl Split {
    pub fn prepare(train: &RawMnist, test: &RawMnist, train_count: usize) -> Result<Split> {
        let mean = mean_of_training_subset(train, train_count)?;
        Ok(Split::new(normalize(&train.take(train_count)?, mean), normalize(test, mean)))
    }

    pub fn new(train: Dataset, test: Dataset) -> Split {
        let test_eval = EvalSet::new(&test);
        Split { train, test, test_eval }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub batches: Vec<Range<usize>>,
}

/// Contiguous ascending batches `[0, bs), [bs, 2bs), ...` covering `0..n`.
pub fn make_batches(n: usize, batch_size: usize) -> Result<BatchPlan> {
    if batch_size == 0 || n == 0 || !n.is_multiple_of(batch_size) {
        return Err(Error::Config(format!(
            "batch size {batch_size} does not evenly divide {n} training examples"
        )));
    }
    let batches = (0..n).step_by(batch_size).map(|start| start..start + batch_size).collect();
    Ok(BatchPlan { batch_size, batches })
}

const RAMP: &[u8] = b" .:-=+*#%@";

/// Renders a 28x28 image of intensities in `[0, 1]` as text, darkest first
/// on the ramp `" .:-=+*#%@"`. Panics unless given exactly 784 values.
pub fn render_ascii(image: &[f64]) -> String {
    assert_eq!(image.len(), IMAGE_PIXELS, "render_ascii expects {IMAGE_PIXELS} pixels");
    let top = (RAMP.len() - 1) as f64;
    let mut out = String::with_capacity(IMAGE_PIXELS + IMAGE_SIDE);
    for row in image.chunks(IMAGE_SIDE) {
        for &v in row {
            let idx = (v.clamp(0.0, 1.0) * top).round() as usize;
            out.push(RAMP[idx] as char);
        }
        out.push('\n');
    }
    out
}

/// Raw MNIST train and test sets as read from disk.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: RawMnist,
    pub test: RawMnist,
}

fn read(dir: &Path, name: &str) -> Result<(PathBuf, Vec<u8>)> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, bytes))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Data { path: path.to_owned(), source: Box::new(e) })
}

fn load_pair(dir: &Path, images: &str, labels: &str) -> Result<RawMnist> {
    let (ipath, ibytes) = read(dir, images)?;
    let (lpath, lbytes) = read(dir, labels)?;
    let imgs = with_path(&ipath, parse_idx_images(&ibytes))?;
    let labs = with_path(&lpath, parse_idx_labels(&lbytes))?;
    with_path(&ipath, RawMnist::new(imgs, labs))
}

/// Loads the four canonical files from `dir`.
pub fn load_mnist(dir: &Path) -> Result<Mnist> {
    Ok(Mnist {
        train: load_pair(dir, TRAIN_IMAGES, TRAIN_LABELS)?,
        test: load_pair(dir, TEST_IMAGES, TEST_LABELS)?,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks the files in `dir` against [`CANONICAL_SHA256`].
pub fn verify_checksums(dir: &Path) -> Result<()> {
    for (name, expected) in CANONICAL_SHA256 {
        let (path, bytes) = read(dir, name)?;
        let actual = sha256_hex(&bytes);
        if actual != expected {
            return Err(Error::Data {
                path,
                source: Box::new(Error::Format(format!("sha256 {actual} does not match {expected}"))),
            });
        }
    }
    Ok(())
}
