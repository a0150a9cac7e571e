//! Two-layer perceptron: biased-sigmoid hidden layer, softmax output,
//! mean cross-entropy loss, exact backprop and plain SGD.

use std::borrow::Cow;

use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::linalg::{Matrix, SparseColumns};
use crate::prng::RngStream;
use crate::regularise::{Phase, Regulariser};

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Dims {
    pub const MNIST: Dims = Dims { input: 784, hidden: 100, output: 10 };
}

pub const INIT_STD: f64 = 0.01;
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// hidden x input
    pub w1: Matrix,
    /// hidden x 1
    pub b1: Matrix,
    /// output x hidden
    pub w2: Matrix,
    /// output x 1
    pub b2: Matrix,
}

impl MlpParams {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            w1: Matrix::zeros(dims.hidden, dims.input),
            b1: Matrix::zeros(dims.hidden, 1),
            w2: Matrix::zeros(dims.output, dims.hidden),
            b2: Matrix::zeros(dims.output, 1),
        }
    }

    /// Weights iid `N(0, std^2)` (w1 row-major first, then w2), biases zero.
    pub fn gaussian(dims: Dims, std: f64, stream: &mut RngStream) -> Self {
        let mut p = Self::zeros(dims);
        for w in p.w1.as_mut_slice().iter_mut().chain(p.w2.as_mut_slice()) {
            *w = stream.next_gaussian(0.0, std);
        }
        p
    }

    pub fn dims(&self) -> Dims {
        Dims { input: self.w1.cols(), hidden: self.w1.rows(), output: self.w2.rows() }
    }

    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// SHA-256 over the little-endian bytes of w1, b1, w2, b2.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for t in self.tensors() {
            for v in t.as_slice() {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The shared starting point for every run: 784x100x10, `N(0, 0.01^2)` weights.
pub fn init_params(stream: &mut RngStream) -> MlpParams {
    MlpParams::gaussian(Dims::MNIST, INIT_STD, stream)
}

#[inline]
fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Zero-centred logistic, `1 / (1 + e^-z) - 1/2`.
pub fn biased_sigmoid(z: &Matrix) -> Matrix {
    z.map(|v| logistic(v) - 0.5)
}

/// Derivative of [`biased_sigmoid`]; the offset drops out.
pub fn biased_sigmoid_grad(z: &Matrix) -> Matrix {
    z.map(|v| {
        let s = logistic(v);
        s * (1.0 - s)
    })
}

/// Column-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let (rows, cols) = logits.shape();
    let mut out = logits.clone();
    let v = out.as_mut_slice();
    for j in 0..cols {
        let max = (0..rows).map(|i| v[i * cols + j]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for i in 0..rows {
            let e = (v[i * cols + j] - max).exp();
            v[i * cols + j] = e;
            total += e;
        }
        for i in 0..rows {
            v[i * cols + j] /= total;
        }
    }
    out
}

/// Mean over the batch of `-ln p(true class)`, with `p` floored at 1e-300.
pub fn cross_entropy(probs: &Matrix, labels: &[u8]) -> f64 {
    assert_eq!(probs.cols(), labels.len(), "one label per column");
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(j, &l)| -probs.get(usize::from(l), j).max(LOG_FLOOR).ln())
        .sum();
    total / labels.len() as f64
}

/// Everything backprop needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<'a> {
    /// Input after the regulariser's input transform.
    pub input: Cow<'a, Matrix>,
    pub z1: Matrix,
    /// Hidden activations after the regulariser's hidden transform.
    pub h1: Matrix,
    pub dropout_mask: Option<Matrix>,
    pub z2: Matrix,
    pub probs: Matrix,
    pub train: bool,
}

pub fn forward<'a>(
    params: &MlpParams,
    batch: &'a Matrix,
    reg: &Regulariser,
    mut phase: Phase<'_>,
) -> ForwardTrace<'a> {
    let train = phase.is_train();
    let input = reg.apply_input(batch, reborrow(&mut phase));
    let z1 = params.w1.matmul(&input).broadcast_add_col(&params.b1);
    let (h1, dropout_mask, z2, probs) = output_layers(params, &z1, reg, phase);
    ForwardTrace { input, z1, h1, dropout_mask, z2, probs, train }
}

fn output_layers(
    params: &MlpParams,
    z1: &Matrix,
    reg: &Regulariser,
    phase: Phase<'_>,
) -> (Matrix, Option<Matrix>, Matrix, Matrix) {
    let (h1, mask) = reg.apply_hidden(biased_sigmoid(z1), phase);
    let z2 = params.w2.matmul(&h1).broadcast_add_col(&params.b2);
    let probs = softmax(&z2);
    (h1, mask, z2, probs)
}

fn reborrow<'s>(phase: &'s mut Phase<'_>) -> Phase<'s> {
    match phase {
        Phase::Train(s) => Phase::Train(s),
        Phase::Test => Phase::Test,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub gw1: Matrix,
    pub gb1: Matrix,
    pub gw2: Matrix,
    pub gb2: Matrix,
}

impl Gradients {
    pub fn tensors(&self) -> [&Matrix; 4] {
        [&self.gw1, &self.gb1, &self.gw2, &self.gb2]
    }
}

/// Exact gradients of the mean cross-entropy. Panics on a test-mode trace.
pub fn backward(trace: &ForwardTrace<'_>, labels: &[u8], params: &MlpParams) -> Gradients {
    assert!(trace.train, "backward requires a training-mode trace");
    let batch = trace.probs.cols();
    assert_eq!(labels.len(), batch, "one label per column");

    let mut dz2 = trace.probs.clone();
    for (j, &l) in labels.iter().enumerate() {
        let p = dz2.get(usize::from(l), j);
        dz2.set(usize::from(l), j, p - 1.0);
    }
    let dz2 = dz2.scale(1.0 / batch as f64);

    let gw2 = dz2.matmul(&trace.h1.transpose());
    let gb2 = dz2.row_sums();

    let mut dh1 = params.w2.transpose().matmul(&dz2);
    if let Some(mask) = &trace.dropout_mask {
        dh1 = dh1.mul(mask);
    }
    let dz1 = dh1.mul(&biased_sigmoid_grad(&trace.z1));
    let gw1 = dz1.matmul(&trace.input.transpose());
    let gb1 = dz1.row_sums();

    Gradients { gw1, gb1, gw2, gb2 }
}

/// `theta <- theta - lr * g`. Panics unless `lr > 0`.
pub fn sgd_step(params: MlpParams, grads: &Gradients, lr: f64) -> MlpParams {
    assert!(lr > 0.0, "learning rate must be positive, got {lr}");
    apply_update(params, grads, lr)
}

pub(crate) fn apply_update(mut params: MlpParams, grads: &Gradients, lr: f64) -> MlpParams {
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
        for (v, &d) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *v -= lr * d;
        }
    }
    params
}

/// Column-wise argmax, ties to the lowest index.
pub fn predict(probs: &Matrix) -> Vec<usize> {
    let (rows, cols) = probs.shape();
    (0..cols)
        .map(|j| {
            let mut best = 0;
            for i in 1..rows {
                if probs.get(i, j) > probs.get(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Fraction of columns of `images` misclassified, in test mode.
pub fn error_rate(params: &MlpParams, images: &Matrix, labels: &[u8], reg: &Regulariser) -> f64 {
    assert_eq!(images.cols(), labels.len());
    let trace = forward(params, images, reg, Phase::Test);
    let wrong = predict(&trace.probs).iter().zip(labels).filter(|(&p, &l)| p != usize::from(l)).count();
    wrong as f64 / labels.len() as f64
}

pub fn evaluate(params: &MlpParams, test: &Dataset, reg: &Regulariser) -> f64 {
    error_rate(params, &test.images, &test.labels, reg)
}

/// Clean images stored as background plus sparse foreground, for cheap
/// repeated evaluation. Most MNIST pixels are background, so the first
/// layer costs a fraction of the dense product.
#[derive(Debug, Clone)]
pub struct EvalSet {
    inputs: SparseColumns,
    labels: Vec<u8>,
}

impl EvalSet {
    /// `background` is the normalized value of a zero byte.
    pub fn new(data: &Dataset) -> Self {
        Self { inputs: SparseColumns::from_dense(&data.images, -data.mean_offset), labels: data.labels.clone() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Same as [`evaluate`] but through the sparse first layer.
pub fn evaluate_prepared(params: &MlpParams, set: &EvalSet, reg: &Regulariser) -> f64 {
    let z1 = set.inputs.left_mul(&params.w1).broadcast_add_col(&params.b1);
    let (_, _, _, probs) = output_layers(params, &z1, reg, Phase::Test);
    let wrong = predict(&probs).iter().zip(&set.labels).filter(|(&p, &l)| p != usize::from(l)).count();
    wrong as f64 / set.len() as f64
}
