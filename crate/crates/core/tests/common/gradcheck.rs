use ditherlab::network::{backward, cross_entropy, forward, Dims, MlpParams};
use ditherlab::prng::RngStream;
use ditherlab::regularise::{Phase, Regulariser};
use ditherlab::Matrix;

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
// Entries whose gradients are both tiny are compared absolutely.
const ABS_FLOOR: f64 = 1e-8;

pub struct Instance {
    pub params: MlpParams,
    pub x: Matrix,
    pub labels: Vec<u8>,
    pub reg: Regulariser,
    pub noise_seed: u64,
}

pub fn instance(case: u64, reg: Regulariser) -> Instance {
    let mut s = RngStream::derive(case, &["gradcheck".into()]);
    let dims = Dims { input: 3 + (s.next_u64() % 6) as usize, hidden: 2 + (s.next_u64() % 5) as usize, output: 10 };
    let batch = 1 + (s.next_u64() % 5) as usize;
    let mut params = MlpParams::gaussian(dims, 0.5, &mut s);
    for b in params.b1.as_mut_slice().iter_mut().chain(params.b2.as_mut_slice()) {
        *b = s.next_uniform(-0.5, 0.5);
    }
    let x = Matrix::from_fn(dims.input, batch, |_, _| s.next_uniform(-1.0, 1.0));
    let labels = (0..batch).map(|_| (s.next_u64() % 10) as u8).collect();
    Instance { params, x, labels, reg, noise_seed: case }
}

fn noise(inst: &Instance) -> RngStream {
    RngStream::derive(inst.noise_seed, &["noise".into()])
}

fn loss(inst: &Instance, params: &MlpParams) -> f64 {
    let mut s = noise(inst);
    cross_entropy(&forward(params, &inst.x, &inst.reg, Phase::Train(&mut s)).probs, &inst.labels)
}

fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < ABS_FLOOR {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

/// Largest relative error over the given `(tensor, flat index)` entries.
pub fn check(inst: &Instance, entries: impl Iterator<Item = (usize, usize)>) -> f64 {
    let mut s = noise(inst);
    let trace = forward(&inst.params, &inst.x, &inst.reg, Phase::Train(&mut s));
    let grads = backward(&trace, &inst.labels, &inst.params);
    let analytic = grads.tensors();
    let mut worst = 0.0f64;
    for (t, i) in entries {
        let mut plus = inst.params.clone();
        plus.tensors_mut()[t].as_mut_slice()[i] += EPS;
        let mut minus = inst.params.clone();
        minus.tensors_mut()[t].as_mut_slice()[i] -= EPS;
        let numeric = (loss(inst, &plus) - loss(inst, &minus)) / (2.0 * EPS);
        worst = worst.max(relative_error(analytic[t].as_slice()[i], numeric));
    }
    worst
}

pub fn all_entries(params: &MlpParams) -> Vec<(usize, usize)> {
    params.tensors().iter().enumerate().flat_map(|(t, m)| (0..m.as_slice().len()).map(move |i| (t, i))).collect()
}

pub fn regularisers() -> [Regulariser; 3] {
    [Regulariser::None, Regulariser::Dropout { rate: 0.5 }, Regulariser::Dither { half_width: 0.5 }]
}

