mod common;

use ditherlab::prng::RngStream;

fn stream(labels: &[&str]) -> RngStream {
    let labels: Vec<_> = labels.iter().map(|&l| l.into()).collect();
    RngStream::derive(2024, &labels)
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn uniform_moments_over_a_million_draws() {
    let mut s = stream(&["uniform"]);
    let xs: Vec<f64> = (0..1_000_000).map(|_| s.next_uniform(-0.5, 0.5)).collect();
    assert!(xs.iter().all(|x| (-0.5..0.5).contains(x)));
    let (mean, var) = moments(&xs);
    assert!(mean.abs() < 0.01, "mean {mean}");
    // 1/12 with a +-3 sigma band
    assert!((0.0825..=0.0842).contains(&var), "variance {var}");
}

#[test]
fn gaussian_moments_over_a_million_draws() {
    let mut s = stream(&["gaussian"]);
    let xs: Vec<f64> = (0..1_000_000).map(|_| s.next_gaussian(0.0, 1.0)).collect();
    let (mean, var) = moments(&xs);
    assert!(mean.abs() < 0.005, "mean {mean}");
    assert!((0.995..=1.005).contains(&var), "variance {var}");
}

#[test]
fn sibling_streams_are_uncorrelated() {
    let mut a = stream(&["dropout", "epoch-0"]);
    let mut b = stream(&["dropout", "epoch-1"]);
    let pairs: Vec<(f64, f64)> = (0..100_000).map(|_| (a.next_f64(), b.next_f64())).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (mx, vx) = moments(&xs);
    let (my, vy) = moments(&ys);
    let cov = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0);
    let corr = cov / (vx * vy).sqrt();
    assert!(corr.abs() < 0.01, "correlation {corr}");
}

#[test]
fn first_thousand_draws_match_golden() {
    let mut s = RngStream::derive(42, &["golden".into(), 0u64.into()]);
    let text: String = (0..1000).map(|_| format!("{:016x}\n", s.next_u64())).collect();
    common::assert_golden("prng_seed42_first1000.txt", &text);
}
