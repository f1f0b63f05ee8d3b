#![allow(dead_code)]

use mambapupil_autograd::{backward, NoGradGuard, Tensor};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in (-1, 1).
pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Uniform magnitudes in [0.1, 1) with random sign — keeps finite differences
/// away from the kinks of relu/maxpool and the pole of sqrt.
pub fn rand_vec_away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

pub fn rand_param(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::param(shape, rand_vec(rng, n))
}

/// Checks the recorded backward pass of `f` against central finite
/// differences at every coordinate of every tensor in `params`.
///
/// `f` must be a pure function of the parameter *values* (it may be called
/// many times), returning a scalar tensor.
pub fn gradcheck<F>(params: &[Tensor<f64>], f: F)
where
    F: Fn(&[Tensor<f64>]) -> Tensor<f64>,
{
    const H: f64 = 1e-5;
    const TOL: f64 = 1e-4;
    // Gradients that are truly ~0 (e.g. a bias feeding batch norm, which
    // cancels constant shifts exactly) leave central differences dominated by
    // roundoff at the ~1e-10 scale; below this absolute difference the
    // relative criterion is meaningless.
    const ATOL: f64 = 1e-8;

    for p in params {
        p.zero_grad();
    }
    let loss = f(params);
    assert_eq!(loss.len(), 1, "gradcheck: loss must be scalar");
    backward(&loss);
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad_or_zeros()).collect();

    for (pi, p) in params.iter().enumerate() {
        for i in 0..p.len() {
            let orig = p.data()[i];
            p.data_mut()[i] = orig + H;
            let f_plus = {
                let _guard = NoGradGuard::new();
                f(params).item()
            };
            p.data_mut()[i] = orig - H;
            let f_minus = {
                let _guard = NoGradGuard::new();
                f(params).item()
            };
            p.data_mut()[i] = orig;

            let fd = (f_plus - f_minus) / (2.0 * H);
            let a = analytic[pi][i];
            let diff = (a - fd).abs();
            let denom = a.abs().max(fd.abs()).max(1e-6);
            let rel = diff / denom;
            assert!(
                rel < TOL || diff < ATOL,
                "gradient mismatch: param {pi}, index {i}: analytic {a} vs finite-diff {fd} \
                 (rel err {rel:.3e})"
            );
        }
    }
}

pub fn assert_close(a: &[f64], b: &[f64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: length mismatch");
    for (i, (&x, &y)) in a.iter().zip(b.iter()).enumerate() {
        assert!(
            (x - y).abs() <= tol,
            "{what}: index {i}: {x} vs {y} (diff {:.3e})",
            (x - y).abs()
        );
    }
}
