//! Central finite-difference verification of every operation's backward pass
//! (64-bit, h = 1e-5, relative error < 1e-4).

mod common;

use common::{gradcheck, rand_param, rand_vec_away_from_zero, rng};
use mambapupil_autograd::ops::{self, RunningStats};
use mambapupil_autograd::{backward, Tensor};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Scalar probe: sum(y * y) exercises non-uniform upstream gradients and a
/// doubled parent edge.
fn sq_sum(y: &Tensor<f64>) -> Tensor<f64> {
    ops::sum_all(&ops::mul(y, y))
}

#[test]
fn backward_of_sum_is_ones() {
    let x = Tensor::<f64>::param(&[2, 3], vec![3.0; 6]);
    let loss = ops::sum_all(&x);
    backward(&loss);
    assert_eq!(x.grad().unwrap(), vec![1.0; 6]);
}

#[test]
fn backward_of_sum_of_squares_is_two_x() {
    let vals = vec![1.0, -2.0, 0.5, 3.0];
    let x = Tensor::<f64>::param(&[4], vals.clone());
    let loss = ops::sum_all(&ops::mul(&x, &x));
    backward(&loss);
    let g = x.grad().unwrap();
    for (gi, v) in g.iter().zip(vals) {
        assert!((gi - 2.0 * v).abs() < 1e-12);
    }
}

#[test]
fn unreachable_parameter_reads_zero_gradient() {
    let x = Tensor::<f64>::param(&[2], vec![1.0, 2.0]);
    let orphan = Tensor::<f64>::param(&[3], vec![0.0; 3]);
    let loss = ops::sum_all(&x);
    backward(&loss);
    assert_eq!(orphan.grad_or_zeros(), vec![0.0; 3]);
}

#[test]
fn grad_elementwise_chain() {
    let mut r = rng(101);
    let x = rand_param(&mut r, &[3, 4]);
    let y = rand_param(&mut r, &[3, 4]);
    gradcheck(&[x, y], |p| {
        let s = ops::add(&p[0], &ops::mul(&p[1], &p[1]));
        let t = ops::sub(&s, &ops::scale_add(&p[0], 0.3, 0.7));
        let u = ops::mul(&ops::sigmoid(&t), &ops::tanh(&p[1]));
        ops::sum_all(&ops::mul(&u, &u))
    });
}

#[test]
fn grad_exp_softplus() {
    let mut r = rng(102);
    let x = rand_param(&mut r, &[2, 5]);
    gradcheck(&[x], |p| {
        let a = ops::exp(&ops::scale_add(&p[0], 0.5, -0.2));
        let b = ops::softplus(&p[0]);
        sq_sum(&ops::add(&a, &b))
    });
}

#[test]
fn grad_relu_away_from_kink() {
    let mut r = rng(103);
    let x = Tensor::param(&[4, 4], rand_vec_away_from_zero(&mut r, 16));
    gradcheck(&[x], |p| sq_sum(&ops::relu(&p[0])));
}

#[test]
fn grad_sqrt_on_positive_inputs() {
    let mut r = rng(104);
    let vals: Vec<f64> = rand_vec_away_from_zero(&mut r, 12).iter().map(|v| v.abs() + 0.5).collect();
    let x = Tensor::param(&[12], vals);
    gradcheck(&[x], |p| sq_sum(&ops::sqrt(&p[0])));
}

#[test]
fn grad_matmul_and_linear() {
    let mut r = rng(105);
    let a = rand_param(&mut r, &[3, 4]);
    let b = rand_param(&mut r, &[4, 2]);
    gradcheck(&[a, b], |p| sq_sum(&ops::matmul(&p[0], &p[1])));

    let x = rand_param(&mut r, &[5, 3]);
    let w = rand_param(&mut r, &[2, 3]);
    let bias = rand_param(&mut r, &[2]);
    gradcheck(&[x, w, bias], |p| sq_sum(&ops::linear(&p[0], &p[1], &p[2])));
}

#[test]
fn grad_batched_vector_ops() {
    let mut r = rng(106);
    let a = rand_param(&mut r, &[2, 3]);
    let m = rand_param(&mut r, &[3, 4]);
    gradcheck(&[a, m], |p| sq_sum(&ops::mul_vec_mat(&p[0], &p[1])));

    let a = rand_param(&mut r, &[2, 3]);
    let c = rand_param(&mut r, &[2, 4]);
    gradcheck(&[a, c], |p| sq_sum(&ops::batch_outer(&p[0], &p[1])));

    let s = rand_param(&mut r, &[2, 3, 4]);
    let c = rand_param(&mut r, &[2, 4]);
    gradcheck(&[s, c], |p| sq_sum(&ops::batch_matvec(&p[0], &p[1])));

    let x = rand_param(&mut r, &[4, 3]);
    let v = rand_param(&mut r, &[3]);
    gradcheck(&[x, v], |p| sq_sum(&ops::mul_row(&p[0], &p[1])));
}

#[test]
fn grad_conv2d() {
    let mut r = rng(107);
    let x = rand_param(&mut r, &[2, 2, 5, 6]);
    let w = rand_param(&mut r, &[3, 2, 3, 3]);
    let b = rand_param(&mut r, &[3]);
    gradcheck(&[x, w, b], |p| sq_sum(&ops::conv2d(&p[0], &p[1], &p[2], 1, 1)));
}

#[test]
fn grad_conv2d_strided() {
    let mut r = rng(108);
    let x = rand_param(&mut r, &[1, 2, 5, 5]);
    let w = rand_param(&mut r, &[2, 2, 3, 3]);
    let b = rand_param(&mut r, &[2]);
    gradcheck(&[x, w, b], |p| sq_sum(&ops::conv2d(&p[0], &p[1], &p[2], 2, 1)));
}

#[test]
fn grad_pooling() {
    let mut r = rng(109);
    // Values away from each other so ±h never flips a window's argmax.
    let x = Tensor::param(&[2, 2, 4, 4], rand_vec_away_from_zero(&mut r, 64));
    gradcheck(&[x], |p| sq_sum(&ops::maxpool2d(&p[0], 2, 2)));

    let x = rand_param(&mut r, &[2, 3, 4, 5]);
    gradcheck(&[x], |p| sq_sum(&ops::global_avg_pool(&p[0])));
}

#[test]
fn maxpool_routes_gradient_to_first_of_tied_maxima() {
    let x = Tensor::<f64>::param(&[1, 1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]);
    let y = ops::maxpool2d(&x, 2, 2);
    let loss = ops::sum_all(&y);
    backward(&loss);
    assert_eq!(x.grad().unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn grad_batchnorm_train_mode() {
    let mut r = rng(110);
    let x = rand_param(&mut r, &[3, 2, 3, 4]);
    let gamma = rand_param(&mut r, &[2]);
    let beta = rand_param(&mut r, &[2]);
    gradcheck(&[x, gamma, beta], |p| {
        let mut stats = RunningStats::new(2);
        sq_sum(&ops::batchnorm2d(&p[0], &p[1], &p[2], &mut stats, true, 0.1, 1e-5))
    });
}

#[test]
fn grad_batchnorm_eval_mode() {
    let mut r = rng(111);
    let seed_x = rand_param(&mut r, &[4, 2, 3, 3]);
    let gamma0 = Tensor::<f64>::full(&[2], 1.0);
    let beta0 = Tensor::<f64>::zeros(&[2]);
    let mut stats = RunningStats::new(2);
    let _ = ops::batchnorm2d(&seed_x, &gamma0, &beta0, &mut stats, true, 0.1, 1e-5);

    let x = rand_param(&mut r, &[2, 2, 3, 3]);
    let gamma = rand_param(&mut r, &[2]);
    let beta = rand_param(&mut r, &[2]);
    gradcheck(&[x, gamma, beta], |p| {
        let mut s = stats.clone();
        sq_sum(&ops::batchnorm2d(&p[0], &p[1], &p[2], &mut s, false, 0.1, 1e-5))
    });
}

#[test]
fn grad_rmsnorm() {
    let mut r = rng(112);
    let x = rand_param(&mut r, &[4, 6]);
    let gain = rand_param(&mut r, &[6]);
    gradcheck(&[x, gain], |p| sq_sum(&ops::rmsnorm(&p[0], &p[1], 1e-5)));
}

#[test]
fn grad_spatial_dropout_with_fixed_mask() {
    let mut r = rng(113);
    let x = rand_param(&mut r, &[2, 3, 8]);
    gradcheck(&[x], |p| {
        // Same seed every call: the mask is part of the function under test.
        let mut mask_rng = ChaCha8Rng::seed_from_u64(7);
        sq_sum(&ops::spatial_dropout(&p[0], 0.5, true, &mut mask_rng))
    });
}

#[test]
fn grad_shape_ops() {
    let mut r = rng(114);
    let x = rand_param(&mut r, &[2, 6]);
    gradcheck(&[x], |p| sq_sum(&ops::reshape(&p[0], vec![3, 4])));

    let a = rand_param(&mut r, &[3, 2]);
    let b = rand_param(&mut r, &[3, 4]);
    gradcheck(&[a, b], |p| sq_sum(&ops::concat_last(&p[0], &p[1])));

    let seq = rand_param(&mut r, &[2, 4, 3]);
    gradcheck(&[seq], |p| sq_sum(&ops::select_time(&p[0], 2)));

    let s0 = rand_param(&mut r, &[2, 3]);
    let s1 = rand_param(&mut r, &[2, 3]);
    let s2 = rand_param(&mut r, &[2, 3]);
    gradcheck(&[s0, s1, s2], |p| sq_sum(&ops::stack_time(p)));
}

#[test]
fn grad_reductions() {
    let mut r = rng(115);
    let x = rand_param(&mut r, &[3, 4]);
    gradcheck(&[x], |p| {
        let m = ops::mean_trailing(&p[0]);
        let s = ops::mean_all(&p[0]);
        let t = ops::sum_all(&ops::mul(&m, &m));
        ops::add(&t, &ops::mul(&s, &s))
    });
}

#[test]
fn grad_composite_conv_block() {
    // Conv → BN → ReLU → maxpool → global pool → linear: the per-frame
    // feature pathway, end to end.
    let mut r = rng(116);
    let x = rand_param(&mut r, &[2, 2, 6, 6]);
    let w = rand_param(&mut r, &[4, 2, 3, 3]);
    let b = rand_param(&mut r, &[4]);
    let gamma = rand_param(&mut r, &[4]);
    let beta = rand_param(&mut r, &[4]);
    let lw = rand_param(&mut r, &[3, 4]);
    let lb = rand_param(&mut r, &[3]);
    gradcheck(&[x, w, b, gamma, beta, lw, lb], |p| {
        let mut stats = RunningStats::new(4);
        let c = ops::conv2d(&p[0], &p[1], &p[2], 1, 1);
        let n = ops::batchnorm2d(&c, &p[3], &p[4], &mut stats, true, 0.1, 1e-5);
        let a = ops::relu(&n);
        let pl = ops::maxpool2d(&a, 2, 2);
        let g = ops::global_avg_pool(&pl);
        let y = ops::linear(&g, &p[5], &p[6]);
        sq_sum(&y)
    });
}
