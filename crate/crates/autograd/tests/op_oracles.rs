//! Forward-value checks of every operation against independently written
//! scalar-loop references and hand-computed fixtures.

mod common;

use common::{assert_close, rand_param, rng};
use mambapupil_autograd::ops::{self, RunningStats};
use mambapupil_autograd::Tensor;

// ---------------------------------------------------------------------------
// elementwise

#[test]
fn elementwise_fixed_points() {
    let x = Tensor::<f64>::from_vec(&[4], vec![0.0, 1.0, -1.0, 4.0]);
    assert_close(&ops::sigmoid(&x).to_vec(), &[0.5, 1.0 / (1.0 + (-1.0f64).exp()), 1.0 / (1.0 + 1.0f64.exp()), 1.0 / (1.0 + (-4.0f64).exp())], 1e-15, "sigmoid");
    assert_close(&ops::tanh(&x).to_vec(), &[0.0, 1.0f64.tanh(), (-1.0f64).tanh(), 4.0f64.tanh()], 1e-15, "tanh");
    assert_close(&ops::relu(&x).to_vec(), &[0.0, 1.0, 0.0, 4.0], 0.0, "relu");
    assert_close(&ops::exp(&x).to_vec(), &[1.0, 1.0f64.exp(), (-1.0f64).exp(), 4.0f64.exp()], 1e-12, "exp");
    assert_close(
        &ops::softplus(&x).to_vec(),
        &[2.0f64.ln(), (1.0 + 1.0f64.exp()).ln(), (1.0 + (-1.0f64).exp()).ln(), (1.0 + 4.0f64.exp()).ln()],
        1e-12,
        "softplus",
    );

    let p = Tensor::<f64>::from_vec(&[3], vec![4.0, 9.0, 2.25]);
    assert_close(&ops::sqrt(&p).to_vec(), &[2.0, 3.0, 1.5], 1e-15, "sqrt");

    let a = Tensor::<f64>::from_vec(&[3], vec![1.0, 2.0, 3.0]);
    let b = Tensor::<f64>::from_vec(&[3], vec![10.0, 20.0, 30.0]);
    assert_close(&ops::add(&a, &b).to_vec(), &[11.0, 22.0, 33.0], 0.0, "add");
    assert_close(&ops::sub(&a, &b).to_vec(), &[-9.0, -18.0, -27.0], 0.0, "sub");
    assert_close(&ops::mul(&a, &b).to_vec(), &[10.0, 40.0, 90.0], 0.0, "mul");
    assert_close(&ops::scale_add(&a, 2.0, -1.0).to_vec(), &[1.0, 3.0, 5.0], 0.0, "scale_add");
}

#[test]
fn softplus_is_stable_at_large_inputs() {
    let x = Tensor::<f64>::from_vec(&[2], vec![800.0, -800.0]);
    let y = ops::softplus(&x).to_vec();
    assert!((y[0] - 800.0).abs() < 1e-9, "softplus(800) ≈ 800, got {}", y[0]);
    assert!(y[1] >= 0.0 && y[1] < 1e-300, "softplus(-800) ≈ 0, got {}", y[1]);
}

// ---------------------------------------------------------------------------
// linear algebra

#[test]
fn matmul_matches_triple_loop() {
    let mut r = rng(11);
    let (m, k, n) = (4, 5, 3);
    let a = rand_param(&mut r, &[m, k]);
    let b = rand_param(&mut r, &[k, n]);
    let c = ops::matmul(&a, &b).to_vec();

    let (ad, bd) = (a.to_vec(), b.to_vec());
    let mut want = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for kk in 0..k {
                acc += ad[i * k + kk] * bd[kk * n + j];
            }
            want[i * n + j] = acc;
        }
    }
    assert_close(&c, &want, 1e-12, "matmul");
}

#[test]
fn linear_matches_loop() {
    let mut r = rng(12);
    let (n, fi, fo) = (3, 4, 2);
    let x = rand_param(&mut r, &[n, fi]);
    let w = rand_param(&mut r, &[fo, fi]);
    let b = rand_param(&mut r, &[fo]);
    let y = ops::linear(&x, &w, &b).to_vec();

    let (xd, wd, bd) = (x.to_vec(), w.to_vec(), b.to_vec());
    let mut want = vec![0.0; n * fo];
    for i in 0..n {
        for o in 0..fo {
            let mut acc = bd[o];
            for j in 0..fi {
                acc += xd[i * fi + j] * wd[o * fi + j];
            }
            want[i * fo + o] = acc;
        }
    }
    assert_close(&y, &want, 1e-12, "linear");
}

#[test]
fn batched_vector_ops_match_loops() {
    let mut r = rng(13);
    let (bsz, i_dim, j_dim) = (3, 4, 5);
    let a = rand_param(&mut r, &[bsz, i_dim]);
    let m = rand_param(&mut r, &[i_dim, j_dim]);
    let c = rand_param(&mut r, &[bsz, j_dim]);
    let s = rand_param(&mut r, &[bsz, i_dim, j_dim]);
    let v = rand_param(&mut r, &[i_dim]);

    let (ad, md, cd, sd, vd) = (a.to_vec(), m.to_vec(), c.to_vec(), s.to_vec(), v.to_vec());

    let got = ops::mul_vec_mat(&a, &m).to_vec();
    let mut want = vec![0.0; bsz * i_dim * j_dim];
    for b in 0..bsz {
        for i in 0..i_dim {
            for j in 0..j_dim {
                want[(b * i_dim + i) * j_dim + j] = ad[b * i_dim + i] * md[i * j_dim + j];
            }
        }
    }
    assert_close(&got, &want, 1e-15, "mul_vec_mat");

    let got = ops::batch_outer(&a, &c).to_vec();
    for b in 0..bsz {
        for i in 0..i_dim {
            for j in 0..j_dim {
                want[(b * i_dim + i) * j_dim + j] = ad[b * i_dim + i] * cd[b * j_dim + j];
            }
        }
    }
    assert_close(&got, &want, 1e-15, "batch_outer");

    let got = ops::batch_matvec(&s, &c).to_vec();
    let mut want2 = vec![0.0; bsz * i_dim];
    for b in 0..bsz {
        for i in 0..i_dim {
            let mut acc = 0.0;
            for j in 0..j_dim {
                acc += sd[(b * i_dim + i) * j_dim + j] * cd[b * j_dim + j];
            }
            want2[b * i_dim + i] = acc;
        }
    }
    assert_close(&got, &want2, 1e-14, "batch_matvec");

    let got = ops::mul_row(&a, &v).to_vec();
    for b in 0..bsz {
        for i in 0..i_dim {
            want2[b * i_dim + i] = ad[b * i_dim + i] * vd[i];
        }
    }
    assert_close(&got, &want2, 1e-15, "mul_row");
}

// ---------------------------------------------------------------------------
// convolution

/// Direct dense cross-correlation, written straight from the definition.
#[allow(clippy::too_many_arguments)]
fn conv_reference(
    x: &[f64],
    w: &[f64],
    b: &[f64],
    batch: usize,
    in_ch: usize,
    h: usize,
    wd: usize,
    out_ch: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; batch * out_ch * oh * ow];
    for n in 0..batch {
        for oc in 0..out_ch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b[oc];
                    for ic in 0..in_ch {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize || ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let xv = x[((n * in_ch + ic) * h + iy as usize) * wd + ix as usize];
                                let wv = w[((oc * in_ch + ic) * kh + ky) * kw + kx];
                                acc += xv * wv;
                            }
                        }
                    }
                    out[((n * out_ch + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

#[test]
fn conv2d_identity_kernel_passes_input_through() {
    let mut r = rng(21);
    let x = rand_param(&mut r, &[1, 1, 4, 5]);
    let w = Tensor::<f64>::from_vec(&[1, 1, 1, 1], vec![1.0]);
    let b = Tensor::<f64>::zeros(&[1]);
    let y = ops::conv2d(&x, &w, &b, 1, 0);
    assert_eq!(y.shape(), &[1, 1, 4, 5]);
    assert_close(&y.to_vec(), &x.to_vec(), 0.0, "identity conv");
}

#[test]
fn conv2d_zero_input_broadcasts_bias() {
    let x = Tensor::<f64>::zeros(&[2, 3, 6, 6]);
    let w = Tensor::<f64>::zeros(&[4, 3, 3, 3]);
    let b = Tensor::<f64>::from_vec(&[4], vec![0.5, -1.0, 2.0, 0.0]);
    let y = ops::conv2d(&x, &w, &b, 1, 1);
    assert_eq!(y.shape(), &[2, 4, 6, 6]);
    let yd = y.to_vec();
    for n in 0..2 {
        for oc in 0..4 {
            for i in 0..36 {
                assert_eq!(yd[(n * 4 + oc) * 36 + i], b.to_vec()[oc], "bias broadcast");
            }
        }
    }
}

#[test]
fn conv2d_matches_direct_reference() {
    let mut r = rng(22);
    let (batch, in_ch, h, wd) = (2, 3, 8, 8);
    let (out_ch, kh, kw) = (4, 5, 5);
    let x = rand_param(&mut r, &[batch, in_ch, h, wd]);
    let w = rand_param(&mut r, &[out_ch, in_ch, kh, kw]);
    let b = rand_param(&mut r, &[out_ch]);
    let y = ops::conv2d(&x, &w, &b, 1, 2);
    assert_eq!(y.shape(), &[batch, out_ch, 8, 8]);
    let want = conv_reference(
        &x.to_vec(), &w.to_vec(), &b.to_vec(),
        batch, in_ch, h, wd, out_ch, kh, kw, 1, 2,
    );
    assert_close(&y.to_vec(), &want, 1e-12, "conv2d vs direct reference");
}

#[test]
fn conv2d_strided_matches_direct_reference() {
    let mut r = rng(23);
    let (batch, in_ch, h, wd) = (1, 2, 7, 9);
    let (out_ch, kh, kw) = (3, 3, 3);
    let x = rand_param(&mut r, &[batch, in_ch, h, wd]);
    let w = rand_param(&mut r, &[out_ch, in_ch, kh, kw]);
    let b = rand_param(&mut r, &[out_ch]);
    let y = ops::conv2d(&x, &w, &b, 2, 1);
    assert_eq!(y.shape(), &[1, 3, 4, 5]);
    let want = conv_reference(
        &x.to_vec(), &w.to_vec(), &b.to_vec(),
        batch, in_ch, h, wd, out_ch, kh, kw, 2, 1,
    );
    assert_close(&y.to_vec(), &want, 1e-12, "strided conv2d vs direct reference");
}

#[test]
fn conv2d_is_linear_in_its_input() {
    let mut r = rng(24);
    let w = rand_param(&mut r, &[2, 2, 3, 3]);
    let zero_b = Tensor::<f64>::zeros(&[2]);
    let x = rand_param(&mut r, &[1, 2, 6, 6]);
    let y = rand_param(&mut r, &[1, 2, 6, 6]);
    let (alpha, beta) = (1.7, -0.3);

    let mix_data: Vec<f64> = x
        .to_vec()
        .iter()
        .zip(y.to_vec())
        .map(|(&xv, yv)| alpha * xv + beta * yv)
        .collect();
    let mix = Tensor::from_vec(&[1, 2, 6, 6], mix_data);

    let lhs = ops::conv2d(&mix, &w, &zero_b, 1, 1).to_vec();
    let cx = ops::conv2d(&x, &w, &zero_b, 1, 1).to_vec();
    let cy = ops::conv2d(&y, &w, &zero_b, 1, 1).to_vec();
    let rhs: Vec<f64> = cx.iter().zip(cy).map(|(&a, b)| alpha * a + beta * b).collect();
    assert_close(&lhs, &rhs, 1e-12, "conv linearity");
}

#[test]
#[should_panic(expected = "does not tile evenly")]
fn conv2d_rejects_nondivisible_stride_geometry() {
    let x = Tensor::<f64>::zeros(&[1, 1, 6, 6]);
    let w = Tensor::<f64>::zeros(&[1, 1, 3, 3]);
    let b = Tensor::<f64>::zeros(&[1]);
    let _ = ops::conv2d(&x, &w, &b, 2, 0); // (6-3)/2 does not divide
}

// ---------------------------------------------------------------------------
// pooling

#[test]
fn maxpool_hand_case() {
    #[rustfmt::skip]
    let x = Tensor::<f64>::from_vec(&[1, 1, 4, 4], vec![
        1.0, 2.0, 5.0, 4.0,
        3.0, 0.0, 1.0, 1.0,
        9.0, 1.0, 0.0, 2.0,
        1.0, 1.0, 3.0, 1.0,
    ]);
    let y = ops::maxpool2d(&x, 2, 2);
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    assert_close(&y.to_vec(), &[3.0, 5.0, 9.0, 3.0], 0.0, "maxpool 2x2");
}

#[test]
fn maxpool_floor_semantics_drop_trailing_row_col() {
    // 5x5 input, 2x2 window, stride 2: output is 2x2; row 4 and col 4 are
    // never visited.
    let mut data = vec![0.0; 25];
    for (i, v) in data.iter_mut().enumerate() {
        *v = i as f64;
    }
    // Plant a huge value in the dropped row; it must not appear.
    data[4 * 5 + 4] = 1e9;
    let x = Tensor::<f64>::from_vec(&[1, 1, 5, 5], data);
    let y = ops::maxpool2d(&x, 2, 2);
    assert_eq!(y.shape(), &[1, 1, 2, 2]);
    assert_close(&y.to_vec(), &[6.0, 8.0, 16.0, 18.0], 0.0, "floor maxpool");
}

#[test]
fn maxpool_matches_loop_reference() {
    let mut r = rng(31);
    let (batch, ch, h, w) = (2, 3, 6, 8);
    let x = rand_param(&mut r, &[batch, ch, h, w]);
    let y = ops::maxpool2d(&x, 2, 2).to_vec();
    let xd = x.to_vec();
    let (oh, ow) = (3, 4);
    let mut want = vec![0.0; batch * ch * oh * ow];
    for bc in 0..batch * ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..2 {
                    for kx in 0..2 {
                        let v = xd[bc * h * w + (oy * 2 + ky) * w + ox * 2 + kx];
                        if v > best {
                            best = v;
                        }
                    }
                }
                want[bc * oh * ow + oy * ow + ox] = best;
            }
        }
    }
    assert_close(&y, &want, 0.0, "maxpool vs loop");
}

#[test]
fn global_avg_pool_matches_loop() {
    let mut r = rng(32);
    let (batch, ch, h, w) = (2, 4, 3, 5);
    let x = rand_param(&mut r, &[batch, ch, h, w]);
    let y = ops::global_avg_pool(&x).to_vec();
    let xd = x.to_vec();
    let mut want = vec![0.0; batch * ch];
    for bc in 0..batch * ch {
        want[bc] = xd[bc * 15..(bc + 1) * 15].iter().sum::<f64>() / 15.0;
    }
    assert_close(&y, &want, 1e-14, "global_avg_pool");
}

// ---------------------------------------------------------------------------
// normalization

#[test]
fn batchnorm_train_output_is_standardized() {
    let mut r = rng(41);
    let (batch, ch, h, w) = (4, 3, 5, 5);
    let x = rand_param(&mut r, &[batch, ch, h, w]);
    let gamma = Tensor::<f64>::full(&[ch], 1.0);
    let beta = Tensor::<f64>::zeros(&[ch]);
    let mut stats = RunningStats::new(ch);
    let y = ops::batchnorm2d(&x, &gamma, &beta, &mut stats, true, 0.1, 1e-5).to_vec();

    let area = h * w;
    let n = batch * area;
    for c in 0..ch {
        let mut vals = Vec::with_capacity(n);
        for b in 0..batch {
            vals.extend_from_slice(&y[((b * ch + c) * area)..((b * ch + c + 1) * area)]);
        }
        let mean: f64 = vals.iter().sum::<f64>() / n as f64;
        let var: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-6, "channel {c} mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "channel {c} var {var}");
    }
}

#[test]
fn batchnorm_constant_channel_maps_to_zero() {
    let x = Tensor::<f64>::full(&[2, 2, 3, 3], 7.5);
    let gamma = Tensor::<f64>::full(&[2], 1.0);
    let beta = Tensor::<f64>::zeros(&[2]);
    let mut stats = RunningStats::new(2);
    let y = ops::batchnorm2d(&x, &gamma, &beta, &mut stats, true, 0.1, 1e-5).to_vec();
    for v in y {
        assert!(v.abs() < 1e-9, "constant channel should normalize to ~0, got {v}");
    }
}

#[test]
fn batchnorm_train_matches_loop_reference() {
    let mut r = rng(42);
    let (batch, ch, h, w) = (3, 2, 4, 4);
    let x = rand_param(&mut r, &[batch, ch, h, w]);
    let gamma = rand_param(&mut r, &[ch]);
    let beta = rand_param(&mut r, &[ch]);
    let eps = 1e-5;
    let mut stats = RunningStats::new(ch);
    let y = ops::batchnorm2d(&x, &gamma, &beta, &mut stats, true, 0.1, eps).to_vec();

    let xd = x.to_vec();
    let (gd, bd) = (gamma.to_vec(), beta.to_vec());
    let area = h * w;
    let n = (batch * area) as f64;
    let mut want = vec![0.0; xd.len()];
    for c in 0..ch {
        let mut sum = 0.0;
        for b in 0..batch {
            for i in 0..area {
                sum += xd[(b * ch + c) * area + i];
            }
        }
        let mean = sum / n;
        let mut sq = 0.0;
        for b in 0..batch {
            for i in 0..area {
                let d = xd[(b * ch + c) * area + i] - mean;
                sq += d * d;
            }
        }
        let var = sq / n;
        let inv = 1.0 / (var + eps).sqrt();
        for b in 0..batch {
            for i in 0..area {
                let idx = (b * ch + c) * area + i;
                want[idx] = gd[c] * (xd[idx] - mean) * inv + bd[c];
            }
        }
    }
    assert_close(&y, &want, 1e-12, "batchnorm train vs loop");

    // Running stats after the first train call hold exactly this batch's
    // statistics (mean as-is, variance unbiased).
    let rm = stats.mean.to_vec();
    let rv = stats.var.to_vec();
    for c in 0..ch {
        let mut sum = 0.0;
        for b in 0..batch {
            for i in 0..area {
                sum += xd[(b * ch + c) * area + i];
            }
        }
        let mean = sum / n;
        let mut sq = 0.0;
        for b in 0..batch {
            for i in 0..area {
                let d = xd[(b * ch + c) * area + i] - mean;
                sq += d * d;
            }
        }
        let unbiased = sq / (n - 1.0);
        assert!((rm[c] - mean).abs() < 1e-12, "running mean channel {c}");
        assert!((rv[c] - unbiased).abs() < 1e-12, "running var channel {c}");
    }
}

#[test]
fn batchnorm_running_stats_blend_with_momentum() {
    let mut r = rng(43);
    let ch = 2;
    let gamma = Tensor::<f64>::full(&[ch], 1.0);
    let beta = Tensor::<f64>::zeros(&[ch]);
    let mut stats = RunningStats::new(ch);

    let x1 = rand_param(&mut r, &[2, ch, 3, 3]);
    let _ = ops::batchnorm2d(&x1, &gamma, &beta, &mut stats, true, 0.1, 1e-5);
    let rm1 = stats.mean.to_vec();
    let rv1 = stats.var.to_vec();

    let x2 = rand_param(&mut r, &[2, ch, 3, 3]);
    let _ = ops::batchnorm2d(&x2, &gamma, &beta, &mut stats, true, 0.1, 1e-5);
    let rm2 = stats.mean.to_vec();

    // Second call blends: new = 0.9 * old + 0.1 * batch_mean.
    let xd = x2.to_vec();
    let area = 9;
    let n = 2.0 * area as f64;
    for c in 0..ch {
        let mut sum = 0.0;
        for b in 0..2 {
            for i in 0..area {
                sum += xd[(b * ch + c) * area + i];
            }
        }
        let bm = sum / n;
        let want = 0.9 * rm1[c] + 0.1 * bm;
        assert!((rm2[c] - want).abs() < 1e-12, "momentum blend channel {c}");
    }
    assert!(rv1.iter().all(|v| v.is_finite()));
}

#[test]
fn batchnorm_eval_uses_running_stats() {
    let mut r = rng(44);
    let ch = 2;
    let gamma = rand_param(&mut r, &[ch]);
    let beta = rand_param(&mut r, &[ch]);
    let mut stats = RunningStats::new(ch);
    let x_train = rand_param(&mut r, &[4, ch, 3, 3]);
    let _ = ops::batchnorm2d(&x_train, &gamma, &beta, &mut stats, true, 0.1, 1e-5);

    let rm = stats.mean.to_vec();
    let rv = stats.var.to_vec();
    let x = rand_param(&mut r, &[1, ch, 3, 3]);
    let y = ops::batchnorm2d(&x, &gamma, &beta, &mut stats, false, 0.1, 1e-5).to_vec();
    let xd = x.to_vec();
    let (gd, bd) = (gamma.to_vec(), beta.to_vec());
    for c in 0..ch {
        let inv = 1.0 / (rv[c] + 1e-5).sqrt();
        for i in 0..9 {
            let want = gd[c] * (xd[c * 9 + i] - rm[c]) * inv + bd[c];
            assert!((y[c * 9 + i] - want).abs() < 1e-12, "eval normalization");
        }
    }
}

#[test]
#[should_panic(expected = "eval mode before any train step")]
fn batchnorm_eval_without_initialized_stats_panics() {
    let x = Tensor::<f64>::zeros(&[1, 2, 3, 3]);
    let gamma = Tensor::<f64>::full(&[2], 1.0);
    let beta = Tensor::<f64>::zeros(&[2]);
    let mut stats = RunningStats::new(2);
    let _ = ops::batchnorm2d(&x, &gamma, &beta, &mut stats, false, 0.1, 1e-5);
}

#[test]
fn rmsnorm_fixed_points_and_reference() {
    // Constant vector, unit gain, eps 0: every element collapses to its sign.
    let x = Tensor::<f64>::from_vec(&[1, 4], vec![-3.0; 4]);
    let gain = Tensor::<f64>::full(&[4], 1.0);
    let y = ops::rmsnorm(&x, &gain, 0.0).to_vec();
    assert_close(&y, &[-1.0; 4], 1e-15, "rmsnorm constant");

    // Zero vector with eps > 0 stays zero.
    let z = Tensor::<f64>::zeros(&[2, 3]);
    let gain3 = Tensor::<f64>::full(&[3], 1.0);
    let y = ops::rmsnorm(&z, &gain3, 1e-5).to_vec();
    assert_close(&y, &[0.0; 6], 0.0, "rmsnorm zero");

    // Random input against the scalar definition.
    let mut r = rng(45);
    let x = rand_param(&mut r, &[3, 5]);
    let gain5 = rand_param(&mut r, &[5]);
    let eps = 1e-5;
    let y = ops::rmsnorm(&x, &gain5, eps).to_vec();
    let xd = x.to_vec();
    let gd = gain5.to_vec();
    let mut want = vec![0.0; 15];
    for row in 0..3 {
        let xs = &xd[row * 5..(row + 1) * 5];
        let ms: f64 = xs.iter().map(|v| v * v).sum::<f64>() / 5.0;
        let r_ = (ms + eps).sqrt();
        for i in 0..5 {
            want[row * 5 + i] = xs[i] / r_ * gd[i];
        }
    }
    assert_close(&y, &want, 1e-12, "rmsnorm vs loop");
}

// ---------------------------------------------------------------------------
// shape & reduction

#[test]
fn shape_ops_hand_cases() {
    let x = Tensor::<f64>::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let r = ops::reshape(&x, vec![3, 2]);
    assert_eq!(r.shape(), &[3, 2]);
    assert_close(&r.to_vec(), &x.to_vec(), 0.0, "reshape keeps order");

    let a = Tensor::<f64>::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let b = Tensor::<f64>::from_vec(&[2, 1], vec![9.0, 8.0]);
    let c = ops::concat_last(&a, &b);
    assert_eq!(c.shape(), &[2, 3]);
    assert_close(&c.to_vec(), &[1.0, 2.0, 9.0, 3.0, 4.0, 8.0], 0.0, "concat_last");

    // (batch=2, time=2, feat=2) sequence: select each step, restack, recover.
    let seq = Tensor::<f64>::from_vec(&[2, 2, 2], (1..=8).map(f64::from).collect());
    let s0 = ops::select_time(&seq, 0);
    let s1 = ops::select_time(&seq, 1);
    assert_close(&s0.to_vec(), &[1.0, 2.0, 5.0, 6.0], 0.0, "select t=0");
    assert_close(&s1.to_vec(), &[3.0, 4.0, 7.0, 8.0], 0.0, "select t=1");
    let back = ops::stack_time(&[s0, s1]);
    assert_eq!(back.shape(), &[2, 2, 2]);
    assert_close(&back.to_vec(), &seq.to_vec(), 0.0, "stack inverts select");
}

#[test]
fn reductions_hand_cases() {
    let x = Tensor::<f64>::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(ops::sum_all(&x).item(), 21.0);
    assert_eq!(ops::mean_all(&x).item(), 3.5);
    assert_close(&ops::mean_trailing(&x).to_vec(), &[2.0, 5.0], 0.0, "mean_trailing");
}

// ---------------------------------------------------------------------------
// dropout

#[test]
fn dropout_eval_and_zero_rate_are_identity() {
    let mut r = rng(51);
    let x = rand_param(&mut r, &[2, 3, 4]);
    let y = ops::spatial_dropout(&x, 0.5, false, &mut r);
    assert_eq!(y.id(), x.id(), "eval dropout returns the same tensor");
    let y = ops::spatial_dropout(&x, 0.0, true, &mut r);
    assert_eq!(y.id(), x.id(), "zero-rate dropout returns the same tensor");
}

#[test]
fn dropout_zeroes_whole_channels_across_time() {
    let mut r = rng(52);
    let (batch, time, feat) = (3, 7, 16);
    let x = Tensor::<f64>::full(&[batch, time, feat], 1.0);
    let rate = 0.5;
    let y = ops::spatial_dropout(&x, rate, true, &mut r).to_vec();
    let scale = 1.0 / (1.0 - rate);
    for b in 0..batch {
        for f in 0..feat {
            let v0 = y[(b * time) * feat + f];
            assert!(
                v0 == 0.0 || (v0 - scale).abs() < 1e-12,
                "channel value must be 0 or {scale}, got {v0}"
            );
            for t in 1..time {
                assert_eq!(
                    y[(b * time + t) * feat + f],
                    v0,
                    "channel (b={b}, f={f}) must be constant across time"
                );
            }
        }
    }
}

#[test]
fn dropout_preserves_expectation_over_seeds() {
    let (batch, time, feat) = (1, 1, 64);
    let x = Tensor::<f64>::full(&[batch, time, feat], 1.0);
    let rate = 0.25;
    let trials = 2000;
    let mut acc = 0.0;
    for seed in 0..trials {
        let mut r = rng(seed);
        let y = ops::spatial_dropout(&x, rate, true, &mut r).to_vec();
        acc += y.iter().sum::<f64>() / feat as f64;
    }
    let mean = acc / trials as f64;
    // Bernoulli(0.75) scaled by 4/3: mean 1, per-channel var = 1/3. With
    // 2000*64 draws the standard error is ~0.0016; 0.02 is >10 sigma.
    assert!((mean - 1.0).abs() < 0.02, "inverted dropout mean {mean} should be ~1");
}
