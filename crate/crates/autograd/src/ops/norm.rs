use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Per-channel running statistics owned by a batch-norm layer. The tensors are
/// plain buffers (`requires_grad = false`); train-mode calls mutate them in
/// place. `initialized` flips on the first train-mode pass (or when the owner
/// restores the stats from a checkpoint).
#[derive(Clone)]
pub struct RunningStats<S: Scalar> {
    pub mean: Tensor<S>,
    pub var: Tensor<S>,
    pub initialized: bool,
}

impl<S: Scalar> RunningStats<S> {
    /// Fresh stats for `channels` channels: mean 0, variance 1, uninitialized.
    pub fn new(channels: usize) -> Self {
        Self {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], S::one()),
            initialized: false,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Batch normalization over `(batch, ch, h, w)`, normalizing each channel.
///
/// Train mode normalizes by the biased batch variance and updates the running
/// stats as `running = (1 - momentum) * running + momentum * batch`, storing
/// the *unbiased* variance in `stats.var`. Eval mode normalizes by the stored
/// running stats and panics if no train-mode pass (or checkpoint restore) has
/// initialized them.
pub fn batchnorm2d<S: Scalar>(
    x: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    stats: &mut RunningStats<S>,
    training: bool,
    momentum: f64,
    eps: f64,
) -> Tensor<S> {
    assert_eq!(x.rank(), 4, "batchnorm2d: input must be rank 4");
    let (batch, ch, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    assert_eq!(gamma.shape(), &[ch], "batchnorm2d: gamma shape");
    assert_eq!(beta.shape(), &[ch], "batchnorm2d: beta shape");
    assert_eq!(stats.channels(), ch, "batchnorm2d: running-stat channels");
    let area = h * w;
    let n_per_ch = batch * area;
    assert!(n_per_ch > 0, "batchnorm2d: empty input");

    let eps_s = S::from_f64(eps);
    let xd = x.data();

    // Per-channel mean/inv-std actually used for normalization this call.
    let (mean, inv_std) = if training {
        let mut mean = vec![S::zero(); ch];
        let mut var = vec![S::zero(); ch];
        let inv_n = S::from_f64(1.0 / n_per_ch as f64);
        for c in 0..ch {
            let mut acc = S::zero();
            for b in 0..batch {
                let plane = &xd[(b * ch + c) * area..(b * ch + c + 1) * area];
                for &v in plane {
                    acc = acc + v;
                }
            }
            mean[c] = acc * inv_n;
        }
        for c in 0..ch {
            let m = mean[c];
            let mut acc = S::zero();
            for b in 0..batch {
                let plane = &xd[(b * ch + c) * area..(b * ch + c + 1) * area];
                for &v in plane {
                    let d = v - m;
                    acc = acc + d * d;
                }
            }
            var[c] = acc * inv_n;
        }

        // Fold this batch into the running stats (unbiased variance stored).
        let mom = S::from_f64(momentum);
        let keep = S::one() - mom;
        let unbias = if n_per_ch > 1 {
            S::from_f64(n_per_ch as f64 / (n_per_ch - 1) as f64)
        } else {
            S::one()
        };
        {
            let mut rm = stats.mean.data_mut();
            let mut rv = stats.var.data_mut();
            if stats.initialized {
                for c in 0..ch {
                    rm[c] = keep * rm[c] + mom * mean[c];
                    rv[c] = keep * rv[c] + mom * var[c] * unbias;
                }
            } else {
                for c in 0..ch {
                    rm[c] = mean[c];
                    rv[c] = var[c] * unbias;
                }
            }
        }
        stats.initialized = true;

        let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps_s).sqrt()).collect();
        (mean, inv_std)
    } else {
        assert!(
            stats.initialized,
            "batchnorm2d: eval mode before any train step initialized the running stats"
        );
        let rm = stats.mean.data();
        let rv = stats.var.data();
        let mean = rm.to_vec();
        let inv_std: Vec<S> = rv.iter().map(|&v| S::one() / (v + eps_s).sqrt()).collect();
        (mean, inv_std)
    };

    let gd = gamma.data();
    let bd = beta.data();
    let mut out = vec![S::zero(); xd.len()];
    let mut x_hat = vec![S::zero(); xd.len()];
    for b in 0..batch {
        for c in 0..ch {
            let (m, is, g, be) = (mean[c], inv_std[c], gd[c], bd[c]);
            let base = (b * ch + c) * area;
            for i in 0..area {
                let xh = (xd[base + i] - m) * is;
                x_hat[base + i] = xh;
                out[base + i] = g * xh + be;
            }
        }
    }
    drop(xd);
    drop(gd);
    drop(bd);

    Tensor::from_op(
        vec![batch, ch, h, w],
        out,
        vec![x.clone(), gamma.clone(), beta.clone()],
        Box::new(move |g, parents| {
            // Per-channel reductions of dy and dy*x_hat feed every input grad.
            let mut sum_dy = vec![S::zero(); ch];
            let mut sum_dy_xhat = vec![S::zero(); ch];
            for b in 0..batch {
                for c in 0..ch {
                    let base = (b * ch + c) * area;
                    let mut s0 = S::zero();
                    let mut s1 = S::zero();
                    for i in 0..area {
                        let gv = g[base + i];
                        s0 = s0 + gv;
                        s1 = s1 + gv * x_hat[base + i];
                    }
                    sum_dy[c] = sum_dy[c] + s0;
                    sum_dy_xhat[c] = sum_dy_xhat[c] + s1;
                }
            }
            if parents[0].requires_grad() {
                let gamma_d = parents[1].data();
                let mut dx = vec![S::zero(); batch * ch * area];
                if training {
                    let inv_n = S::from_f64(1.0 / n_per_ch as f64);
                    for b in 0..batch {
                        for c in 0..ch {
                            let scale = gamma_d[c] * inv_std[c] * inv_n;
                            let (sd, sdx) = (sum_dy[c], sum_dy_xhat[c]);
                            let n_s = S::from_f64(n_per_ch as f64);
                            let base = (b * ch + c) * area;
                            for i in 0..area {
                                dx[base + i] = scale
                                    * (n_s * g[base + i] - sd - x_hat[base + i] * sdx);
                            }
                        }
                    }
                } else {
                    for b in 0..batch {
                        for c in 0..ch {
                            let scale = gamma_d[c] * inv_std[c];
                            let base = (b * ch + c) * area;
                            for i in 0..area {
                                dx[base + i] = scale * g[base + i];
                            }
                        }
                    }
                }
                drop(gamma_d);
                parents[0].accumulate_grad(&dx);
            }
            if parents[1].requires_grad() {
                parents[1].accumulate_grad(&sum_dy_xhat);
            }
            if parents[2].requires_grad() {
                parents[2].accumulate_grad(&sum_dy);
            }
        }),
    )
}

/// Root-mean-square normalization over the trailing dim:
/// `out = x / sqrt(mean(x^2) + eps) * gain` with `gain` of length `D`.
pub fn rmsnorm<S: Scalar>(x: &Tensor<S>, gain: &Tensor<S>, eps: f64) -> Tensor<S> {
    assert!(x.rank() >= 1, "rmsnorm: input must have at least one dim");
    let d = *x.shape().last().unwrap();
    assert!(d >= 1, "rmsnorm: trailing dim must be non-empty");
    assert_eq!(gain.shape(), &[d], "rmsnorm: gain length");
    let rows = x.len() / d;
    let eps_s = S::from_f64(eps);
    let inv_d = S::from_f64(1.0 / d as f64);

    let xd = x.data();
    let gd = gain.data();
    let mut out = vec![S::zero(); xd.len()];
    let mut inv_r = vec![S::zero(); rows];
    for row in 0..rows {
        let xs = &xd[row * d..(row + 1) * d];
        let mut acc = S::zero();
        for &v in xs {
            acc = acc + v * v;
        }
        let r = (acc * inv_d + eps_s).sqrt();
        let ir = S::one() / r;
        inv_r[row] = ir;
        let os = &mut out[row * d..(row + 1) * d];
        for ((o, &xv), &gv) in os.iter_mut().zip(xs).zip(gd.iter()) {
            *o = xv * ir * gv;
        }
    }
    drop(xd);
    drop(gd);

    let shape = x.shape().to_vec();
    Tensor::from_op(
        shape,
        out,
        vec![x.clone(), gain.clone()],
        Box::new(move |g, parents| {
            let xd = parents[0].data();
            if parents[0].requires_grad() {
                let gaind = parents[1].data();
                let mut dx = vec![S::zero(); xd.len()];
                for row in 0..rows {
                    let xs = &xd[row * d..(row + 1) * d];
                    let gs = &g[row * d..(row + 1) * d];
                    let ir = inv_r[row];
                    // s = sum_i dy_i * gain_i * x_i
                    let mut s = S::zero();
                    for i in 0..d {
                        s = s + gs[i] * gaind[i] * xs[i];
                    }
                    let coef = s * inv_d * ir * ir * ir;
                    let ds = &mut dx[row * d..(row + 1) * d];
                    for i in 0..d {
                        ds[i] = gs[i] * gaind[i] * ir - xs[i] * coef;
                    }
                }
                drop(gaind);
                parents[0].accumulate_grad(&dx);
            }
            if parents[1].requires_grad() {
                let mut dg = vec![S::zero(); d];
                for row in 0..rows {
                    let xs = &xd[row * d..(row + 1) * d];
                    let gs = &g[row * d..(row + 1) * d];
                    let ir = inv_r[row];
                    for i in 0..d {
                        dg[i] = dg[i] + gs[i] * xs[i] * ir;
                    }
                }
                parents[1].accumulate_grad(&dg);
            }
            drop(xd);
        }),
    )
}
