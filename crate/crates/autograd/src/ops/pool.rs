use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Max pooling over `(batch, ch, h, w)` with floor semantics: output extents
/// are `(extent - k) / stride + 1`, so trailing rows/columns that do not fill
/// a window are dropped. Ties within a window resolve to the first element in
/// row-major scan order, and the full upstream gradient is routed to that
/// single element.
pub fn maxpool2d<S: Scalar>(x: &Tensor<S>, k: usize, stride: usize) -> Tensor<S> {
    assert_eq!(x.rank(), 4, "maxpool2d: input must be rank 4");
    assert!(k > 0 && stride > 0, "maxpool2d: k and stride must be positive");
    let (batch, ch, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    assert!(h >= k, "maxpool2d: height {h} smaller than window {k}");
    assert!(w >= k, "maxpool2d: width {w} smaller than window {k}");
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;

    let xd = x.data();
    let mut out = vec![S::zero(); batch * ch * oh * ow];
    let mut argmax = vec![0usize; batch * ch * oh * ow];
    for bc in 0..batch * ch {
        let img = &xd[bc * h * w..(bc + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = img[(oy * stride) * w + ox * stride];
                let mut best_idx = (oy * stride) * w + ox * stride;
                for ky in 0..k {
                    for kx in 0..k {
                        if ky == 0 && kx == 0 {
                            continue;
                        }
                        let idx = (oy * stride + ky) * w + ox * stride + kx;
                        if img[idx] > best {
                            best = img[idx];
                            best_idx = idx;
                        }
                    }
                }
                out[bc * oh * ow + oy * ow + ox] = best;
                argmax[bc * oh * ow + oy * ow + ox] = bc * h * w + best_idx;
            }
        }
    }
    drop(xd);

    let in_len = batch * ch * h * w;
    Tensor::from_op(
        vec![batch, ch, oh, ow],
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let mut dx = vec![S::zero(); in_len];
                for (&src, &gv) in argmax.iter().zip(g.iter()) {
                    dx[src] = dx[src] + gv;
                }
                parents[0].accumulate_grad(&dx);
            }
        }),
    )
}

/// Mean over the spatial dims: `(batch, ch, h, w) -> (batch, ch)`.
pub fn global_avg_pool<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    assert_eq!(x.rank(), 4, "global_avg_pool: input must be rank 4");
    let (batch, ch, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let area = h * w;
    assert!(area > 0, "global_avg_pool: empty spatial extent");
    let inv = S::from_f64(1.0 / area as f64);

    let xd = x.data();
    let mut out = vec![S::zero(); batch * ch];
    for bc in 0..batch * ch {
        let mut acc = S::zero();
        for &v in &xd[bc * area..(bc + 1) * area] {
            acc = acc + v;
        }
        out[bc] = acc * inv;
    }
    drop(xd);

    Tensor::from_op(
        vec![batch, ch],
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let mut dx = vec![S::zero(); batch * ch * area];
                for bc in 0..batch * ch {
                    let gv = g[bc] * inv;
                    for d in &mut dx[bc * area..(bc + 1) * area] {
                        *d = gv;
                    }
                }
                parents[0].accumulate_grad(&dx);
            }
        }),
    )
}
