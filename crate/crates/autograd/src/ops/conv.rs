use crate::ops::linalg::{matmul_raw, transpose_raw};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Output extent of one spatial axis: `(in + 2*pad - kernel) / stride + 1`.
/// Panics unless the division is exact, so shape mismatches are caught at the
/// op boundary instead of silently truncating.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    assert!(stride > 0, "conv2d: stride must be positive");
    assert!(kernel > 0, "conv2d: kernel must be positive");
    let padded = input + 2 * pad;
    assert!(
        padded >= kernel,
        "conv2d: kernel {kernel} larger than padded input {padded}"
    );
    let span = padded - kernel;
    assert!(
        span % stride == 0,
        "conv2d: input {input} with kernel {kernel}, stride {stride}, pad {pad} \
         does not tile evenly"
    );
    span / stride + 1
}

/// Lay out every receptive field of one image as a column:
/// `cols[(c*kh*kw + ky*kw + kx)][oy*ow + ox]`.
#[allow(clippy::too_many_arguments)]
fn im2col<S: Scalar>(
    img: &[S],
    ch: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<S> {
    let rows = ch * kh * kw;
    let mut cols = vec![S::zero(); rows * oh * ow];
    for c in 0..ch {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (c * kh + ky) * kw + kx;
                let dst = &mut cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        dst[oy * ow + ox] = img[(c * h + iy as usize) * w + ix as usize];
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add of a column matrix back onto an image; the adjoint of `im2col`.
#[allow(clippy::too_many_arguments)]
fn col2im_add<S: Scalar>(
    cols: &[S],
    img: &mut [S],
    ch: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    for c in 0..ch {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (c * kh + ky) * kw + kx;
                let src = &cols[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let idx = (c * h + iy as usize) * w + ix as usize;
                        img[idx] = img[idx] + src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

/// 2-D cross-correlation with bias.
///
/// * `x` — `(batch, in_ch, h, w)`
/// * `w` — `(out_ch, in_ch, kh, kw)`
/// * `b` — `(out_ch)`
///
/// Returns `(batch, out_ch, oh, ow)` where both spatial extents must tile
/// evenly (see [`conv_out_extent`]).
pub fn conv2d<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: &Tensor<S>,
    stride: usize,
    pad: usize,
) -> Tensor<S> {
    assert_eq!(x.rank(), 4, "conv2d: input must be rank 4");
    assert_eq!(w.rank(), 4, "conv2d: weight must be rank 4");
    let (batch, in_ch, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (out_ch, in_ch2, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    assert_eq!(in_ch, in_ch2, "conv2d: channel dims {in_ch} vs {in_ch2}");
    assert_eq!(b.shape(), &[out_ch], "conv2d: bias shape");
    let oh = conv_out_extent(h, kh, stride, pad);
    let ow = conv_out_extent(wd, kw, stride, pad);

    let rows = in_ch * kh * kw;
    let xd = x.data();
    let wdat = w.data();
    let bd = b.data();
    let mut out = vec![S::zero(); batch * out_ch * oh * ow];
    for n in 0..batch {
        let img = &xd[n * in_ch * h * wd..(n + 1) * in_ch * h * wd];
        let cols = im2col(img, in_ch, h, wd, kh, kw, stride, pad, oh, ow);
        // (out_ch, rows) x (rows, oh*ow) -> (out_ch, oh*ow)
        let prod = matmul_raw(&wdat, &cols, out_ch, rows, oh * ow);
        let dst = &mut out[n * out_ch * oh * ow..(n + 1) * out_ch * oh * ow];
        for oc in 0..out_ch {
            let bias = bd[oc];
            let drow = &mut dst[oc * oh * ow..(oc + 1) * oh * ow];
            let prow = &prod[oc * oh * ow..(oc + 1) * oh * ow];
            for (d, &p) in drow.iter_mut().zip(prow) {
                *d = p + bias;
            }
        }
    }
    drop(xd);
    drop(wdat);
    drop(bd);

    Tensor::from_op(
        vec![batch, out_ch, oh, ow],
        out,
        vec![x.clone(), w.clone(), b.clone()],
        Box::new(move |g, parents| {
            let need_dx = parents[0].requires_grad();
            let need_dw = parents[1].requires_grad();
            let need_db = parents[2].requires_grad();
            let mut dx = if need_dx {
                vec![S::zero(); batch * in_ch * h * wd]
            } else {
                Vec::new()
            };
            let mut dw = if need_dw {
                vec![S::zero(); out_ch * rows]
            } else {
                Vec::new()
            };
            let mut db = if need_db {
                vec![S::zero(); out_ch]
            } else {
                Vec::new()
            };
            let wdat = parents[1].data();
            let wt = if need_dx {
                transpose_raw(&wdat, out_ch, rows)
            } else {
                Vec::new()
            };
            drop(wdat);
            let xd = parents[0].data();
            for n in 0..batch {
                let gimg = &g[n * out_ch * oh * ow..(n + 1) * out_ch * oh * ow];
                if need_db {
                    for oc in 0..out_ch {
                        let mut acc = S::zero();
                        for &gv in &gimg[oc * oh * ow..(oc + 1) * oh * ow] {
                            acc = acc + gv;
                        }
                        db[oc] = db[oc] + acc;
                    }
                }
                if need_dw || need_dx {
                    if need_dw {
                        let img = &xd[n * in_ch * h * wd..(n + 1) * in_ch * h * wd];
                        let cols = im2col(img, in_ch, h, wd, kh, kw, stride, pad, oh, ow);
                        // dW += dY (out_ch, ohw) x cols^T (ohw, rows)
                        let ct = transpose_raw(&cols, rows, oh * ow);
                        let dwn = matmul_raw(gimg, &ct, out_ch, oh * ow, rows);
                        for (d, v) in dw.iter_mut().zip(dwn) {
                            *d = *d + v;
                        }
                    }
                    if need_dx {
                        // dCols = W^T (rows, out_ch) x dY (out_ch, ohw)
                        let dcols = matmul_raw(&wt, gimg, rows, out_ch, oh * ow);
                        let dimg = &mut dx[n * in_ch * h * wd..(n + 1) * in_ch * h * wd];
                        col2im_add(&dcols, dimg, in_ch, h, wd, kh, kw, stride, pad, oh, ow);
                    }
                }
            }
            drop(xd);
            if need_dx {
                parents[0].accumulate_grad(&dx);
            }
            if need_dw {
                parents[1].accumulate_grad(&dw);
            }
            if need_db {
                parents[2].accumulate_grad(&db);
            }
        }),
    )
}
