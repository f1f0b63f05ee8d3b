use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `c[m][n] = sum_k a[m][k] * b[k][n]`, accumulated in ikj order so the inner
/// loop runs over contiguous rows of `b` and `c`.
pub(crate) fn matmul_raw<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == S::zero() {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv = *cv + av * bv;
            }
        }
    }
    c
}

/// Transpose of a row-major `(r, c)` matrix.
pub(crate) fn transpose_raw<S: Scalar>(a: &[S], r: usize, c: usize) -> Vec<S> {
    let mut out = vec![S::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

/// Matrix product of two rank-2 tensors.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_eq!(a.rank(), 2, "matmul: lhs must be rank 2");
    assert_eq!(b.rank(), 2, "matmul: rhs must be rank 2");
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    assert_eq!(k, k2, "matmul: inner dimensions {k} vs {k2}");
    let out = matmul_raw(&a.data(), &b.data(), m, k, n);
    Tensor::from_op(
        vec![m, n],
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |g, parents| {
            // dA = dC · B^T, dB = A^T · dC
            if parents[0].requires_grad() {
                let bd = parents[1].data();
                let bt = transpose_raw(&bd, k, n);
                drop(bd);
                let da = matmul_raw(g, &bt, m, n, k);
                parents[0].accumulate_grad(&da);
            }
            if parents[1].requires_grad() {
                let ad = parents[0].data();
                let at = transpose_raw(&ad, m, k);
                drop(ad);
                let db = matmul_raw(&at, g, k, m, n);
                parents[1].accumulate_grad(&db);
            }
        }),
    )
}

/// Fully connected layer: `y = x · w^T + b` with `x (n, f_in)`,
/// `w (f_out, f_in)`, `b (f_out)`.
pub fn linear<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_eq!(x.rank(), 2, "linear: input must be rank 2");
    assert_eq!(w.rank(), 2, "linear: weight must be rank 2");
    let (n, f_in) = (x.shape()[0], x.shape()[1]);
    let (f_out, f_in2) = (w.shape()[0], w.shape()[1]);
    assert_eq!(f_in, f_in2, "linear: feature dims {f_in} vs {f_in2}");
    assert_eq!(b.shape(), &[f_out], "linear: bias shape");

    let xd = x.data();
    let wd = w.data();
    let wt = transpose_raw(&wd, f_out, f_in);
    drop(wd);
    let mut out = matmul_raw(&xd, &wt, n, f_in, f_out);
    drop(xd);
    let bd = b.data();
    for row in out.chunks_mut(f_out) {
        for (v, &bv) in row.iter_mut().zip(bd.iter()) {
            *v = *v + bv;
        }
    }
    drop(bd);

    Tensor::from_op(
        vec![n, f_out],
        out,
        vec![x.clone(), w.clone(), b.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                // dX = dY · W
                let wd = parents[1].data();
                let dx = matmul_raw(g, &wd, n, f_out, f_in);
                drop(wd);
                parents[0].accumulate_grad(&dx);
            }
            if parents[1].requires_grad() {
                // dW = dY^T · X
                let gt = transpose_raw(g, n, f_out);
                let xd = parents[0].data();
                let dw = matmul_raw(&gt, &xd, f_out, n, f_in);
                drop(xd);
                parents[1].accumulate_grad(&dw);
            }
            if parents[2].requires_grad() {
                let mut db = vec![S::zero(); f_out];
                for row in g.chunks(f_out) {
                    for (d, &gv) in db.iter_mut().zip(row) {
                        *d = *d + gv;
                    }
                }
                parents[2].accumulate_grad(&db);
            }
        }),
    )
}

/// `out[b][i][j] = a[b][i] * m[i][j]` — a batch of row vectors scaled
/// against a shared matrix.
pub fn mul_vec_mat<S: Scalar>(a: &Tensor<S>, m: &Tensor<S>) -> Tensor<S> {
    assert_eq!(a.rank(), 2, "mul_vec_mat: lhs must be rank 2");
    assert_eq!(m.rank(), 2, "mul_vec_mat: rhs must be rank 2");
    let (bsz, i_dim) = (a.shape()[0], a.shape()[1]);
    let (i2, j_dim) = (m.shape()[0], m.shape()[1]);
    assert_eq!(i_dim, i2, "mul_vec_mat: shared dim {i_dim} vs {i2}");

    let ad = a.data();
    let md = m.data();
    let mut out = vec![S::zero(); bsz * i_dim * j_dim];
    for b in 0..bsz {
        for i in 0..i_dim {
            let av = ad[b * i_dim + i];
            let dst = &mut out[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
            let src = &md[i * j_dim..(i + 1) * j_dim];
            for (o, &mv) in dst.iter_mut().zip(src) {
                *o = av * mv;
            }
        }
    }
    drop(ad);
    drop(md);

    Tensor::from_op(
        vec![bsz, i_dim, j_dim],
        out,
        vec![a.clone(), m.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let md = parents[1].data();
                let mut da = vec![S::zero(); bsz * i_dim];
                for b in 0..bsz {
                    for i in 0..i_dim {
                        let mut acc = S::zero();
                        let grow = &g[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
                        let mrow = &md[i * j_dim..(i + 1) * j_dim];
                        for (&gv, &mv) in grow.iter().zip(mrow) {
                            acc = acc + gv * mv;
                        }
                        da[b * i_dim + i] = acc;
                    }
                }
                drop(md);
                parents[0].accumulate_grad(&da);
            }
            if parents[1].requires_grad() {
                let ad = parents[0].data();
                let mut dm = vec![S::zero(); i_dim * j_dim];
                for b in 0..bsz {
                    for i in 0..i_dim {
                        let av = ad[b * i_dim + i];
                        let grow = &g[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
                        let drow = &mut dm[i * j_dim..(i + 1) * j_dim];
                        for (d, &gv) in drow.iter_mut().zip(grow) {
                            *d = *d + av * gv;
                        }
                    }
                }
                drop(ad);
                parents[1].accumulate_grad(&dm);
            }
        }),
    )
}

/// Batched outer product: `out[b][i][j] = a[b][i] * c[b][j]`.
pub fn batch_outer<S: Scalar>(a: &Tensor<S>, c: &Tensor<S>) -> Tensor<S> {
    assert_eq!(a.rank(), 2, "batch_outer: lhs must be rank 2");
    assert_eq!(c.rank(), 2, "batch_outer: rhs must be rank 2");
    let (bsz, i_dim) = (a.shape()[0], a.shape()[1]);
    let (b2, j_dim) = (c.shape()[0], c.shape()[1]);
    assert_eq!(bsz, b2, "batch_outer: batch dims {bsz} vs {b2}");

    let ad = a.data();
    let cd = c.data();
    let mut out = vec![S::zero(); bsz * i_dim * j_dim];
    for b in 0..bsz {
        for i in 0..i_dim {
            let av = ad[b * i_dim + i];
            let dst = &mut out[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
            let src = &cd[b * j_dim..(b + 1) * j_dim];
            for (o, &cv) in dst.iter_mut().zip(src) {
                *o = av * cv;
            }
        }
    }
    drop(ad);
    drop(cd);

    Tensor::from_op(
        vec![bsz, i_dim, j_dim],
        out,
        vec![a.clone(), c.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let cd = parents[1].data();
                let mut da = vec![S::zero(); bsz * i_dim];
                for b in 0..bsz {
                    let crow = &cd[b * j_dim..(b + 1) * j_dim];
                    for i in 0..i_dim {
                        let grow = &g[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
                        let mut acc = S::zero();
                        for (&gv, &cv) in grow.iter().zip(crow) {
                            acc = acc + gv * cv;
                        }
                        da[b * i_dim + i] = acc;
                    }
                }
                drop(cd);
                parents[0].accumulate_grad(&da);
            }
            if parents[1].requires_grad() {
                let ad = parents[0].data();
                let mut dc = vec![S::zero(); bsz * j_dim];
                for b in 0..bsz {
                    let drow = &mut dc[b * j_dim..(b + 1) * j_dim];
                    for i in 0..i_dim {
                        let av = ad[b * i_dim + i];
                        let grow = &g[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
                        for (d, &gv) in drow.iter_mut().zip(grow) {
                            *d = *d + av * gv;
                        }
                    }
                }
                drop(ad);
                parents[1].accumulate_grad(&dc);
            }
        }),
    )
}

/// Batched matrix-vector contraction over the trailing dim:
/// `out[b][i] = sum_j s[b][i][j] * c[b][j]`.
pub fn batch_matvec<S: Scalar>(s: &Tensor<S>, c: &Tensor<S>) -> Tensor<S> {
    assert_eq!(s.rank(), 3, "batch_matvec: lhs must be rank 3");
    assert_eq!(c.rank(), 2, "batch_matvec: rhs must be rank 2");
    let (bsz, i_dim, j_dim) = (s.shape()[0], s.shape()[1], s.shape()[2]);
    assert_eq!(c.shape(), &[bsz, j_dim], "batch_matvec: rhs shape");

    let sd = s.data();
    let cd = c.data();
    let mut out = vec![S::zero(); bsz * i_dim];
    for b in 0..bsz {
        let crow = &cd[b * j_dim..(b + 1) * j_dim];
        for i in 0..i_dim {
            let srow = &sd[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
            let mut acc = S::zero();
            for (&sv, &cv) in srow.iter().zip(crow) {
                acc = acc + sv * cv;
            }
            out[b * i_dim + i] = acc;
        }
    }
    drop(sd);
    drop(cd);

    Tensor::from_op(
        vec![bsz, i_dim],
        out,
        vec![s.clone(), c.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let cd = parents[1].data();
                let mut ds = vec![S::zero(); bsz * i_dim * j_dim];
                for b in 0..bsz {
                    let crow = &cd[b * j_dim..(b + 1) * j_dim];
                    for i in 0..i_dim {
                        let gv = g[b * i_dim + i];
                        let drow = &mut ds[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
                        for (d, &cv) in drow.iter_mut().zip(crow) {
                            *d = gv * cv;
                        }
                    }
                }
                drop(cd);
                parents[0].accumulate_grad(&ds);
            }
            if parents[1].requires_grad() {
                let sd = parents[0].data();
                let mut dc = vec![S::zero(); bsz * j_dim];
                for b in 0..bsz {
                    let drow = &mut dc[b * j_dim..(b + 1) * j_dim];
                    for i in 0..i_dim {
                        let gv = g[b * i_dim + i];
                        let srow = &sd[(b * i_dim + i) * j_dim..(b * i_dim + i + 1) * j_dim];
                        for (d, &sv) in drow.iter_mut().zip(srow) {
                            *d = *d + gv * sv;
                        }
                    }
                }
                drop(sd);
                parents[1].accumulate_grad(&dc);
            }
        }),
    )
}

/// Broadcast multiply of every row of `x (n, d)` by a shared vector `v (d)`.
pub fn mul_row<S: Scalar>(x: &Tensor<S>, v: &Tensor<S>) -> Tensor<S> {
    assert_eq!(x.rank(), 2, "mul_row: input must be rank 2");
    assert_eq!(v.rank(), 1, "mul_row: vector must be rank 1");
    let (n, d) = (x.shape()[0], x.shape()[1]);
    assert_eq!(v.shape(), &[d], "mul_row: vector length");

    let xd = x.data();
    let vd = v.data();
    let mut out = vec![S::zero(); n * d];
    for (orow, xrow) in out.chunks_mut(d).zip(xd.chunks(d)) {
        for ((o, &xv), &vv) in orow.iter_mut().zip(xrow).zip(vd.iter()) {
            *o = xv * vv;
        }
    }
    drop(xd);
    drop(vd);

    Tensor::from_op(
        vec![n, d],
        out,
        vec![x.clone(), v.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let vd = parents[1].data();
                let mut dx = vec![S::zero(); n * d];
                for (drow, grow) in dx.chunks_mut(d).zip(g.chunks(d)) {
                    for ((dv, &gv), &vv) in drow.iter_mut().zip(grow).zip(vd.iter()) {
                        *dv = gv * vv;
                    }
                }
                drop(vd);
                parents[0].accumulate_grad(&dx);
            }
            if parents[1].requires_grad() {
                let xd = parents[0].data();
                let mut dv = vec![S::zero(); d];
                for (grow, xrow) in g.chunks(d).zip(xd.chunks(d)) {
                    for ((dvv, &gv), &xv) in dv.iter_mut().zip(grow).zip(xrow) {
                        *dvv = *dvv + gv * xv;
                    }
                }
                drop(xd);
                parents[1].accumulate_grad(&dv);
            }
        }),
    )
}
