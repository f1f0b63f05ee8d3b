use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Sum of every element, as a rank-0 scalar tensor.
pub fn sum_all<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let xd = x.data();
    let mut acc = S::zero();
    for &v in xd.iter() {
        acc = acc + v;
    }
    drop(xd);
    let n = x.len();
    Tensor::from_op(
        vec![],
        vec![acc],
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                parents[0].accumulate_grad(&vec![g[0]; n]);
            }
        }),
    )
}

/// Mean of every element, as a rank-0 scalar tensor.
pub fn mean_all<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let n = x.len();
    assert!(n > 0, "mean_all: empty tensor");
    let inv = S::from_f64(1.0 / n as f64);
    let xd = x.data();
    let mut acc = S::zero();
    for &v in xd.iter() {
        acc = acc + v;
    }
    drop(xd);
    Tensor::from_op(
        vec![],
        vec![acc * inv],
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                parents[0].accumulate_grad(&vec![g[0] * inv; n]);
            }
        }),
    )
}

/// Mean over every dim except the first: `(B, …) -> (B)`.
pub fn mean_trailing<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    assert!(x.rank() >= 2, "mean_trailing: input must have at least 2 dims");
    let b = x.shape()[0];
    let block = x.len() / b;
    assert!(block > 0, "mean_trailing: empty trailing block");
    let inv = S::from_f64(1.0 / block as f64);

    let xd = x.data();
    let mut out = vec![S::zero(); b];
    for (o, chunk) in out.iter_mut().zip(xd.chunks(block)) {
        let mut acc = S::zero();
        for &v in chunk {
            acc = acc + v;
        }
        *o = acc * inv;
    }
    drop(xd);

    Tensor::from_op(
        vec![b],
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let mut dx = vec![S::zero(); b * block];
                for (i, chunk) in dx.chunks_mut(block).enumerate() {
                    let gv = g[i] * inv;
                    for d in chunk {
                        *d = gv;
                    }
                }
                parents[0].accumulate_grad(&dx);
            }
        }),
    )
}
