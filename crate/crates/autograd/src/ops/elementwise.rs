use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn assert_same_shape<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, op: &str) {
    assert_eq!(
        a.shape(),
        b.shape(),
        "{op}: shape mismatch {:?} vs {:?}",
        a.shape(),
        b.shape()
    );
}

pub fn add<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_same_shape(a, b, "add");
    let out: Vec<S> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| x + y).collect();
    Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        Box::new(|g, parents| {
            for p in parents {
                if p.requires_grad() {
                    p.accumulate_grad(g);
                }
            }
        }),
    )
}

pub fn sub<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_same_shape(a, b, "sub");
    let out: Vec<S> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| x - y).collect();
    Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        Box::new(|g, parents| {
            if parents[0].requires_grad() {
                parents[0].accumulate_grad(g);
            }
            if parents[1].requires_grad() {
                let neg: Vec<S> = g.iter().map(|&v| -v).collect();
                parents[1].accumulate_grad(&neg);
            }
        }),
    )
}

pub fn mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_same_shape(a, b, "mul");
    let out: Vec<S> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| x * y).collect();
    Tensor::from_op(
        a.shape().to_vec(),
        out,
        vec![a.clone(), b.clone()],
        Box::new(|g, parents| {
            if parents[0].requires_grad() {
                let bd = parents[1].data();
                let da: Vec<S> = g.iter().zip(bd.iter()).map(|(&gv, &bv)| gv * bv).collect();
                drop(bd);
                parents[0].accumulate_grad(&da);
            }
            if parents[1].requires_grad() {
                let ad = parents[0].data();
                let db: Vec<S> = g.iter().zip(ad.iter()).map(|(&gv, &av)| gv * av).collect();
                drop(ad);
                parents[1].accumulate_grad(&db);
            }
        }),
    )
}

/// Elementwise affine map `a*x + b` with constant `a`, `b`.
pub fn scale_add<S: Scalar>(x: &Tensor<S>, a: S, b: S) -> Tensor<S> {
    let out: Vec<S> = x.data().iter().map(|&v| a * v + b).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            let dx: Vec<S> = g.iter().map(|&v| a * v).collect();
            parents[0].accumulate_grad(&dx);
        }),
    )
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let out: Vec<S> = x
        .data()
        .iter()
        .map(|&v| if v > S::zero() { v } else { S::zero() })
        .collect();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(|g, parents| {
            let xd = parents[0].data();
            let dx: Vec<S> = g
                .iter()
                .zip(xd.iter())
                .map(|(&gv, &xv)| if xv > S::zero() { gv } else { S::zero() })
                .collect();
            drop(xd);
            parents[0].accumulate_grad(&dx);
        }),
    )
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let out: Vec<S> = x.data().iter().map(|&v| v.sigmoid()).collect();
    let saved = out.clone();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            let dx: Vec<S> = g
                .iter()
                .zip(saved.iter())
                .map(|(&gv, &y)| gv * y * (S::one() - y))
                .collect();
            parents[0].accumulate_grad(&dx);
        }),
    )
}

pub fn tanh<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let out: Vec<S> = x.data().iter().map(|&v| v.tanh()).collect();
    let saved = out.clone();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            let dx: Vec<S> = g
                .iter()
                .zip(saved.iter())
                .map(|(&gv, &y)| gv * (S::one() - y * y))
                .collect();
            parents[0].accumulate_grad(&dx);
        }),
    )
}

pub fn exp<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let out: Vec<S> = x.data().iter().map(|&v| v.exp()).collect();
    let saved = out.clone();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            let dx: Vec<S> = g.iter().zip(saved.iter()).map(|(&gv, &y)| gv * y).collect();
            parents[0].accumulate_grad(&dx);
        }),
    )
}

pub fn softplus<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let out: Vec<S> = x.data().iter().map(|&v| v.softplus()).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(|g, parents| {
            let xd = parents[0].data();
            let dx: Vec<S> = g
                .iter()
                .zip(xd.iter())
                .map(|(&gv, &xv)| gv * xv.sigmoid())
                .collect();
            drop(xd);
            parents[0].accumulate_grad(&dx);
        }),
    )
}

pub fn sqrt<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let out: Vec<S> = x.data().iter().map(|&v| v.sqrt()).collect();
    let saved = out.clone();
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            let half = S::from_f64(0.5);
            // The true derivative is unbounded at 0; routing a zero
            // subgradient there keeps losses that bottom out at an exact
            // zero (e.g. a distance between identical points) finite.
            let dx: Vec<S> = g
                .iter()
                .zip(saved.iter())
                .map(|(&gv, &y)| if y > S::zero() { gv * half / y } else { S::zero() })
                .collect();
            parents[0].accumulate_grad(&dx);
        }),
    )
}
