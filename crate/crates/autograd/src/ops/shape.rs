use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Reinterpret `x` with a new shape of the same total length. Data is copied;
/// the gradient flows back with the original shape.
pub fn reshape<S: Scalar>(x: &Tensor<S>, new_shape: Vec<usize>) -> Tensor<S> {
    let new_len: usize = new_shape.iter().product();
    assert_eq!(
        x.len(),
        new_len,
        "reshape: cannot view {:?} as {:?}",
        x.shape(),
        new_shape
    );
    let out = x.to_vec();
    Tensor::from_op(
        new_shape,
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                parents[0].accumulate_grad(g);
            }
        }),
    )
}

/// Concatenate two tensors along their trailing dim; all leading dims must
/// match. `(…, Da) ++ (…, Db) -> (…, Da + Db)`.
pub fn concat_last<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    assert_eq!(a.rank(), b.rank(), "concat_last: rank mismatch");
    assert!(a.rank() >= 1, "concat_last: inputs must have at least one dim");
    let lead = &a.shape()[..a.rank() - 1];
    assert_eq!(
        lead,
        &b.shape()[..b.rank() - 1],
        "concat_last: leading dims differ"
    );
    let da = *a.shape().last().unwrap();
    let db = *b.shape().last().unwrap();
    let rows: usize = lead.iter().product();
    let d_out = da + db;

    let ad = a.data();
    let bd = b.data();
    let mut out = vec![S::zero(); rows * d_out];
    for r in 0..rows {
        out[r * d_out..r * d_out + da].copy_from_slice(&ad[r * da..(r + 1) * da]);
        out[r * d_out + da..(r + 1) * d_out].copy_from_slice(&bd[r * db..(r + 1) * db]);
    }
    drop(ad);
    drop(bd);

    let mut shape = lead.to_vec();
    shape.push(d_out);
    Tensor::from_op(
        shape,
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let mut da_grad = vec![S::zero(); rows * da];
                for r in 0..rows {
                    da_grad[r * da..(r + 1) * da]
                        .copy_from_slice(&g[r * d_out..r * d_out + da]);
                }
                parents[0].accumulate_grad(&da_grad);
            }
            if parents[1].requires_grad() {
                let mut db_grad = vec![S::zero(); rows * db];
                for r in 0..rows {
                    db_grad[r * db..(r + 1) * db]
                        .copy_from_slice(&g[r * d_out + da..(r + 1) * d_out]);
                }
                parents[1].accumulate_grad(&db_grad);
            }
        }),
    )
}

/// Slice one timestep out of a `(batch, time, features)` sequence -> `(batch,
/// features)`.
pub fn select_time<S: Scalar>(x: &Tensor<S>, t: usize) -> Tensor<S> {
    assert_eq!(x.rank(), 3, "select_time: input must be rank 3");
    let (batch, time, feat) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    assert!(t < time, "select_time: t {t} out of range {time}");

    let xd = x.data();
    let mut out = vec![S::zero(); batch * feat];
    for b in 0..batch {
        out[b * feat..(b + 1) * feat]
            .copy_from_slice(&xd[(b * time + t) * feat..(b * time + t + 1) * feat]);
    }
    drop(xd);

    Tensor::from_op(
        vec![batch, feat],
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let mut dx = vec![S::zero(); batch * time * feat];
                for b in 0..batch {
                    dx[(b * time + t) * feat..(b * time + t + 1) * feat]
                        .copy_from_slice(&g[b * feat..(b + 1) * feat]);
                }
                parents[0].accumulate_grad(&dx);
            }
        }),
    )
}

/// Stack `time` per-step tensors of shape `(batch, features)` into a
/// `(batch, time, features)` sequence.
pub fn stack_time<S: Scalar>(steps: &[Tensor<S>]) -> Tensor<S> {
    assert!(!steps.is_empty(), "stack_time: need at least one step");
    let (batch, feat) = (steps[0].shape()[0], steps[0].shape()[1]);
    for s in steps {
        assert_eq!(s.shape(), &[batch, feat], "stack_time: step shape mismatch");
    }
    let time = steps.len();

    let mut out = vec![S::zero(); batch * time * feat];
    for (t, s) in steps.iter().enumerate() {
        let sd = s.data();
        for b in 0..batch {
            out[(b * time + t) * feat..(b * time + t + 1) * feat]
                .copy_from_slice(&sd[b * feat..(b + 1) * feat]);
        }
    }

    Tensor::from_op(
        vec![batch, time, feat],
        out,
        steps.to_vec(),
        Box::new(move |g, parents| {
            for (t, p) in parents.iter().enumerate() {
                if !p.requires_grad() {
                    continue;
                }
                let mut ds = vec![S::zero(); batch * feat];
                for b in 0..batch {
                    ds[b * feat..(b + 1) * feat]
                        .copy_from_slice(&g[(b * time + t) * feat..(b * time + t + 1) * feat]);
                }
                p.accumulate_grad(&ds);
            }
        }),
    )
}
