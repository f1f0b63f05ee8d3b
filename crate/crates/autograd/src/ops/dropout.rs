use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::Rng;

/// Channel dropout over a feature sequence `(batch, time, features)`: each
/// (batch element, feature channel) pair is dropped as a unit, so a dropped
/// channel is zero at every timestep. Survivors are scaled by `1 / (1 - rate)`
/// (inverted convention), so eval mode needs no rescale and is the identity.
///
/// `rate = 0` or `training = false` return the input tensor unchanged.
pub fn spatial_dropout<S: Scalar, R: Rng>(
    x: &Tensor<S>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Tensor<S> {
    assert!(
        (0.0..1.0).contains(&rate),
        "spatial_dropout: rate must be in [0, 1), got {rate}"
    );
    assert_eq!(x.rank(), 3, "spatial_dropout: input must be rank 3");
    if !training || rate == 0.0 {
        return x.clone();
    }
    let (batch, time, feat) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let scale = S::from_f64(1.0 / (1.0 - rate));

    // One Bernoulli draw per (batch, feature) channel, in row-major order.
    let mut mask = vec![S::zero(); batch * feat];
    for m in mask.iter_mut() {
        if rng.gen::<f64>() >= rate {
            *m = scale;
        }
    }

    let xd = x.data();
    let mut out = vec![S::zero(); xd.len()];
    for b in 0..batch {
        for t in 0..time {
            let base = (b * time + t) * feat;
            let mrow = &mask[b * feat..(b + 1) * feat];
            for f in 0..feat {
                out[base + f] = xd[base + f] * mrow[f];
            }
        }
    }
    drop(xd);

    Tensor::from_op(
        vec![batch, time, feat],
        out,
        vec![x.clone()],
        Box::new(move |g, parents| {
            if parents[0].requires_grad() {
                let mut dx = vec![S::zero(); batch * time * feat];
                for b in 0..batch {
                    let mrow = &mask[b * feat..(b + 1) * feat];
                    for t in 0..time {
                        let base = (b * time + t) * feat;
                        for f in 0..feat {
                            dx[base + f] = g[base + f] * mrow[f];
                        }
                    }
                }
                parents[0].accumulate_grad(&dx);
            }
        }),
    )
}
