use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Element type for [`crate::Tensor`].
///
/// The engine runs in either `f64` (gradient checking, bit-exact
/// reproducibility runs) or `f32` (training throughput). All scalar
/// constants travel through `from_f64` so both modes share one code path.
pub trait Scalar:
    num_traits::Float + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Stable sigmoid, used by both the forward ops and their backward closures.
    fn sigmoid(self) -> Self {
        let one = Self::one();
        if self >= Self::zero() {
            one / (one + (-self).exp())
        } else {
            let e = self.exp();
            e / (one + e)
        }
    }
    /// Stable softplus `ln(1 + e^x)`.
    fn softplus(self) -> Self {
        let zero = Self::zero();
        let m = if self > zero { self } else { zero };
        m + (-self.abs()).exp().ln_1p()
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}
