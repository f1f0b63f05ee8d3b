//! Differentiable operations. Every op builds its output eagerly and, when
//! recording is on and some parent tracks gradients, attaches a backward
//! closure that scatters the upstream gradient to its parents.

mod conv;
mod dropout;
mod elementwise;
mod linalg;
mod norm;
mod pool;
mod reduce;
mod shape;

pub use conv::{conv2d, conv_out_extent};
pub use dropout::spatial_dropout;
pub use elementwise::{
    add, exp, mul, relu, scale_add, sigmoid, softplus, sqrt, sub, tanh,
};
pub use linalg::{batch_matvec, batch_outer, linear, matmul, mul_row, mul_vec_mat};
pub use norm::{batchnorm2d, rmsnorm, RunningStats};
pub use pool::{global_avg_pool, maxpool2d};
pub use reduce::{mean_all, mean_trailing, sum_all};
pub use shape::{concat_last, reshape, select_time, stack_time};
