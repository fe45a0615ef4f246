//! Layer kernels used by the texture CNN.
//!
//! Every layer is a free function returning its output together with a cache;
//! the matching `*_backward` consumes that cache exactly once. There is no
//! computation graph: the model wires the calls explicitly.

mod activation;
mod concat;
mod conv;
mod dense;
mod gradcheck;
mod loss;
mod optim;
mod pool;

pub use activation::{relu, relu_backward, ReluCache};
pub use concat::{concat, concat_backward, ConcatCache};
pub use conv::{conv2d, conv2d_backward, conv_output_extent, Conv2dCache, Conv2dGrads};
pub use dense::{dense, dense_backward, DenseCache, DenseGrads};
pub use gradcheck::{grad_check, relative_error};
pub use loss::{softmax_xent, SoftmaxXent};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use pool::{
    energy_pool, energy_pool_backward, global_max_pool, global_max_pool_backward, maxpool2d,
    maxpool2d_backward, EnergyCache, GlobalMaxCache, MaxPoolCache,
};
