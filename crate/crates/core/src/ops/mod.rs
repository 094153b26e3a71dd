//! Forward and hand-written backward passes for the network building blocks.
//!
//! Forward functions return their output together with whatever the backward
//! pass needs; the stateful layer wrappers in [`crate::net`] keep those caches.

mod conv2d;
mod conv3d;
mod dense;
mod dropout;
mod loss;
mod pool;
mod relu;

pub use conv2d::{conv2d, conv2d_backward, conv2d_output_size, Conv2dCache, Conv2dGrads};
pub use conv3d::{conv3d_depthwise, conv3d_depthwise_backward};
pub use dense::{dense, dense_backward, DenseGrads};
pub use dropout::{dropout, dropout_backward, DropoutMask};
pub use loss::{softmax, softmax_backward, softmax_cross_entropy, softmax_cross_entropy_backward};
pub use pool::{maxpool2d, maxpool2d_backward, MaxPoolCache};
pub use relu::{relu, relu_backward};
