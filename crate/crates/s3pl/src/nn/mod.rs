//! The handful of tensor operations the attention-mask autoencoder needs,
//! with hand-written reverse-mode derivatives, and the Adam optimizer.

mod adam;
mod tensor;

pub use adam::AdamState;
pub use tensor::{
    conv3d_collapse, conv3d_collapse_backward, hadamard, mse, sigmoid, sigmoid_scalar,
    tconv3d_expand, tconv3d_expand_backward, ConvKernel, KernelGrad, Tensor3,
};
