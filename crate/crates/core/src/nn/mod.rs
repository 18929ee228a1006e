//! Feature transformation `f(X_fea, theta)` and its training machinery.

mod adam;
mod gradcheck;
mod loss;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_difference, relative_error};
pub use loss::softmax_cross_entropy;
pub use mlp::{
    dropout_mask, mlp_backward, mlp_forward, mlp_forward_with_ids, ForwardCache, Linear, MlpFile, MlpGrads, MlpParams,
    Mode,
};
