//! Dense network engine: forward, exact backpropagation, AdamW, and
//! bit-exact parameter checkpoints.

pub mod adamw;
pub mod checkpoint;
pub mod matrix;
pub mod mlp;

pub use adamw::{AdamWConfig, AdamWState, MaskLayer, UpdateMask};
pub use checkpoint::{load_params, save_params};
pub use matrix::Matrix;
pub use mlp::{ForwardCache, GradientBuffer, Layer, LayerGrad, Mlp};
