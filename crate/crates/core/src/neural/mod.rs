//! Dense networks without an external ML framework: batched forward and
//! reverse-mode passes, Adam, finite-difference gradient checks, a Gaussian
//! VAE, training loops and the weight file format.

mod adam;
mod gradcheck;
mod io;
mod mlp;
mod train;
mod vae;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, max_relative_error, mse_loss, numeric_gradient};
pub use io::{
    decode_mlp, decode_vae, encode_mlp, encode_vae, load_mlp, load_vae, save_mlp, save_vae,
    MLP_MAGIC, VAE_MAGIC,
};
pub(crate) use mlp::dense_forward;
pub use mlp::{Activation, BatchCache, Gradients, Mlp};
pub use train::{train_regressor, train_vae, MlpConfig, TrainConfig, TrainHistory, VaeConfig};
pub use vae::{kl_gauss, vae_elbo, ElboGradients, ElboLoss, Vae};
