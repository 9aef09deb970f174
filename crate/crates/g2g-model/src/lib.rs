//! Junction-tree encoder-decoder with variational latent codes and
//! adversarial scaffold regularization.

pub mod advreg;
pub mod config;
pub mod encoder;
pub mod features;
pub mod graphdec;
pub mod prep;
pub mod train;
pub mod treedec;
pub mod vjtnn;

pub use config::ModelConfig;
pub use prep::{PreparedMol, PreparedPair, PrepError};
