//! Gromov-Wasserstein scoring of vision encoders against a language model's
//! text embeddings, with the RSA, CCA and mutual nearest neighbour
//! baselines, encoder ranking, and synthetic checks of the Lipschitz bound.

pub mod baselines;
pub mod embed_io;
pub mod error;
pub mod exec;
pub mod gw;
pub mod linear_ot;
pub mod mmspace;
pub mod report;
pub mod rng;
pub mod selection;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
