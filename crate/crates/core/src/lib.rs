pub mod error;
pub mod dp;
pub mod exec;
pub mod hmm;
pub mod io;
pub mod mcmc;
pub mod sampling;
pub mod summary;
pub mod synth;

pub use error::{Error, Result};
