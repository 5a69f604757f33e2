//! Stance nowcasting with temporal convolution kernels over text and
//! retweet-network representations, combined by multiple kernel learning.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod distant;
pub mod error;
pub mod graph;
pub mod harness;
pub mod kernels;
pub mod lp;
pub mod mckl;
pub mod svm;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
