mod binio;
pub mod cli;
pub mod dtcwt;
pub mod error;
pub mod fusion;
pub mod nn;
pub mod pso;
pub mod signal;
pub mod tfa;

pub use error::{Error, Result};
