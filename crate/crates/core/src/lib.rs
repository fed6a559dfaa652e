pub mod config;
pub mod domain;
pub mod eval;
pub mod io;
pub mod error;
pub mod lst;
pub mod preprocess;
pub mod synth;
pub mod trca;

pub use error::{Error, Result};
