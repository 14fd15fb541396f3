pub mod bench;
pub mod classify;
pub mod data_io;
pub mod embed;
pub mod error;
pub mod numcore;
pub mod preprocess;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
