pub mod cli;
pub mod error;
pub mod fisher;
pub mod model;
pub mod noise;
pub mod privacy;
pub mod protocol;
pub mod qcore;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::Tolerances;
