pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod losses;
pub mod memory;
pub mod models;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod stream;
pub mod trainers;

pub use error::{Error, Result};
