pub mod atmosphere;
pub mod cli;
pub mod conic;
pub mod dynamics;
pub mod error;
pub mod ibr;
pub mod scenario;
pub mod scp;
pub mod simulation;
pub mod transcription;

pub use error::{Error, Result};
