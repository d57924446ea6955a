pub mod bench;
pub mod error;
pub mod generator;
pub mod io;
pub mod metrics;
pub mod networks;
pub mod scenario;

pub use error::{HarnessError, Result};
