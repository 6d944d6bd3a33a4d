pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod scenario;
pub mod tensor;

pub use error::{Error, Result};
