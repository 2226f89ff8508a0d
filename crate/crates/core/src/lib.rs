pub mod error;
pub mod ccr;
pub mod cli;
pub mod cqf;
pub mod linalg;
pub mod moments;
pub mod oqho;
pub mod variational;
pub use error::{Error, Result};
