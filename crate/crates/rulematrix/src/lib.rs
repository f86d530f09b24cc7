//! IO, external oracles, HTTP service and CLI around `rulematrix-core`.

pub mod error;
pub mod experiments;
pub mod external;
pub mod io;
pub mod service;
pub mod teacher;

pub use error::{Error, Result};
pub use rulematrix_core as core;
