//! Space-time transformation analysis of tensor algebra, spatial
//! accelerator generation, cycle-accurate simulation and design-space
//! exploration.

pub mod algebra;
pub mod arch;
pub mod config;
pub mod dataflow;
pub mod dse;
pub mod error;
pub mod linalg;
pub mod sim;
pub mod stt;
pub mod tensor;
pub mod tiling;

pub use error::{Error, FaultKind, Result};
