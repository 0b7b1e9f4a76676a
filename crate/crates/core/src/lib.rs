//! Simulation library for oblivious quantum computing primitives and the
//! distributed black-box protocols built on them.

pub mod error;
pub mod algorithms;
pub mod distributed;
pub mod estimate;
pub mod oblivious;
pub mod qmath;
pub mod states;
pub mod scenario;
pub mod superchannel;
pub use error::{QError, Result};
pub use qmath::{ComplexMatrix, RegisterLayout, C64};
