//! Reference implementations used only to check the solver crates.
//!
//! Nothing here calls into `seco-core`: each oracle is a separate
//! transcription of the underlying math, written for clarity rather than
//! speed, so agreement between the two is meaningful.

pub mod dynamics;
pub mod fd;
pub mod grid;
pub mod lq;
pub mod lti;
pub mod qp;
