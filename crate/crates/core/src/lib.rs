//! Analysis and control of discrete 2D singular (descriptor) Roesser systems.
//!
//! The crate covers the whole pipeline: model construction and validation,
//! the characteristic polynomial and admissibility scan, LMI stability and
//! feedback conditions with a built-in feasibility engine, gain recovery with
//! independent verification, and grid simulation by pointwise elimination of
//! algebraic states.

pub mod admissibility;
pub mod charpoly;
pub mod error;
pub mod heat;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod sdp;
pub mod simulate;
pub mod synthesis;

pub use error::{Error, Result};
pub use model::{ClosedLoop, FeedbackMode, PartitionDims, Roesser2D};
