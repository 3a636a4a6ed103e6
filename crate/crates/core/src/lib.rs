//! Exact laws, spectral expansions and simulators for the star-shaped
//! Λ-coalescent and its dual Fleming–Viot jump process, with mutation and
//! frequency-dependent selection.

pub mod base;
pub mod eigen;
pub mod lines;
pub mod multitype;
pub mod selection;
pub mod error;
pub mod twotype;
pub mod verify;

pub use base::{MixedLaw, McEstimate, QuadSpec, RngStream, TwoTypeParams};
pub use error::{Error, Result};
