//! Numeric substrate shared by the model modules.

pub mod dd;
pub mod law;
pub mod mc;
pub mod params;
pub mod path;
pub mod quad;
pub mod rng;
pub mod stats;

pub use law::{Atom, MixedLaw, Piece, ScalarFn, Side};
pub use mc::McEstimate;
pub use params::TwoTypeParams;
pub use path::{PathEvent, PathRecord};
pub use quad::{integrate, quad, QuadResult, QuadSpec};
pub use rng::{sample_truncated_exponential, RngStream};
pub use stats::KsResult;
