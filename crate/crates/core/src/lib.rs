//! Degrees-of-freedom laboratory for cache-aided grid cellular networks.
//!
//! Builds the delivery schemes for BS-side caches at normalized cache sizes
//! 1/4, 1/2 and 1, verifies their neutralization, alignment and rank claims
//! at desk scale, and computes the matching outer bounds in exact arithmetic.

pub mod channel;
pub mod converse;
pub mod error;
pub mod linalg;
pub mod placement;
pub mod poly;
pub mod precoder;
pub mod ratio;
pub mod verify;
pub mod topology;

pub use error::{Error, Result};
pub use ratio::Q;
