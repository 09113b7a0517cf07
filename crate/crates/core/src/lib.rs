//! Kernels for video camouflaged object detection: all-pairs correlation
//! pyramids with analytic gradients, flow-consistency pseudo labels,
//! structure-aware losses, the standard six-metric evaluation suite and a
//! toy short/long-term network that exercises them end to end.

pub mod corrpyr;
pub mod error;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod numerics;
pub mod par;
pub mod pseudolabel;
pub mod toynet;

pub use error::{Error, Result};
pub use mask::{MaskImage, MaskKind};
pub use numerics::DenseArray;
