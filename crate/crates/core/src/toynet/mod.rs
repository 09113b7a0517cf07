//! Desk-scale network wiring the kernels together.
//!
//! The stand-ins are deliberately minimal: a strided-conv encoder instead of a
//! transformer backbone, one residual pair per scale instead of a
//! multi-branch texture module, and a conv–upsample–sum decoder. Each lives
//! behind its own type so a fuller component can replace it.

pub mod layers;
pub mod long;
pub mod params;
pub mod short;
pub mod synth;
pub mod train;

pub use long::{
    long_forward, two_stage_forward, AttentionRow, LongOutput, LongTermConfig, LongTermModel, SequenceBatch,
};
pub use short::{ShortConfig, ShortForward, ShortGrads, ShortTermModel};
pub use synth::{synth_clip, toy_samples, SynthClip, SynthConfig, ToySample};
pub use train::{batch_loss, cosine_lr, overfit_demo, trace_csv, Adam};
