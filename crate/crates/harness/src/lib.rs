//! Dataset ingestion, pseudo-label generation, evaluation and report emission
//! for video datasets laid out like MoCA-Mask.

pub mod error;
pub mod eval;
pub mod io;
pub mod manifest;
pub mod pseudo;
pub mod report;
pub mod toydemo;

pub use error::{HarnessError, Result};
pub use eval::{run_eval, EvalMode, EvalOutcome, ReportFormat, RunConfig};
pub use manifest::{scan_dataset, DatasetManifest, Layout, Sequence, Split};
pub use pseudo::{run_pseudo, PseudoSummary};
pub use toydemo::{run_toydemo, ToyDemoConfig, ToyDemoOutput};
