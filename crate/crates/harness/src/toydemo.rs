//! Synthetic moving-square overfit run with a loss trace and final metrics.

use serde::Serialize;
use vcod_core::metrics::{evaluate_frames, FramePair, MetricReport};
use vcod_core::toynet::{self, ShortConfig, ShortTermModel, SynthConfig};

use crate::error::Result;
use crate::report;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyDemoConfig {
    /// Seeds both the synthetic clips and the model initialisation.
    pub seed: u64,
    pub steps: usize,
    pub lr: f64,
    pub samples: usize,
    /// Keep the correlation pyramid and encoder at their initial values.
    pub freeze_motion: bool,
}

impl Default for ToyDemoConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 200,
            lr: 1e-2,
            samples: 4,
            freeze_motion: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToyDemoOutput {
    /// Loss before each step, plus the final loss; length `steps + 1`.
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub report: MetricReport,
}

impl ToyDemoOutput {
    pub fn ratio(&self) -> f64 {
        self.trace[self.trace.len() - 1] / self.trace[0]
    }

    pub fn trace_csv(&self) -> String {
        toynet::trace_csv(&self.trace)
    }

    pub fn summary_markdown(&self) -> String {
        format!(
            "initial loss {:.6}\nfinal loss {:.6}\nratio {:.6}\n\n{}",
            self.trace[0],
            self.trace[self.trace.len() - 1],
            self.ratio(),
            report::markdown(&[report::ReportRow {
                label: "toy".into(),
                report: self.report,
            }])
        )
    }
}

pub fn run_toydemo(config: &ToyDemoConfig) -> Result<ToyDemoOutput> {
    let samples = toynet::toy_samples(&SynthConfig::default(), config.samples, config.seed)?;
    let mut model = ShortTermModel::new(ShortConfig::toy(), config.seed);
    let trace = toynet::overfit_demo(&mut model, &samples, config.steps, config.lr, config.freeze_motion)?;
    let pairs = samples
        .iter()
        .map(|s| {
            let pred = model.predict(&s.frames[0], &s.frames[1], Some(&s.frames[2]))?;
            FramePair::new(pred, s.gt.clone())
        })
        .collect::<vcod_core::Result<Vec<_>>>()?;
    let report = MetricReport::aggregate(&evaluate_frames(&pairs))?;
    Ok(ToyDemoOutput { trace, report })
}
