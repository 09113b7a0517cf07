//! Metric evaluation of a prediction directory against a scanned dataset.
//!
//! Predictions for sequence `q` are looked up in `<predictions>/<q>/` and
//! matched to frames by file stem. Two files sharing a stem (say `3.png` and
//! `3.jpg`) are an error rather than a guess.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use vcod_core::metrics::{evaluate_frames, FrameMetrics, FramePair, MetricReport};
use vcod_core::par;
use vcod_core::pseudolabel::{ConsistencyParams, PseudoParams};

use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{DatasetManifest, Sequence, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Only frames with a human-labelled mask.
    AnnotatedOnly,
    /// Annotated frames plus every frame with a mask under `GT_pseudo/`.
    AllFramesWithPseudo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: EvalMode,
    /// Binarisation threshold for ground-truth PNGs and warped masks.
    pub threshold: f64,
    pub consistency: ConsistencyParams,
    pub format: ReportFormat,
    /// Worker threads; `None` leaves the pool at its default size.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::AnnotatedOnly,
            threshold: 0.5,
            consistency: ConsistencyParams::default(),
            format: ReportFormat::Markdown,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(HarnessError::Config(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        let ConsistencyParams { alpha, beta } = self.consistency;
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(HarnessError::Config(format!(
                "alpha and beta must be non-negative and finite, got {alpha} and {beta}"
            )));
        }
        if self.threads == Some(0) {
            return Err(HarnessError::Config("thread count must be positive".into()));
        }
        Ok(())
    }

    pub fn pseudo_params(&self) -> PseudoParams {
        PseudoParams {
            binarize_threshold: self.threshold,
            consistency: self.consistency,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceReport {
    pub name: String,
    pub split: Split,
    pub report: MetricReport,
    /// Frames scored against a pseudo mask rather than human annotation.
    pub pseudo_frames: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub sequences: Vec<SequenceReport>,
    /// Mean over every evaluated frame.
    pub overall: MetricReport,
    /// Every mask file read, sorted.
    pub accessed: Vec<PathBuf>,
}

struct Job {
    stem: String,
    reference: PathBuf,
    pseudo: bool,
    prediction: PathBuf,
}

pub fn run_eval(manifest: &DatasetManifest, predictions: &Path, config: &RunConfig) -> Result<EvalOutcome> {
    config.validate()?;
    let mut plans = Vec::with_capacity(manifest.sequences.len());
    let mut missing = Vec::new();
    for seq in &manifest.sequences {
        let refs = references(manifest, seq, config.mode);
        let available = prediction_index(&predictions.join(&seq.name))?;
        let mut jobs = Vec::with_capacity(refs.len());
        for (stem, reference, pseudo) in refs {
            match available.get(&stem).map(Vec::as_slice) {
                None | Some([]) => missing.push(format!("{}/{stem}", seq.name)),
                Some([one]) => jobs.push(Job {
                    stem,
                    reference,
                    pseudo,
                    prediction: one.clone(),
                }),
                Some(many) => {
                    return Err(HarnessError::AmbiguousPrediction {
                        frame: format!("{}/{stem}", seq.name),
                        candidates: many.to_vec(),
                    })
                }
            }
        }
        plans.push((seq, jobs));
    }
    if !missing.is_empty() {
        return Err(HarnessError::MissingPredictions { missing });
    }

    let scored = par::map_slice(&plans, |(seq, jobs)| score_sequence(seq, jobs, config.threshold));
    let mut sequences = Vec::with_capacity(plans.len());
    let mut all: Vec<FrameMetrics> = Vec::new();
    let mut accessed = Vec::new();
    for ((seq, jobs), frames) in plans.iter().zip(scored) {
        let frames = frames?;
        if frames.is_empty() {
            continue;
        }
        sequences.push(SequenceReport {
            name: seq.name.clone(),
            split: seq.split,
            report: MetricReport::aggregate(&frames)?,
            pseudo_frames: jobs.iter().filter(|j| j.pseudo).count(),
        });
        all.extend(frames);
        accessed.extend(jobs.iter().flat_map(|j| [j.reference.clone(), j.prediction.clone()]));
    }
    if all.is_empty() {
        return Err(HarnessError::Config("no frames to evaluate".into()));
    }
    accessed.sort();
    Ok(EvalOutcome {
        sequences,
        overall: MetricReport::aggregate(&all)?,
        accessed,
    })
}

/// `(frame stem, reference mask, is_pseudo)` in frame order.
fn references(manifest: &DatasetManifest, seq: &Sequence, mode: EvalMode) -> Vec<(String, PathBuf, bool)> {
    let pseudo_dir = seq.pseudo_dir(&manifest.layout);
    seq.frames
        .iter()
        .filter_map(|f| match (seq.gt_for(f.index), mode) {
            (Some(g), _) => Some((f.stem.clone(), g.path.clone(), false)),
            (None, EvalMode::AllFramesWithPseudo) => {
                let p = pseudo_dir.join(format!("{}.png", f.stem));
                p.is_file().then(|| (f.stem.clone(), p, true))
            }
            (None, EvalMode::AnnotatedOnly) => None,
        })
        .collect()
}

/// Image files in `dir` grouped by stem. A missing directory is empty.
fn prediction_index(dir: &Path) -> Result<BTreeMap<String, Vec<PathBuf>>> {
    let mut out: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| matches!(e.as_str(), "png" | "jpg" | "jpeg")) {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.entry(stem).or_default().push(path);
        }
    }
    for paths in out.values_mut() {
        paths.sort();
    }
    Ok(out)
}

fn score_sequence(seq: &Sequence, jobs: &[Job], threshold: f64) -> Result<Vec<FrameMetrics>> {
    let pairs = par::map_slice(jobs, |j| -> Result<FramePair> {
        let gt = io::read_binary_mask(&j.reference, threshold)?;
        let pred = io::read_probability_mask(&j.prediction)?;
        FramePair::new(pred, gt).map_err(|e| HarnessError::Frame {
            context: format!("{}/{}", seq.name, j.stem),
            source: e,
        })
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(evaluate_frames(&pairs))
}
