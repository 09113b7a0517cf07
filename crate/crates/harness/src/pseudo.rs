//! Pseudo-mask generation over a scanned dataset.
//!
//! For an annotated frame with stem `s` and offset `n` (1..=4, counted in
//! frame-list positions) the flows are read from the sequence's flow
//! directory:
//!
//! - `s_n{n}_back.flo`, defined on frame t+n and pointing into frame t
//! - `s_n{n}_fwd.flo`, defined on frame t and pointing into frame t+n
//!
//! The result for target frame `u` is written to `GT_pseudo/u.png`. When two
//! annotated frames reach the same target, the smaller offset wins, then the
//! earlier annotated frame.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vcod_core::par;
use vcod_core::pseudolabel::{self, OffsetFlows, PseudoParams, MAX_OFFSET};
use vcod_core::MaskImage;

use crate::error::{HarnessError, Result};
use crate::io;
use crate::manifest::{DatasetManifest, Sequence};

pub fn flow_paths(flow_dir: &Path, ref_stem: &str, offset: usize) -> (PathBuf, PathBuf) {
    (
        flow_dir.join(format!("{ref_stem}_n{offset}_back.flo")),
        flow_dir.join(format!("{ref_stem}_n{offset}_fwd.flo")),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skip {
    pub sequence: String,
    pub frame: String,
    pub offset: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WrittenMask {
    pub target: String,
    pub source: String,
    pub offset: usize,
    pub valid_ratio: f64,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequencePseudo {
    pub name: String,
    pub written: Vec<WrittenMask>,
    pub skipped: usize,
    /// Mean flow-consistent fraction over the written masks.
    pub mean_valid_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoSummary {
    pub sequences: Vec<SequencePseudo>,
    pub skips: Vec<Skip>,
    pub written: usize,
}

pub fn run_pseudo(manifest: &DatasetManifest, params: PseudoParams) -> Result<PseudoSummary> {
    let results = par::map_slice(&manifest.sequences, |seq| pseudo_sequence(manifest, seq, params));
    let mut sequences = Vec::new();
    let mut skips = Vec::new();
    for r in results {
        let (s, mut k) = r?;
        sequences.push(s);
        skips.append(&mut k);
    }
    let written = sequences.iter().map(|s| s.written.len()).sum();
    Ok(PseudoSummary {
        sequences,
        skips,
        written,
    })
}

struct Candidate {
    offset: usize,
    source_pos: usize,
    mask: MaskImage,
    valid_ratio: f64,
}

fn pseudo_sequence(
    manifest: &DatasetManifest,
    seq: &Sequence,
    params: PseudoParams,
) -> Result<(SequencePseudo, Vec<Skip>)> {
    let mut skips = Vec::new();
    let mut best: BTreeMap<usize, Candidate> = BTreeMap::new();
    for gt_file in &seq.gt {
        let pos = seq
            .frame_position(gt_file.index)
            .expect("manifest pairs gt with frames");
        let mut gt: Option<MaskImage> = None;
        for offset in 1..=MAX_OFFSET {
            let target = pos + offset;
            if target >= seq.frames.len() {
                break;
            }
            let mut skip = |reason: String| {
                skips.push(Skip {
                    sequence: seq.name.clone(),
                    frame: gt_file.stem.clone(),
                    offset,
                    reason,
                })
            };
            let Some(flow_dir) = &seq.flow_dir else {
                skip("sequence has no flow directory".into());
                continue;
            };
            let (back, fwd) = flow_paths(flow_dir, &gt_file.stem, offset);
            let missing: Vec<String> = [&back, &fwd]
                .into_iter()
                .filter(|p| !p.is_file())
                .map(|p| p.display().to_string())
                .collect();
            if !missing.is_empty() {
                skip(format!("missing {}", missing.join(" and ")));
                continue;
            }
            let flows = OffsetFlows {
                target_to_ref: pseudolabel::read_flow_file(&back).map_err(|e| HarnessError::Frame {
                    context: back.display().to_string(),
                    source: e,
                })?,
                ref_to_target: pseudolabel::read_flow_file(&fwd).map_err(|e| HarnessError::Frame {
                    context: fwd.display().to_string(),
                    source: e,
                })?,
            };
            let gt = match &gt {
                Some(g) => g,
                None => gt.insert(io::read_binary_mask(&gt_file.path, params.binarize_threshold)?),
            };
            let context = || format!("{} {} offset {offset}", seq.name, gt_file.stem);
            let mut out =
                pseudolabel::generate_pseudo_masks(gt, std::slice::from_ref(&flows), params).map_err(|e| {
                    HarnessError::Frame {
                        context: context(),
                        source: e,
                    }
                })?;
            let p = out.pop().expect("one offset in, one mask out");
            let keep = best
                .get(&target)
                .is_none_or(|c| (offset, pos) < (c.offset, c.source_pos));
            if keep {
                best.insert(
                    target,
                    Candidate {
                        offset,
                        source_pos: pos,
                        valid_ratio: p.validity.valid_ratio(),
                        mask: p.mask,
                    },
                );
            }
        }
    }

    let dir = seq.pseudo_dir(&manifest.layout);
    let mut written = Vec::with_capacity(best.len());
    for (target, c) in best {
        let stem = &seq.frames[target].stem;
        let path = dir.join(format!("{stem}.png"));
        io::write_mask(&path, &c.mask)?;
        written.push(WrittenMask {
            target: stem.clone(),
            source: seq.frames[c.source_pos].stem.clone(),
            offset: c.offset,
            valid_ratio: c.valid_ratio,
            path,
        });
    }
    let mean_valid_ratio =
        (!written.is_empty()).then(|| written.iter().map(|w| w.valid_ratio).sum::<f64>() / written.len() as f64);
    Ok((
        SequencePseudo {
            name: seq.name.clone(),
            written,
            skipped: skips.len(),
            mean_valid_ratio,
        },
        skips,
    ))
}
