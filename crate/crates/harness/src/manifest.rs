//! Dataset discovery.
//!
//! A sequence is a directory holding `Frame/` (frame images) and `GT/` (PNG
//! masks for the annotated frames), optionally `Flow/` and `GT_pseudo/`. The
//! root either holds sequences directly (all treated as test) or the two split
//! directories `TrainDataset_per_sq/` and `TestDataset_per_sq/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Directory names making up the on-disk layout. Datasets using other names
/// can be scanned by overriding fields instead of being converted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub frame_dir: String,
    pub gt_dir: String,
    pub flow_dir: String,
    pub pseudo_dir: String,
    pub train_dir: String,
    pub test_dir: String,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            frame_dir: "Frame".into(),
            gt_dir: "GT".into(),
            flow_dir: "Flow".into(),
            pseudo_dir: "GT_pseudo".into(),
            train_dir: "TrainDataset_per_sq".into(),
            test_dir: "TestDataset_per_sq".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrameFile {
    /// Frame number parsed from the trailing digits of the file stem.
    pub index: u64,
    pub stem: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Sequence {
    pub name: String,
    pub split: Split,
    pub dir: PathBuf,
    /// Sorted by index.
    pub frames: Vec<FrameFile>,
    /// Sorted by index; every index also appears in `frames`.
    pub gt: Vec<FrameFile>,
    pub flow_dir: Option<PathBuf>,
    /// Common spacing of annotated frames, if there are at least two and it is regular.
    pub stride: Option<u64>,
}

impl Sequence {
    pub fn frame_position(&self, index: u64) -> Option<usize> {
        self.frames.binary_search_by_key(&index, |f| f.index).ok()
    }

    pub fn gt_for(&self, index: u64) -> Option<&FrameFile> {
        self.gt
            .binary_search_by_key(&index, |f| f.index)
            .ok()
            .map(|i| &self.gt[i])
    }

    pub fn pseudo_dir(&self, layout: &Layout) -> PathBuf {
        self.dir.join(&layout.pseudo_dir)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ManifestCounts {
    pub sequences: usize,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub frames: usize,
    pub annotated_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    #[serde(skip)]
    pub layout: Layout,
    /// Sorted by split, then name.
    pub sequences: Vec<Sequence>,
    /// Non-fatal observations, such as irregular annotation stride.
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn counts(&self) -> ManifestCounts {
        let count = |s: Split| self.sequences.iter().filter(|q| q.split == s).count();
        ManifestCounts {
            sequences: self.sequences.len(),
            train_sequences: count(Split::Train),
            test_sequences: count(Split::Test),
            frames: self.sequences.iter().map(|s| s.frames.len()).sum(),
            annotated_frames: self.sequences.iter().map(|s| s.gt.len()).sum(),
        }
    }

    pub fn sequence(&self, name: &str) -> Option<&Sequence> {
        self.sequences.iter().find(|s| s.name == name)
    }
}

pub fn scan_dataset(root: &Path) -> Result<DatasetManifest> {
    scan_dataset_with(root, &Layout::default())
}

pub fn scan_dataset_with(root: &Path, layout: &Layout) -> Result<DatasetManifest> {
    let fail = |problems: Vec<String>| HarnessError::Manifest {
        root: root.to_path_buf(),
        problems,
    };
    if !root.is_dir() {
        return Err(fail(vec!["root is not a directory".into()]));
    }
    let split_dirs = [(Split::Train, &layout.train_dir), (Split::Test, &layout.test_dir)];
    let candidates: Vec<(Split, PathBuf)> = if split_dirs.iter().any(|(_, d)| root.join(d).is_dir()) {
        let mut out = Vec::new();
        for (split, d) in split_dirs {
            let dir = root.join(d);
            if dir.is_dir() {
                out.extend(subdirs(&dir)?.into_iter().map(|p| (split, p)));
            }
        }
        out
    } else {
        subdirs(root)?.into_iter().map(|p| (Split::Test, p)).collect()
    };
    if candidates.is_empty() {
        return Err(fail(vec!["no sequence directories found".into()]));
    }

    let mut problems = Vec::new();
    let mut warnings = Vec::new();
    let mut sequences = Vec::new();
    for (split, dir) in candidates {
        match scan_sequence(&dir, split, layout) {
            Ok(seq) => {
                if seq.gt.len() > 1 && seq.stride.is_none() {
                    warnings.push(format!("{}: annotated frames are not evenly spaced", seq.name));
                }
                sequences.push(seq);
            }
            Err(mut p) => problems.append(&mut p),
        }
    }
    if !problems.is_empty() {
        problems.sort();
        return Err(fail(problems));
    }
    sequences.sort_by(|a, b| (a.split, &a.name).cmp(&(b.split, &b.name)));
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        layout: layout.clone(),
        sequences,
        warnings,
    })
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))? {
        let path = entry.map_err(|e| HarnessError::io(dir, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn trailing_number(stem: &str) -> Option<u64> {
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    stem[stem.len() - digits..].parse().ok()
}

/// Numbered files in `dir` with one of `extensions` (case-insensitive).
fn numbered_files(dir: &Path, extensions: &[&str], problems: &mut Vec<String>) -> Vec<FrameFile> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            problems.push(format!("{}: {e}", dir.display()));
            return Vec::new();
        }
    };
    let mut by_index: BTreeMap<u64, Vec<FrameFile>> = BTreeMap::new();
    for entry in entries.flatten() {
        let path = entry.path();
        let ext = path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase());
        if !path.is_file() || !ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            continue;
        }
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        match trailing_number(&stem) {
            Some(index) => by_index.entry(index).or_default().push(FrameFile { index, stem, path }),
            None => problems.push(format!("{}: file name carries no frame number", path.display())),
        }
    }
    let mut files = Vec::with_capacity(by_index.len());
    for (index, mut group) in by_index {
        if group.len() > 1 {
            group.sort_by(|a, b| a.path.cmp(&b.path));
            let names: Vec<String> = group.iter().map(|f| file_name(&f.path)).collect();
            problems.push(format!(
                "{}: frame numbering is not strictly increasing, {} share index {index}",
                dir.display(),
                names.join(" and ")
            ));
            continue;
        }
        files.push(group.pop().expect("group is non-empty"));
    }
    files
}

fn scan_sequence(dir: &Path, split: Split, layout: &Layout) -> std::result::Result<Sequence, Vec<String>> {
    let name = file_name(dir);
    let mut problems = Vec::new();
    let frame_dir = dir.join(&layout.frame_dir);
    let gt_dir = dir.join(&layout.gt_dir);
    if !frame_dir.is_dir() {
        problems.push(format!("{}: missing {} directory", dir.display(), layout.frame_dir));
    }
    if !gt_dir.is_dir() {
        problems.push(format!("{}: missing {} directory", dir.display(), layout.gt_dir));
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let frames = numbered_files(&frame_dir, &["jpg", "jpeg", "png"], &mut problems);
    let gt = numbered_files(&gt_dir, &["png"], &mut problems);
    if frames.is_empty() {
        problems.push(format!("{}: no frame images", frame_dir.display()));
    }
    if gt.is_empty() {
        problems.push(format!("{}: no ground-truth masks", gt_dir.display()));
    }
    for g in &gt {
        if frames.binary_search_by_key(&g.index, |f| f.index).is_err() {
            problems.push(format!(
                "{}: ground truth for frame {} which does not exist",
                g.path.display(),
                g.index
            ));
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let gaps: Vec<u64> = gt.windows(2).map(|p| p[1].index - p[0].index).collect();
    let stride = gaps.first().copied().filter(|&s| gaps.iter().all(|&g| g == s));
    let flow_dir = Some(dir.join(&layout.flow_dir)).filter(|d| d.is_dir());
    Ok(Sequence {
        name,
        split,
        dir: dir.to_path_buf(),
        frames,
        gt,
        flow_dir,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_numbers() {
        assert_eq!(trailing_number("00045"), Some(45));
        assert_eq!(trailing_number("frame_7"), Some(7));
        assert_eq!(trailing_number("frame"), None);
        assert_eq!(trailing_number(""), None);
    }
}
