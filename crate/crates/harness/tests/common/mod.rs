#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use vcod_core::pseudolabel::{write_flow_file, FlowField};
use vcod_core::MaskImage;
use vcod_harness::io::write_mask;

pub const H: usize = 16;
pub const W: usize = 20;

/// Rectangle `[y0, y1) × [x0, x1)`.
pub fn rect(h: usize, w: usize, y0: usize, y1: usize, x0: usize, x1: usize) -> MaskImage {
    let v = (0..h * w)
        .map(|i| f64::from((y0..y1).contains(&(i / w)) && (x0..x1).contains(&(i % w))))
        .collect();
    MaskImage::binary(h, w, v).unwrap()
}

/// Random rectangle at least three pixels away from every border.
pub fn interior_rect(rng: &mut impl Rng, h: usize, w: usize) -> MaskImage {
    let y0 = rng.gen_range(3..h / 2);
    let x0 = rng.gen_range(3..w / 2);
    rect(
        h,
        w,
        y0,
        rng.gen_range(y0 + 1..=h - 3),
        x0,
        rng.gen_range(x0 + 1..=w - 3),
    )
}

pub fn stem(i: usize) -> String {
    format!("{i:05}")
}

/// Writes `<dir>/Frame/*.png` for `frames` frames and `<dir>/GT/*.png` on
/// every `stride`-th frame, using `gt(i)` as the mask of frame `i`.
pub fn sequence(dir: &Path, frames: usize, stride: usize, gt: impl Fn(usize) -> MaskImage) -> Vec<PathBuf> {
    let mut gt_paths = Vec::new();
    for i in 0..frames {
        let m = gt(i);
        let frame = MaskImage::probability(m.height(), m.width(), vec![0.5; m.height() * m.width()]).unwrap();
        write_mask(&dir.join("Frame").join(format!("{}.png", stem(i))), &frame).unwrap();
        if i % stride == 0 {
            let p = dir.join("GT").join(format!("{}.png", stem(i)));
            write_mask(&p, &m).unwrap();
            gt_paths.push(p);
        }
    }
    gt_paths
}

/// Flow pair for annotated frame `i` and offset `n` under rigid motion `(dx, dy)` per frame.
pub fn translation_flows(dir: &Path, i: usize, n: usize, dx: f64, dy: f64, h: usize, w: usize) {
    let flow = dir.join("Flow");
    std::fs::create_dir_all(&flow).unwrap();
    let s = stem(i);
    let k = n as f64;
    write_flow_file(
        flow.join(format!("{s}_n{n}_back.flo")),
        &FlowField::constant(h, w, -k * dx, -k * dy),
    )
    .unwrap();
    write_flow_file(
        flow.join(format!("{s}_n{n}_fwd.flo")),
        &FlowField::constant(h, w, k * dx, k * dy),
    )
    .unwrap();
}

/// Copies every mask under `<root>/<seq>/GT` into `<pred>/<seq>/`.
pub fn gt_as_predictions(root: &Path, pred: &Path) {
    for seq in std::fs::read_dir(root).unwrap() {
        let seq = seq.unwrap().path();
        let out = pred.join(seq.file_name().unwrap());
        std::fs::create_dir_all(&out).unwrap();
        for f in std::fs::read_dir(seq.join("GT")).unwrap() {
            let f = f.unwrap().path();
            std::fs::copy(&f, out.join(f.file_name().unwrap())).unwrap();
        }
    }
}
