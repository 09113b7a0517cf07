//! Frame-level segmentation measures and their aggregation.
//!
//! Conventions shared by every measure here:
//! * predictions are used as given (no min-max rescaling);
//! * threshold sweeps use the 256 levels `t/255, t = 0..=255`, and a pixel is
//!   foreground at level `t` when `prediction > t/255`;
//! * Dice and IoU of an empty prediction against an empty ground truth are 1.

use crate::error::{dim_err, Error, Result};
use crate::mask::{MaskImage, MaskKind};
use crate::par;

const EPS: f64 = f64::EPSILON;

/// Balance between the object- and region-aware terms of S_α.
pub const S_ALPHA: f64 = 0.5;
pub const SWEEP_LEVELS: usize = 256;
/// Weighted-F Gaussian support and spread.
pub const WF_KERNEL: usize = 7;
pub const WF_SIGMA: f64 = 5.0;
/// β² of the weighted F-measure.
pub const WF_BETA2: f64 = 1.0;

/// A prediction paired with its binary ground truth.
#[derive(Clone, Debug)]
pub struct FramePair {
    pub prediction: MaskImage,
    pub groundtruth: MaskImage,
}

impl FramePair {
    pub fn new(prediction: MaskImage, groundtruth: MaskImage) -> Result<Self> {
        prediction.expect_extent(&groundtruth)?;
        if groundtruth.kind() != MaskKind::Binary {
            return Err(Error::Input("ground truth must be binary".into()));
        }
        Ok(Self {
            prediction,
            groundtruth,
        })
    }

    fn pixels(&self) -> usize {
        self.groundtruth.values().len()
    }

    fn gt_count(&self) -> usize {
        self.groundtruth.values().iter().filter(|&&g| g > 0.5).count()
    }

    pub fn flip_horizontal(&self) -> Self {
        Self {
            prediction: self.prediction.flip_horizontal(),
            groundtruth: self.groundtruth.flip_horizontal(),
        }
    }
}

pub fn mae(p: &FramePair) -> f64 {
    let sum: f64 = p
        .prediction
        .values()
        .iter()
        .zip(p.groundtruth.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    sum / p.pixels() as f64
}

/// Number of sweep levels at which `v` is foreground.
#[inline]
fn level_count(v: f64) -> usize {
    // thresholds are increasing, so the count is a partition point
    let (mut lo, mut hi) = (0usize, SWEEP_LEVELS);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if v > mid as f64 / 255.0 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Confusion counts at every sweep level.
#[derive(Clone, Debug)]
struct Sweep {
    /// Foreground-predicted pixels inside the ground truth, per level.
    tp: Vec<usize>,
    /// Foreground-predicted pixels outside the ground truth, per level.
    fp: Vec<usize>,
    gt: usize,
    total: usize,
}

impl Sweep {
    fn new(p: &FramePair) -> Self {
        let mut hist_fg = vec![0usize; SWEEP_LEVELS + 1];
        let mut hist_bg = vec![0usize; SWEEP_LEVELS + 1];
        for (&v, &g) in p.prediction.values().iter().zip(p.groundtruth.values()) {
            let k = level_count(v);
            if g > 0.5 {
                hist_fg[k] += 1;
            } else {
                hist_bg[k] += 1;
            }
        }
        // level t keeps pixels whose count exceeds t
        let mut tp = vec![0; SWEEP_LEVELS];
        let mut fp = vec![0; SWEEP_LEVELS];
        let (mut acc_fg, mut acc_bg) = (0, 0);
        for t in (0..SWEEP_LEVELS).rev() {
            acc_fg += hist_fg[t + 1];
            acc_bg += hist_bg[t + 1];
            tp[t] = acc_fg;
            fp[t] = acc_bg;
        }
        Self {
            tp,
            fp,
            gt: hist_fg.iter().sum(),
            total: p.pixels(),
        }
    }

    fn mean_of(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        (0..SWEEP_LEVELS).map(|t| f(self.tp[t], self.fp[t])).sum::<f64>() / SWEEP_LEVELS as f64
    }
}

fn dice_at(tp: usize, fp: usize, gt: usize) -> f64 {
    let denom = tp + fp + gt;
    if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

fn iou_at(tp: usize, fp: usize, gt: usize) -> f64 {
    let union = gt + fp;
    if union == 0 {
        1.0
    } else {
        tp as f64 / union as f64
    }
}

/// Dice `2|P∩G| / (|P|+|G|)` averaged over the 256-level sweep.
pub fn mean_dice(p: &FramePair) -> f64 {
    let s = Sweep::new(p);
    s.mean_of(|tp, fp| dice_at(tp, fp, s.gt))
}

/// IoU `|P∩G| / |P∪G|` averaged over the 256-level sweep.
pub fn mean_iou(p: &FramePair) -> f64 {
    let s = Sweep::new(p);
    s.mean_of(|tp, fp| iou_at(tp, fp, s.gt))
}

/// Quadratic enhancement of the bias-centred agreement of one pixel.
#[inline]
pub fn enhanced_term(pred_centered: f64, gt_centered: f64) -> f64 {
    let align = 2.0 * pred_centered * gt_centered / (pred_centered * pred_centered + gt_centered * gt_centered + EPS);
    (align + 1.0) * (align + 1.0) / 4.0
}

/// Enhanced alignment of a continuous map against the ground truth, averaged
/// over pixels. All-background ground truth scores the mean of `1 − p`;
/// all-foreground ground truth scores the mean of `p`.
pub fn enhanced_alignment(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(dim_err!("{} predictions for {} labels", pred.len(), gt.len()));
    }
    let n = pred.len() as f64;
    let gsum: f64 = gt.iter().sum();
    if gsum == 0.0 {
        return Ok(pred.iter().map(|v| 1.0 - v).sum::<f64>() / n);
    }
    if gsum == n {
        return Ok(pred.iter().sum::<f64>() / n);
    }
    let mp = pred.iter().sum::<f64>() / n;
    let mg = gsum / n;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| enhanced_term(p - mp, g - mg))
        .sum::<f64>()
        / n)
}

/// The same quantity as [`enhanced_alignment`] for a binary prediction given
/// only its confusion counts.
fn enhanced_alignment_counts(tp: usize, fp: usize, gt: usize, total: usize) -> f64 {
    let n = total as f64;
    let pred_fg = tp + fp;
    if gt == 0 {
        return (total - pred_fg) as f64 / n;
    }
    if gt == total {
        return pred_fg as f64 / n;
    }
    let mp = pred_fg as f64 / n;
    let mg = gt as f64 / n;
    let (p1, p0) = (1.0 - mp, -mp);
    let (g1, g0) = (1.0 - mg, -mg);
    let fn_ = gt - tp;
    let tn = total - gt - fp;
    (tp as f64 * enhanced_term(p1, g1)
        + fp as f64 * enhanced_term(p1, g0)
        + fn_ as f64 * enhanced_term(p0, g1)
        + tn as f64 * enhanced_term(p0, g0))
        / n
}

/// Mean enhanced-alignment measure over the 256-level sweep.
pub fn e_measure_mean(p: &FramePair) -> f64 {
    let s = Sweep::new(p);
    s.mean_of(|tp, fp| enhanced_alignment_counts(tp, fp, s.gt, s.total))
}

fn object_score(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = vals.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    2.0 * mean / (mean * mean + 1.0 + std + EPS)
}

fn region_ssim(p: &[f64], g: &[f64], w: usize, rows: (usize, usize), cols: (usize, usize)) -> f64 {
    let n = ((rows.1 - rows.0) * (cols.1 - cols.0)) as f64;
    let idx = || (rows.0..rows.1).flat_map(move |y| (cols.0..cols.1).map(move |x| y * w + x));
    let x = idx().map(|i| p[i]).sum::<f64>() / n;
    let y = idx().map(|i| g[i]).sum::<f64>() / n;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    if n > 1.0 {
        for i in idx() {
            let (a, b) = (p[i] - x, g[i] - y);
            sx += a * a;
            sy += b * b;
            sxy += a * b;
        }
        sx /= n - 1.0;
        sy /= n - 1.0;
        sxy /= n - 1.0;
    }
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Structure measure `S_α = α·S_object + (1−α)·S_region`, floored at 0.
///
/// All-background ground truth scores `1 − mean(p)`, all-foreground scores
/// `mean(p)`. The region term splits at the foreground centroid (see
/// [`split_at`]); empty quadrants carry zero weight and single-pixel
/// statistics use zero variance.
/// Number of rows/columns before the split line through centroid `c`, measured
/// on pixel centres. Ties round to even, which keeps the split mirror-exact on
/// even extents.
fn split_at(c: f64) -> usize {
    (c + 0.5).round_ties_even() as usize
}

pub fn s_measure(p: &FramePair) -> f64 {
    let (h, w) = p.groundtruth.extent();
    let pred = p.prediction.values();
    let gt = p.groundtruth.values();
    let n = (h * w) as f64;
    let g_count = p.gt_count();
    if g_count == 0 {
        return 1.0 - pred.iter().sum::<f64>() / n;
    }
    if g_count == h * w {
        return pred.iter().sum::<f64>() / n;
    }
    let u = g_count as f64 / n;
    let fg = pred.iter().zip(gt).filter(|(_, &g)| g > 0.5).map(|(&v, _)| v);
    let bg = pred.iter().zip(gt).filter(|(_, &g)| g <= 0.5).map(|(&v, _)| 1.0 - v);
    let object = u * object_score(fg) + (1.0 - u) * object_score(bg);

    let (mut sy, mut sx) = (0.0, 0.0);
    for (i, &g) in gt.iter().enumerate() {
        if g > 0.5 {
            sy += (i / w) as f64;
            sx += (i % w) as f64;
        }
    }
    let cx = split_at(sx / g_count as f64);
    let cy = split_at(sy / g_count as f64);
    let quads = [
        ((0, cy), (0, cx)),
        ((0, cy), (cx, w)),
        ((cy, h), (0, cx)),
        ((cy, h), (cx, w)),
    ];
    let region: f64 = quads
        .iter()
        .filter(|(r, c)| r.1 > r.0 && c.1 > c.0)
        .map(|&(r, c)| {
            let weight = ((r.1 - r.0) * (c.1 - c.0)) as f64 / n;
            weight * region_ssim(pred, gt, w, r, c)
        })
        .sum();
    (S_ALPHA * object + (1.0 - S_ALPHA) * region).max(0.0)
}

/// Exact Euclidean distance from every pixel to the nearest foreground pixel,
/// together with the mean of `values` over every foreground pixel at that
/// distance. Averaging the ties keeps the result invariant under flips and
/// transposes. `fg` must contain at least one `true`.
pub fn nearest_foreground(fg: &[bool], values: &[f64], h: usize, w: usize) -> Vec<(f64, f64)> {
    // per column: squared row distance to the nearest foreground pixel, with
    // the value sum and count over the (at most two) nearest rows
    let mut cols: Vec<Option<Candidate>> = vec![None; h * w];
    for x in 0..w {
        let mut ups = vec![None; h];
        let mut above: Option<usize> = None;
        for (y, up) in ups.iter_mut().enumerate() {
            if fg[y * w + x] {
                above = Some(y);
            }
            *up = above;
        }
        let mut below: Option<usize> = None;
        for y in (0..h).rev() {
            if fg[y * w + x] {
                below = Some(y);
            }
            let at = |r: usize| values[r * w + x];
            cols[y * w + x] = match (ups[y], below) {
                (Some(a), Some(b)) if y - a == b - y => Some(Candidate {
                    d2: ((y - a) * (y - a)) as i64,
                    sum: if a == b { at(a) } else { at(a) + at(b) },
                    count: if a == b { 1 } else { 2 },
                }),
                (Some(a), Some(b)) => {
                    let r = if y - a < b - y { a } else { b };
                    Some(Candidate::single(r.abs_diff(y), at(r)))
                }
                (Some(r), None) | (None, Some(r)) => Some(Candidate::single(r.abs_diff(y), at(r))),
                (None, None) => None,
            };
        }
    }
    let rows = par::map_range(h, |y| lower_envelope(&cols[y * w..(y + 1) * w]));
    rows.concat()
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    d2: i64,
    sum: f64,
    count: u32,
}

impl Candidate {
    fn single(d: usize, value: f64) -> Self {
        Self {
            d2: (d * d) as i64,
            sum: value,
            count: 1,
        }
    }
}

/// `min_{x'} (x − x')² + f(x')` for every `x`, with the value mean over every
/// minimising `x'`. Breakpoints are exact rationals; parabolas touching the
/// envelope at a single point are kept so that ties are not lost.
fn lower_envelope(f: &[Option<Candidate>]) -> Vec<(f64, f64)> {
    #[derive(Clone, Copy)]
    enum Bound {
        NegInf,
        At(i128, i128), // num / den, den > 0
    }
    let lt = |a: Bound, b: Bound| -> bool {
        match (a, b) {
            (_, Bound::NegInf) => false,
            (Bound::NegInf, _) => true,
            (Bound::At(an, ad), Bound::At(bn, bd)) => an * bd < bn * ad,
        }
    };
    let d2 = |p: usize| f[p].expect("envelope holds finite columns").d2;
    let intersect = |p: usize, q: usize| {
        let num = (d2(q) + (q * q) as i64) - (d2(p) + (p * p) as i64);
        Bound::At(num as i128, 2 * (q as i128 - p as i128))
    };
    let mut v: Vec<usize> = Vec::new();
    let mut z: Vec<Bound> = Vec::new();
    for q in (0..f.len()).filter(|&q| f[q].is_some()) {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(Bound::NegInf);
                    break;
                }
                Some(&p) => {
                    let s = intersect(p, q);
                    if lt(s, *z.last().unwrap()) {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut k = 0;
    (0..f.len())
        .map(|x| {
            let xb = Bound::At(x as i128, 1);
            // first parabola whose segment does not end left of x
            while k + 1 < v.len() && lt(z[k + 1], xb) {
                k += 1;
            }
            let at = |p: usize| (x as i64 - p as i64).pow(2) + d2(p);
            let best = at(v[k]);
            let (mut sum, mut count) = (0.0, 0);
            for &p in &v[k..] {
                let d = at(p);
                if d > best {
                    break;
                }
                let c = f[p].expect("finite column");
                sum += c.sum;
                count += c.count;
            }
            ((best as f64).sqrt(), sum / count as f64)
        })
        .collect()
}

fn gaussian_1d(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let k: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian filter with zero padding.
fn gaussian_filter(x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = gaussian_1d(WF_KERNEL, WF_SIGMA);
    let r = (WF_KERNEL / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for xx in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let sx = xx as isize + j as isize - r;
                if sx >= 0 && sx < w as isize {
                    acc += kv * x[y * w + sx as usize];
                }
            }
            tmp[y * w + xx] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for xx in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let sy = y as isize + i as isize - r;
                if sy >= 0 && sy < h as isize {
                    acc += kv * tmp[sy as usize * w + xx];
                }
            }
            out[y * w + xx] = acc;
        }
    }
    out
}

/// Weighted F-measure. All-background ground truth scores 0.
pub fn weighted_f(p: &FramePair) -> f64 {
    let (h, w) = p.groundtruth.extent();
    let pred = p.prediction.values();
    let gt = p.groundtruth.values();
    let fg: Vec<bool> = gt.iter().map(|&g| g > 0.5).collect();
    let g_count = fg.iter().filter(|&&b| b).count();
    if g_count == 0 {
        return 0.0;
    }
    let err: Vec<f64> = pred.iter().zip(gt).map(|(a, b)| (a - b).abs()).collect();
    let nearest = nearest_foreground(&fg, &err, h, w);
    // background errors take the value of their nearest foreground pixels
    let et: Vec<f64> = (0..h * w).map(|i| if fg[i] { err[i] } else { nearest[i].1 }).collect();
    let ea = gaussian_filter(&et, h, w);
    let (mut fg_err, mut fpw) = (0.0, 0.0);
    for i in 0..h * w {
        if fg[i] {
            fg_err += if ea[i] < err[i] { ea[i] } else { err[i] };
        } else {
            let importance = 2.0 - ((0.5f64).ln() / 5.0 * nearest[i].0).exp();
            fpw += err[i] * importance;
        }
    }
    let tpw = g_count as f64 - fg_err;
    let recall = 1.0 - fg_err / g_count as f64;
    let precision = tpw / (tpw + fpw + EPS);
    (1.0 + WF_BETA2) * recall * precision / (recall + WF_BETA2 * precision + EPS)
}

/// All six measures of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMetrics {
    pub s_alpha: f64,
    pub f_beta_w: f64,
    pub e_phi_mean: f64,
    pub mae: f64,
    pub m_dice: f64,
    pub m_iou: f64,
}

impl FrameMetrics {
    pub fn evaluate(p: &FramePair) -> Self {
        let sweep = Sweep::new(p);
        Self {
            s_alpha: s_measure(p),
            f_beta_w: weighted_f(p),
            e_phi_mean: sweep.mean_of(|tp, fp| enhanced_alignment_counts(tp, fp, sweep.gt, sweep.total)),
            mae: mae(p),
            m_dice: sweep.mean_of(|tp, fp| dice_at(tp, fp, sweep.gt)),
            m_iou: sweep.mean_of(|tp, fp| iou_at(tp, fp, sweep.gt)),
        }
    }

    /// Values in report column order: S_α, F_β^w, E_φ, M, mDice, mIoU.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.s_alpha,
            self.f_beta_w,
            self.e_phi_mean,
            self.mae,
            self.m_dice,
            self.m_iou,
        ]
    }
}

/// Frame-averaged measures over a group of frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub s_alpha: f64,
    pub f_beta_w: f64,
    pub e_phi_mean: f64,
    pub mae: f64,
    pub m_dice: f64,
    pub m_iou: f64,
    pub frame_count: usize,
}

impl MetricReport {
    /// Unweighted mean over frames.
    pub fn aggregate(frames: &[FrameMetrics]) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Input("cannot aggregate an empty group of frames".into()));
        }
        let n = frames.len() as f64;
        let mut acc = [0.0; 6];
        for f in frames {
            for (a, v) in acc.iter_mut().zip(f.as_array()) {
                *a += v;
            }
        }
        Ok(Self {
            s_alpha: acc[0] / n,
            f_beta_w: acc[1] / n,
            e_phi_mean: acc[2] / n,
            mae: acc[3] / n,
            m_dice: acc[4] / n,
            m_iou: acc[5] / n,
            frame_count: frames.len(),
        })
    }

    pub fn from_values(values: [f64; 6], frame_count: usize) -> Self {
        Self {
            s_alpha: values[0],
            f_beta_w: values[1],
            e_phi_mean: values[2],
            mae: values[3],
            m_dice: values[4],
            m_iou: values[5],
            frame_count,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.s_alpha,
            self.f_beta_w,
            self.e_phi_mean,
            self.mae,
            self.m_dice,
            self.m_iou,
        ]
    }
}

/// Evaluates frames in parallel, preserving input order.
pub fn evaluate_frames(pairs: &[FramePair]) -> Vec<FrameMetrics> {
    par::map_slice(pairs, FrameMetrics::evaluate)
}
