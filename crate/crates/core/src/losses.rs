//! Training objectives: weighted cross-entropy, weighted IoU and the
//! enhanced-alignment loss, with analytic gradients for the first two.

use crate::error::{dim_err, Error, Result};
use crate::mask::{MaskImage, MaskKind};
use crate::metrics;
use crate::numerics::{self, DenseArray};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Hard-pixel emphasis.
    pub lambda: f64,
    /// Side of the local averaging window (odd).
    pub window: usize,
    /// Probability clamp for the cross-entropy.
    pub eps: f64,
    /// Additive smoothing of the IoU ratio.
    pub smooth: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 5.0,
            window: 31,
            eps: 1e-7,
            smooth: 1.0,
        }
    }
}

fn check(pred: &MaskImage, gt: &MaskImage) -> Result<()> {
    pred.expect_extent(gt)?;
    if gt.kind() != MaskKind::Binary {
        return Err(Error::Input("ground truth must be binary".into()));
    }
    Ok(())
}

fn check_weights(gt: &MaskImage, w: &[f64]) -> Result<()> {
    if w.len() != gt.values().len() {
        return Err(dim_err!("{} weights for {} pixels", w.len(), gt.values().len()));
    }
    Ok(())
}

/// `w = 1 + λ·|local_mean(gt) − gt|`, in `[1, 1+λ]`.
pub fn pixel_weights(gt: &MaskImage, cfg: &LossConfig) -> Result<Vec<f64>> {
    let pooled = numerics::avg_pool2d_same(&gt.to_array(), cfg.window)?;
    Ok(pooled
        .data()
        .iter()
        .zip(gt.values())
        .map(|(m, g)| 1.0 + cfg.lambda * (m - g).abs())
        .collect())
}

/// `Σ w·[−g·ln p − (1−g)·ln(1−p)] / Σ w` with `p` clamped to `[ε, 1−ε]`.
pub fn weighted_ce(pred: &MaskImage, gt: &MaskImage, w: &[f64], eps: f64) -> Result<f64> {
    check(pred, gt)?;
    check_weights(gt, w)?;
    let (mut num, mut den) = (0.0, 0.0);
    for ((&p, &g), &wi) in pred.values().iter().zip(gt.values()).zip(w) {
        let p = p.clamp(eps, 1.0 - eps);
        num += wi * (-g * p.ln() - (1.0 - g) * (1.0 - p).ln());
        den += wi;
    }
    Ok(num / den)
}

pub fn weighted_ce_grad(pred: &MaskImage, gt: &MaskImage, w: &[f64], eps: f64) -> Result<Vec<f64>> {
    check(pred, gt)?;
    check_weights(gt, w)?;
    let den: f64 = w.iter().sum();
    Ok(pred
        .values()
        .iter()
        .zip(gt.values())
        .zip(w)
        .map(|((&p, &g), &wi)| {
            if p < eps || p > 1.0 - eps {
                return 0.0;
            }
            wi * (-g / p + (1.0 - g) / (1.0 - p)) / den
        })
        .collect())
}

fn iou_sums(pred: &MaskImage, gt: &MaskImage, w: &[f64]) -> (f64, f64) {
    let (mut inter, mut union) = (0.0, 0.0);
    for ((&p, &g), &wi) in pred.values().iter().zip(gt.values()).zip(w) {
        inter += wi * p * g;
        union += wi * (p + g - p * g);
    }
    (inter, union)
}

/// `1 − (Σ w·p·g + s) / (Σ w·(p + g − p·g) + s)`
pub fn weighted_iou(pred: &MaskImage, gt: &MaskImage, w: &[f64], smooth: f64) -> Result<f64> {
    check(pred, gt)?;
    check_weights(gt, w)?;
    let (i, u) = iou_sums(pred, gt, w);
    Ok(1.0 - (i + smooth) / (u + smooth))
}

pub fn weighted_iou_grad(pred: &MaskImage, gt: &MaskImage, w: &[f64], smooth: f64) -> Result<Vec<f64>> {
    check(pred, gt)?;
    check_weights(gt, w)?;
    let (i, u) = iou_sums(pred, gt, w);
    let (i, u) = (i + smooth, u + smooth);
    Ok(gt
        .values()
        .iter()
        .zip(w)
        .map(|(&g, &wi)| -(wi * g * u - i * wi * (1.0 - g)) / (u * u))
        .collect())
}

/// `1 −` the enhanced alignment of the continuous prediction.
pub fn e_loss(pred: &MaskImage, gt: &MaskImage) -> Result<f64> {
    check(pred, gt)?;
    Ok(1.0 - metrics::enhanced_alignment(pred.values(), gt.values())?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub wce: f64,
    pub wiou: f64,
    pub e: Option<f64>,
    pub total: f64,
}

impl LossValue {
    pub fn components(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![("wce", self.wce), ("wiou", self.wiou)];
        if let Some(e) = self.e {
            out.push(("e", e));
        }
        out
    }
}

/// Weighted cross-entropy plus weighted IoU.
pub fn short_loss(pred: &MaskImage, gt: &MaskImage, cfg: &LossConfig) -> Result<LossValue> {
    let w = pixel_weights(gt, cfg)?;
    let wce = weighted_ce(pred, gt, &w, cfg.eps)?;
    let wiou = weighted_iou(pred, gt, &w, cfg.smooth)?;
    Ok(LossValue {
        wce,
        wiou,
        e: None,
        total: wce + wiou,
    })
}

/// [`short_loss`] plus the enhanced-alignment term.
pub fn hybrid_loss(pred: &MaskImage, gt: &MaskImage, cfg: &LossConfig) -> Result<LossValue> {
    let s = short_loss(pred, gt, cfg)?;
    let e = e_loss(pred, gt)?;
    Ok(LossValue {
        e: Some(e),
        total: s.wce + s.wiou + e,
        ..s
    })
}

/// Gradient of [`short_loss`] with respect to the prediction, row-major.
pub fn short_loss_grad(pred: &MaskImage, gt: &MaskImage, cfg: &LossConfig) -> Result<Vec<f64>> {
    let w = pixel_weights(gt, cfg)?;
    let a = weighted_ce_grad(pred, gt, &w, cfg.eps)?;
    let b = weighted_iou_grad(pred, gt, &w, cfg.smooth)?;
    Ok(a.into_iter().zip(b).map(|(x, y)| x + y).collect())
}

/// [`short_loss_grad`] as a `1×H×W` array.
pub fn short_loss_grad_array(pred: &MaskImage, gt: &MaskImage, cfg: &LossConfig) -> Result<DenseArray> {
    DenseArray::new(vec![1, gt.height(), gt.width()], short_loss_grad(pred, gt, cfg)?)
}
