//! Flow-based pseudo labels for unannotated frames.
//!
//! An annotated mask of frame `t` is pulled onto frame `t+n` by inverse
//! warping, re-binarised, and pixels whose flow fails the forward-backward
//! round trip are cleared to background.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{dim_err, Error, Result};
use crate::mask::{MaskImage, MaskKind};
use crate::numerics::{self, DenseArray};
use crate::par;

const FLO_MAGIC: &[u8; 4] = b"PIEH";

/// Dense per-pixel displacement in pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    /// Horizontal component, row-major.
    ux: Vec<f64>,
    /// Vertical component, row-major.
    uy: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || ux.len() != height * width || uy.len() != ux.len() {
            return Err(dim_err!("flow components do not cover {height}×{width}"));
        }
        if ux.iter().chain(&uy).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow vector".into()));
        }
        Ok(Self { height, width, ux, uy })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, 0.0, 0.0)
    }

    pub fn constant(height: usize, width: usize, dx: f64, dy: f64) -> Self {
        Self {
            height,
            width,
            ux: vec![dx; height * width],
            uy: vec![dy; height * width],
        }
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn ux(&self) -> &[f64] {
        &self.ux
    }

    pub fn uy(&self) -> &[f64] {
        &self.uy
    }

    /// Positions `(x + ux, y + uy)` for every pixel, row-major.
    fn targets(&self) -> Vec<[f64; 2]> {
        (0..self.height * self.width)
            .map(|i| {
                let (y, x) = (i / self.width, i % self.width);
                [x as f64 + self.ux[i], y as f64 + self.uy[i]]
            })
            .collect()
    }

    fn as_array(&self) -> DenseArray {
        let mut data = self.ux.clone();
        data.extend_from_slice(&self.uy);
        DenseArray::new(vec![2, self.height, self.width], data).expect("flow extents")
    }
}

/// Parses the Middlebury `.flo` layout: `PIEH`, little-endian `i32` width and
/// height, then interleaved `(u, v)` `f32` pairs in row-major order.
pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 || &bytes[..4] != FLO_MAGIC {
        return Err(Error::Format("missing PIEH tag".into()));
    }
    let word = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (w, h) = (word(4), word(8));
    if w <= 0 || h <= 0 {
        return Err(Error::Format(format!("invalid flow extent {w}×{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + 8 * w * h;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{w}×{h} flow needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let mut ux = Vec::with_capacity(w * h);
    let mut uy = Vec::with_capacity(w * h);
    for pair in bytes[12..].chunks_exact(8) {
        ux.push(f32::from_le_bytes(pair[..4].try_into().unwrap()) as f64);
        uy.push(f32::from_le_bytes(pair[4..].try_into().unwrap()) as f64);
    }
    FlowField::new(h, w, ux, uy)
}

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * flow.ux.len());
    out.extend_from_slice(FLO_MAGIC);
    out.extend_from_slice(&(flow.width as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height as i32).to_le_bytes());
    for (u, v) in flow.ux.iter().zip(&flow.uy) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn read_flow_file(path: impl AsRef<Path>) -> Result<FlowField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_flow(&bytes)
}

pub fn write_flow_file(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_flow(flow))?;
    Ok(())
}

/// Pulls `mask` along `flow`: `out(x, y) = mask(x + ux(x, y), y + uy(x, y))`,
/// bilinearly interpolated and clamped at the border.
pub fn warp_mask(mask: &MaskImage, flow: &FlowField) -> Result<MaskImage> {
    if mask.extent() != flow.extent() {
        return Err(dim_err!(
            "mask {:?} and flow {:?} differ in extent",
            mask.extent(),
            flow.extent()
        ));
    }
    let (h, w) = mask.extent();
    let out = numerics::bilinear_sample(&mask.to_array(), &flow.targets(), h, w)?;
    // convex combinations of [0,1] values; clamp away rounding overshoot
    let values = out.into_data().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    MaskImage::new(h, w, values, MaskKind::Probability)
}

/// Binary `H×W` map, 1 where the flow round trip is consistent.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidityMask(MaskImage);

impl ValidityMask {
    pub fn mask(&self) -> &MaskImage {
        &self.0
    }

    pub fn valid_ratio(&self) -> f64 {
        self.0.values().iter().sum::<f64>() / self.0.values().len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self { alpha: 0.01, beta: 0.5 }
    }
}

/// Forward-backward check on the grid of `first`: with `b = second` sampled at
/// `p + first(p)`, pixel `p` is valid iff
/// `|first(p) + b|² <= alpha·(|first(p)|² + |b|²) + beta`.
pub fn fb_consistency(first: &FlowField, second: &FlowField, params: ConsistencyParams) -> Result<ValidityMask> {
    if first.extent() != second.extent() {
        return Err(dim_err!(
            "flows {:?} and {:?} differ in extent",
            first.extent(),
            second.extent()
        ));
    }
    if !(params.alpha >= 0.0 && params.beta >= 0.0) {
        return Err(Error::Input(format!(
            "alpha and beta must be non-negative, got {} and {}",
            params.alpha, params.beta
        )));
    }
    let (h, w) = first.extent();
    let back = numerics::bilinear_sample(&second.as_array(), &first.targets(), h, w)?;
    let (bx, by) = back.data().split_at(h * w);
    let values = (0..h * w)
        .map(|i| {
            let (fx, fy) = (first.ux[i], first.uy[i]);
            let (sx, sy) = (fx + bx[i], fy + by[i]);
            let residual = sx * sx + sy * sy;
            let bound = params.alpha * (fx * fx + fy * fy + bx[i] * bx[i] + by[i] * by[i]) + params.beta;
            if residual <= bound {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(ValidityMask(MaskImage::new(h, w, values, MaskKind::Binary)?))
}

/// Flows linking the annotated frame `t` with frame `t+n`.
#[derive(Clone, Debug)]
pub struct OffsetFlows {
    /// Defined on frame `t+n`, pointing into frame `t`. Drives the warp.
    pub target_to_ref: FlowField,
    /// Defined on frame `t`, pointing into frame `t+n`. Closes the round trip.
    pub ref_to_target: FlowField,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoParams {
    pub binarize_threshold: f64,
    pub consistency: ConsistencyParams,
}

impl Default for PseudoParams {
    fn default() -> Self {
        Self {
            binarize_threshold: 0.5,
            consistency: ConsistencyParams::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PseudoMask {
    pub offset: usize,
    pub mask: MaskImage,
    pub validity: ValidityMask,
}

pub const MAX_OFFSET: usize = 4;

/// Pseudo masks for frames `t+1 ..= t+flows.len()` (at most four).
pub fn generate_pseudo_masks(gt: &MaskImage, flows: &[OffsetFlows], params: PseudoParams) -> Result<Vec<PseudoMask>> {
    if gt.kind() != MaskKind::Binary {
        return Err(Error::Input("ground truth must be a binary mask".into()));
    }
    if flows.is_empty() || flows.len() > MAX_OFFSET {
        return Err(Error::Input(format!(
            "need flows for 1..={MAX_OFFSET} offsets, got {}",
            flows.len()
        )));
    }
    if !(params.binarize_threshold > 0.0 && params.binarize_threshold < 1.0) {
        return Err(Error::Input(format!(
            "binarization threshold {} outside (0, 1)",
            params.binarize_threshold
        )));
    }
    let results = par::map_range(flows.len(), |i| -> Result<PseudoMask> {
        let f = &flows[i];
        let warped = warp_mask(gt, &f.target_to_ref)?;
        let validity = fb_consistency(&f.target_to_ref, &f.ref_to_target, params.consistency)?;
        let bin = warped.binarize(params.binarize_threshold);
        let values = bin
            .values()
            .iter()
            .zip(validity.mask().values())
            .map(|(m, v)| m * v)
            .collect();
        Ok(PseudoMask {
            offset: i + 1,
            mask: MaskImage::binary(gt.height(), gt.width(), values)?,
            validity,
        })
    });
    results.into_iter().collect()
}
