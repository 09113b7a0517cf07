//! All-pairs feature correlation, the correlation aggregation block (CAB) and
//! the three-level correlation pyramid.
//!
//! For a reference feature map `f_ref` (`C×H_r×W_r`) and a neighbour map
//! `f_nbr` (`C×H_n×W_n`) the raw volume is
//!
//! ```text
//! vol[x, y, u, v] = exp( Σ_c f_ref[c, x, y] · f_nbr[c, u, v] )
//! ```
//!
//! normalised over `(u, v)` so every reference position carries a convex
//! weighting of neighbour positions. The CAB max-pools the neighbour, projects
//! it with a 1×1 channel mixer φ and returns the φ-features gathered by those
//! weights. [`cab_backward`] is the hand-derived adjoint of the whole block.

use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::numerics::{self, DenseArray};
use crate::par;

/// A `C×H×W` feature map.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap(DenseArray);

impl FeatureMap {
    pub fn new(values: DenseArray) -> Result<Self> {
        values.dims3()?;
        if !values.is_finite() {
            return Err(Error::NonFinite("feature map".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self(DenseArray::zeros(&[c, h, w]))
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[2]
    }

    fn plane(&self) -> usize {
        self.height() * self.width()
    }

    pub fn array(&self) -> &DenseArray {
        &self.0
    }

    pub fn into_array(self) -> DenseArray {
        self.0
    }
}

/// Correlation between every reference position and every neighbour position.
///
/// `values` has shape `[H_r, W_r, H_n, W_n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationVolume {
    pub ref_extent: (usize, usize),
    pub nbr_extent: (usize, usize),
    pub values: DenseArray,
    pub normalized: bool,
}

impl CorrelationVolume {
    fn slice_len(&self) -> usize {
        self.nbr_extent.0 * self.nbr_extent.1
    }

    /// Weights assigned by reference position `(x, y)` to the neighbour grid.
    pub fn slice(&self, x: usize, y: usize) -> &[f64] {
        let n = self.slice_len();
        let p = x * self.ref_extent.1 + y;
        &self.values.data()[p * n..(p + 1) * n]
    }

    /// Sum of each `(x, y)` slice, reference positions in row-major order.
    pub fn slice_sums(&self) -> Vec<f64> {
        self.values
            .data()
            .chunks(self.slice_len())
            .map(|s| s.iter().sum())
            .collect()
    }
}

fn check_channels(a: &FeatureMap, b: &FeatureMap) -> Result<()> {
    if a.channels() != b.channels() {
        return Err(dim_err!(
            "reference has {} channels, neighbour has {}",
            a.channels(),
            b.channels()
        ));
    }
    Ok(())
}

/// Channel dot products, `P_r×P_n` row-major.
fn correlation_logits(f_ref: &FeatureMap, f_nbr: &FeatureMap) -> Vec<f64> {
    let c = f_ref.channels();
    let (pr, pn) = (f_ref.plane(), f_nbr.plane());
    let r = f_ref.array().data();
    let n = f_nbr.array().data();
    let rows = par::map_range(pr, |p| {
        let mut row = vec![0.0; pn];
        for ch in 0..c {
            let a = r[ch * pr + p];
            if a == 0.0 {
                continue;
            }
            for (o, &b) in row.iter_mut().zip(&n[ch * pn..(ch + 1) * pn]) {
                *o += a * b;
            }
        }
        row
    });
    rows.concat()
}

fn volume_from(f_ref: &FeatureMap, f_nbr: &FeatureMap, data: Vec<f64>, normalized: bool) -> Result<CorrelationVolume> {
    Ok(CorrelationVolume {
        ref_extent: (f_ref.height(), f_ref.width()),
        nbr_extent: (f_nbr.height(), f_nbr.width()),
        values: DenseArray::new(vec![f_ref.height(), f_ref.width(), f_nbr.height(), f_nbr.width()], data)?,
        normalized,
    })
}

/// Unnormalised volume, evaluated literally as an exponential. Fails with
/// [`Error::NonFinite`] when a dot product overflows; use
/// [`normalized_correlation`] for arbitrary features.
pub fn correlation_volume(f_ref: &FeatureMap, f_nbr: &FeatureMap) -> Result<CorrelationVolume> {
    check_channels(f_ref, f_nbr)?;
    let data: Vec<f64> = correlation_logits(f_ref, f_nbr).into_iter().map(f64::exp).collect();
    if data.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::NonFinite(
            "correlation exponent out of range; use the stabilized path".into(),
        ));
    }
    volume_from(f_ref, f_nbr, data, false)
}

/// Divides every `(x, y)` slice by its sum.
pub fn normalize_volume(vol: &CorrelationVolume) -> Result<CorrelationVolume> {
    if vol.normalized {
        return Err(Error::Contract("volume is already normalized".into()));
    }
    let n = vol.slice_len();
    let mut out = vol.clone();
    par::for_each_chunk_mut(out.values.data_mut(), n, |_, s| {
        let total: f64 = s.iter().sum();
        s.iter_mut().for_each(|v| *v /= total);
    });
    out.normalized = true;
    Ok(out)
}

/// Row-wise softmax with the row max subtracted before exponentiation.
fn softmax_rows(logits: &mut [f64], n: usize) {
    par::for_each_chunk_mut(logits, n, |_, row| {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    });
}

/// Normalised volume computed with max-subtracted exponentials. Identical to
/// `normalize_volume(correlation_volume(..))` wherever the latter is finite.
pub fn normalized_correlation(f_ref: &FeatureMap, f_nbr: &FeatureMap) -> Result<CorrelationVolume> {
    check_channels(f_ref, f_nbr)?;
    let mut data = correlation_logits(f_ref, f_nbr);
    softmax_rows(&mut data, f_nbr.plane());
    volume_from(f_ref, f_nbr, data, true)
}

/// `out[c, x, y] = Σ_{u,v} vol[x, y, u, v] · g[c, u, v]`
pub fn aggregate(vol: &CorrelationVolume, g: &FeatureMap) -> Result<FeatureMap> {
    if !vol.normalized {
        return Err(Error::Contract("aggregation needs a normalized volume".into()));
    }
    if (g.height(), g.width()) != vol.nbr_extent {
        return Err(dim_err!(
            "features are {}×{}, volume neighbour grid is {:?}",
            g.height(),
            g.width(),
            vol.nbr_extent
        ));
    }
    let (hr, wr) = vol.ref_extent;
    let out = aggregate_raw(vol.values.data(), g.array().data(), g.channels(), hr * wr, g.plane());
    FeatureMap::new(DenseArray::new(vec![g.channels(), hr, wr], out)?)
}

fn aggregate_raw(attn: &[f64], g: &[f64], c: usize, pr: usize, pn: usize) -> Vec<f64> {
    let per_channel = par::map_range(c, |ch| {
        let gc = &g[ch * pn..(ch + 1) * pn];
        (0..pr)
            .map(|p| {
                attn[p * pn..(p + 1) * pn]
                    .iter()
                    .zip(gc)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
    });
    per_channel.concat()
}

/// The learnable 1×1 convolution φ applied to pooled neighbour features.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMixer {
    /// `C_out×C_in×1×1`
    pub weight: DenseArray,
    /// `C_out`
    pub bias: DenseArray,
}

impl ChannelMixer {
    pub fn identity(c: usize) -> Self {
        Self {
            weight: DenseArray::from_fn(&[c, c, 1, 1], |i| if i / c == i % c { 1.0 } else { 0.0 }),
            bias: DenseArray::zeros(&[c]),
        }
    }

    pub fn random(c: usize, rng: &mut impl Rng) -> Self {
        let scale = (1.0 / c as f64).sqrt();
        Self {
            weight: DenseArray::from_fn(&[c, c, 1, 1], |_| rng.gen_range(-scale..scale)),
            bias: DenseArray::zeros(&[c]),
        }
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, x: &DenseArray) -> Result<DenseArray> {
        numerics::conv2d(x, &self.weight, Some(&self.bias), 1, 0)
    }
}

/// Intermediates of one [`cab_forward`] call.
#[derive(Clone, Debug)]
pub struct CabCache {
    f_ref: FeatureMap,
    nbr_shape: Vec<usize>,
    pooled: DenseArray,
    pool_indices: Vec<usize>,
    attn: Vec<f64>,
    projected: DenseArray,
    phi: ChannelMixer,
}

impl CabCache {
    /// Normalised volume used by the forward pass.
    pub fn volume(&self) -> CorrelationVolume {
        let (_, hn, wn) = self.pooled.dims3().expect("pooled map is 3-D");
        CorrelationVolume {
            ref_extent: (self.f_ref.height(), self.f_ref.width()),
            nbr_extent: (hn, wn),
            values: DenseArray::new(vec![self.f_ref.height(), self.f_ref.width(), hn, wn], self.attn.clone())
                .expect("cached volume shape"),
            normalized: true,
        }
    }
}

/// Gradients returned by [`cab_backward`].
#[derive(Clone, Debug)]
pub struct CabGrads {
    pub d_ref: DenseArray,
    pub d_nbr: DenseArray,
    pub d_phi_weight: DenseArray,
    pub d_phi_bias: DenseArray,
}

/// Correlation aggregation block: pool the neighbour by `pool_k`, correlate it
/// with the full-resolution reference, normalise, and gather `φ(pooled)`.
pub fn cab_forward(
    f_ref: &FeatureMap,
    f_nbr: &FeatureMap,
    phi: &ChannelMixer,
    pool_k: usize,
) -> Result<(FeatureMap, CabCache)> {
    check_channels(f_ref, f_nbr)?;
    if phi.channels() != f_ref.channels() || phi.weight.shape()[1] != f_ref.channels() {
        return Err(dim_err!(
            "φ maps {}→{} channels, features have {}",
            phi.weight.shape()[1],
            phi.channels(),
            f_ref.channels()
        ));
    }
    let (pooled, pool_indices) = numerics::max_pool2d_with_indices(f_nbr.array(), pool_k, pool_k)?;
    let pooled_map = FeatureMap::new(pooled)?;
    let mut attn = correlation_logits(f_ref, &pooled_map);
    let pn = pooled_map.plane();
    softmax_rows(&mut attn, pn);
    let projected = phi.apply(pooled_map.array())?;
    let out = aggregate_raw(&attn, projected.data(), phi.channels(), f_ref.plane(), pn);
    let out = FeatureMap::new(DenseArray::new(
        vec![phi.channels(), f_ref.height(), f_ref.width()],
        out,
    )?)?;
    let cache = CabCache {
        f_ref: f_ref.clone(),
        nbr_shape: f_nbr.array().shape().to_vec(),
        pooled: pooled_map.into_array(),
        pool_indices,
        attn,
        projected,
        phi: phi.clone(),
    };
    Ok((out, cache))
}

/// Adjoint of [`cab_forward`] for an output cotangent `d_out`.
pub fn cab_backward(cache: &CabCache, d_out: &DenseArray) -> Result<CabGrads> {
    let c_out = cache.phi.channels();
    let (c, hr, wr) = cache.f_ref.array().dims3()?;
    if d_out.shape() != [c_out, hr, wr] {
        return Err(Error::Contract(format!(
            "cotangent shape {:?} does not match cached output [{c_out}, {hr}, {wr}]",
            d_out.shape()
        )));
    }
    let pr = hr * wr;
    let pn = cache.projected.len() / c_out;
    let dy = d_out.data();
    let g = cache.projected.data();
    let attn = &cache.attn;
    let pooled = cache.pooled.data();
    let fr = cache.f_ref.array().data();

    // d logits, one reference row at a time
    let d_logits: Vec<f64> = par::map_range(pr, |p| {
        let a = &attn[p * pn..(p + 1) * pn];
        let mut da = vec![0.0; pn];
        for ch in 0..c_out {
            let gy = dy[ch * pr + p];
            if gy == 0.0 {
                continue;
            }
            for (d, &gv) in da.iter_mut().zip(&g[ch * pn..(ch + 1) * pn]) {
                *d += gy * gv;
            }
        }
        let dot: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
        a.iter().zip(&da).map(|(x, y)| x * (y - dot)).collect::<Vec<_>>()
    })
    .concat();

    // d projected[c, q] = Σ_p attn[p, q] · dy[c, p]
    let d_proj = par::map_range(c_out, |ch| {
        let mut row = vec![0.0; pn];
        for p in 0..pr {
            let gy = dy[ch * pr + p];
            if gy == 0.0 {
                continue;
            }
            for (d, &a) in row.iter_mut().zip(&attn[p * pn..(p + 1) * pn]) {
                *d += gy * a;
            }
        }
        row
    })
    .concat();
    let d_proj = DenseArray::new(cache.projected.shape().to_vec(), d_proj)?;
    let (mut d_pooled, d_phi_weight, d_phi_bias) =
        numerics::conv2d_backward(&cache.pooled, &cache.phi.weight, &d_proj, 1, 0)?;

    let d_ref = par::map_range(c, |ch| {
        let pc = &pooled[ch * pn..(ch + 1) * pn];
        (0..pr)
            .map(|p| {
                d_logits[p * pn..(p + 1) * pn]
                    .iter()
                    .zip(pc)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
    })
    .concat();
    let d_ref = DenseArray::new(vec![c, hr, wr], d_ref)?;

    let from_logits = par::map_range(c, |ch| {
        let mut row = vec![0.0; pn];
        for p in 0..pr {
            let f = fr[ch * pr + p];
            if f == 0.0 {
                continue;
            }
            for (d, &l) in row.iter_mut().zip(&d_logits[p * pn..(p + 1) * pn]) {
                *d += f * l;
            }
        }
        row
    })
    .concat();
    for (d, v) in d_pooled.data_mut().iter_mut().zip(from_logits) {
        *d += v;
    }
    let d_nbr = numerics::max_pool2d_backward(&d_pooled, &cache.pool_indices, &cache.nbr_shape)?;

    Ok(CabGrads {
        d_ref,
        d_nbr,
        d_phi_weight,
        d_phi_bias,
    })
}

/// Pool factor used at pyramid scales 2, 3 and 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSchedule(pub [usize; 3]);

impl Default for PoolSchedule {
    /// Largest pooling at the finest scale: 8, 4, 2.
    fn default() -> Self {
        Self([8, 4, 2])
    }
}

/// Scale indices covered by the pyramid.
pub const PYRAMID_SCALES: [usize; 3] = [2, 3, 4];

/// Spatial extent of encoder stage `i` for an `h×w` input.
pub fn stage_extent(h: usize, w: usize, stage: usize) -> (usize, usize) {
    (h >> (stage + 1), w >> (stage + 1))
}

#[derive(Clone, Debug)]
pub struct PyramidLevel {
    pub scale: usize,
    /// Reference aggregated from frame t+1.
    pub next: FeatureMap,
    /// Reference aggregated from frame t+2, when supplied.
    pub second: Option<FeatureMap>,
}

#[derive(Clone, Debug)]
pub struct CorrelationPyramid {
    pub levels: Vec<PyramidLevel>,
}

/// Per-scale feature maps for one frame, ordered as [`PYRAMID_SCALES`].
pub type ScaleFeatures = [FeatureMap; 3];

/// Runs the CAB at every pyramid scale. `input_hw` is the frame size the
/// features were extracted from; it must be divisible by 32 and each scale
/// must match `H/2^(i+1) × W/2^(i+1)`.
pub fn build_pyramid(
    input_hw: (usize, usize),
    reference: &ScaleFeatures,
    next: &ScaleFeatures,
    second: Option<&ScaleFeatures>,
    phis: &[ChannelMixer; 3],
    schedule: PoolSchedule,
) -> Result<CorrelationPyramid> {
    let (h, w) = input_hw;
    if h % 32 != 0 || w % 32 != 0 || h == 0 || w == 0 {
        return Err(dim_err!("input {h}×{w} is not divisible by 32"));
    }
    let frames = std::iter::once(reference).chain(std::iter::once(next)).chain(second);
    for feats in frames {
        for (j, f) in feats.iter().enumerate() {
            let want = stage_extent(h, w, PYRAMID_SCALES[j]);
            if (f.height(), f.width()) != want {
                return Err(dim_err!(
                    "scale {} features are {}×{}, expected {}×{}",
                    PYRAMID_SCALES[j],
                    f.height(),
                    f.width(),
                    want.0,
                    want.1
                ));
            }
        }
    }
    let levels = par::map_range(3, |j| -> Result<PyramidLevel> {
        let k = schedule.0[j];
        let (a, _) = cab_forward(&reference[j], &next[j], &phis[j], k)?;
        let b = match second {
            Some(s) => Some(cab_forward(&reference[j], &s[j], &phis[j], k)?.0),
            None => None,
        };
        Ok(PyramidLevel {
            scale: PYRAMID_SCALES[j],
            next: a,
            second: b,
        })
    });
    Ok(CorrelationPyramid {
        levels: levels.into_iter().collect::<Result<_>>()?,
    })
}
