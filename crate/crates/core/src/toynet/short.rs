//! Short-term detector: a strided-convolution encoder, one residual pair per
//! pyramid scale, the correlation pyramid, and a convolve-upsample-sum
//! decoder. The decoder sees the reference frame only through the aggregated
//! pyramid features, so everything it learns passes the correlation blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{relu, relu_backward, sigmoid, Conv, Residual, ResidualCache};
use crate::corrpyr::{self, CabCache, ChannelMixer, FeatureMap, PoolSchedule};
use crate::error::{dim_err, Result};
use crate::mask::MaskImage;
use crate::numerics::{self, DenseArray};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShortConfig {
    /// Channels at pyramid scales.
    pub channels: usize,
    /// Channels of the first encoder stage.
    pub low_channels: usize,
    pub decoder_channels: usize,
    pub schedule: PoolSchedule,
}

impl Default for ShortConfig {
    fn default() -> Self {
        Self {
            channels: 32,
            low_channels: 16,
            decoder_channels: 16,
            schedule: PoolSchedule::default(),
        }
    }
}

impl ShortConfig {
    /// Settings for 32×32 inputs, where scale-2 features are only 4×4 and the
    /// default pooling would not fit.
    pub fn toy() -> Self {
        Self {
            schedule: PoolSchedule([1, 1, 1]),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShortTermModel {
    pub config: ShortConfig,
    /// Stage 1: `3 → low`, 4×4 stride 4.
    pub stem: Conv,
    /// Stages 2–4: 2×2 stride 2.
    pub stages: [Conv; 3],
    pub tem: [Residual; 3],
    pub phi: [ChannelMixer; 3],
    /// `2C → C` merge of the t+1 and t+2 aggregations.
    pub fuse: [Conv; 3],
    pub decode: [Conv; 3],
    /// `D → 1` logit head.
    pub head: Conv,
}

impl ShortTermModel {
    pub fn new(config: ShortConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, lc, dc) = (config.channels, config.low_channels, config.decoder_channels);
        let stem = Conv::new(&mut rng, lc, 3, 4, 4, 0);
        let stages = [
            Conv::new(&mut rng, c, lc, 2, 2, 0),
            Conv::new(&mut rng, c, c, 2, 2, 0),
            Conv::new(&mut rng, c, c, 2, 2, 0),
        ];
        let tem = std::array::from_fn(|_| Residual::new(&mut rng, c));
        let phi = std::array::from_fn(|_| ChannelMixer::random(c, &mut rng));
        let fuse = std::array::from_fn(|_| Conv::new(&mut rng, c, 2 * c, 1, 1, 0));
        let decode = std::array::from_fn(|_| Conv::new(&mut rng, dc, c, 3, 1, 1));
        let head = Conv::new(&mut rng, 1, dc, 1, 1, 0);
        Self {
            config,
            stem,
            stages,
            tem,
            phi,
            fuse,
            decode,
            head,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            stem: self.stem.zeros_like(),
            stages: self.stages.each_ref().map(Conv::zeros_like),
            tem: self.tem.each_ref().map(Residual::zeros_like),
            phi: self.phi.each_ref().map(|p| ChannelMixer {
                weight: p.weight.zeros_like(),
                bias: p.bias.zeros_like(),
            }),
            fuse: self.fuse.each_ref().map(Conv::zeros_like),
            decode: self.decode.each_ref().map(Conv::zeros_like),
            head: self.head.zeros_like(),
        }
    }

    /// Every parameter tensor with a stable dotted name.
    pub fn params(&self) -> Vec<(String, &DenseArray)> {
        fn conv(name: String, c: &Conv) -> [(String, &DenseArray); 2] {
            [(format!("{name}.weight"), &c.weight), (format!("{name}.bias"), &c.bias)]
        }
        let Self {
            stem,
            stages,
            tem,
            phi,
            fuse,
            decode,
            head,
            ..
        } = self;
        let mut out = Vec::new();
        out.extend(conv("stem".into(), stem));
        for (i, s) in stages.iter().enumerate() {
            out.extend(conv(format!("stages.{i}"), s));
        }
        for (i, t) in tem.iter().enumerate() {
            out.extend(conv(format!("tem.{i}.reduce"), &t.reduce));
            out.extend(conv(format!("tem.{i}.expand"), &t.expand));
        }
        for (i, p) in phi.iter().enumerate() {
            out.push((format!("phi.{i}.weight"), &p.weight));
            out.push((format!("phi.{i}.bias"), &p.bias));
        }
        for (i, f) in fuse.iter().enumerate() {
            out.extend(conv(format!("fuse.{i}"), f));
        }
        for (i, d) in decode.iter().enumerate() {
            out.extend(conv(format!("decode.{i}"), d));
        }
        out.extend(conv("head".into(), head));
        out
    }

    /// Mutable counterpart of [`Self::params`], same order.
    pub fn params_mut(&mut self) -> Vec<(String, &mut DenseArray)> {
        fn conv<'a>(out: &mut Vec<(String, &'a mut DenseArray)>, name: String, c: &'a mut Conv) {
            out.push((format!("{name}.weight"), &mut c.weight));
            out.push((format!("{name}.bias"), &mut c.bias));
        }
        let Self {
            stem,
            stages,
            tem,
            phi,
            fuse,
            decode,
            head,
            ..
        } = self;
        let mut out = Vec::new();
        conv(&mut out, "stem".into(), stem);
        for (i, s) in stages.iter_mut().enumerate() {
            conv(&mut out, format!("stages.{i}"), s);
        }
        for (i, t) in tem.iter_mut().enumerate() {
            conv(&mut out, format!("tem.{i}.reduce"), &mut t.reduce);
            conv(&mut out, format!("tem.{i}.expand"), &mut t.expand);
        }
        for (i, p) in phi.iter_mut().enumerate() {
            out.push((format!("phi.{i}.weight"), &mut p.weight));
            out.push((format!("phi.{i}.bias"), &mut p.bias));
        }
        for (i, f) in fuse.iter_mut().enumerate() {
            conv(&mut out, format!("fuse.{i}"), f);
        }
        for (i, d) in decode.iter_mut().enumerate() {
            conv(&mut out, format!("decode.{i}"), d);
        }
        conv(&mut out, "head".into(), head);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }
}

/// Encoder outputs for one frame.
pub struct Encoded {
    /// Stage-1 features, `low×H/4×W/4`.
    pub low: DenseArray,
    /// Residual-refined features at scales 2, 3, 4.
    pub scales: [FeatureMap; 3],
    cache: EncoderCache,
}

struct EncoderCache {
    frame: DenseArray,
    stem_pre: DenseArray,
    stage_in: [DenseArray; 3],
    stage_pre: [DenseArray; 3],
    tem: [ResidualCache; 3],
}

fn check_frame(frame: &DenseArray) -> Result<(usize, usize)> {
    let (c, h, w) = frame.dims3()?;
    if c != 3 {
        return Err(dim_err!("frames must have 3 channels, got {c}"));
    }
    if h % 32 != 0 || w % 32 != 0 {
        return Err(dim_err!("frame {h}×{w} is not divisible by 32"));
    }
    Ok((h, w))
}

impl ShortTermModel {
    pub fn encode(&self, frame: &DenseArray) -> Result<Encoded> {
        check_frame(frame)?;
        let stem_pre = self.stem.forward(frame)?;
        let low = relu(&stem_pre);
        let mut x = low.clone();
        let mut stage_in = Vec::with_capacity(3);
        let mut stage_pre = Vec::with_capacity(3);
        let mut tem = Vec::with_capacity(3);
        let mut scales = Vec::with_capacity(3);
        for j in 0..3 {
            let pre = self.stages[j].forward(&x)?;
            let a = relu(&pre);
            let (t, tc) = self.tem[j].forward(&a)?;
            stage_in.push(std::mem::replace(&mut x, a));
            stage_pre.push(pre);
            tem.push(tc);
            scales.push(FeatureMap::new(t)?);
        }
        let arr = |v: Vec<DenseArray>| -> [DenseArray; 3] { v.try_into().expect("three stages") };
        Ok(Encoded {
            low,
            scales: scales.try_into().expect("three scales"),
            cache: EncoderCache {
                frame: frame.clone(),
                stem_pre,
                stage_in: arr(stage_in),
                stage_pre: arr(stage_pre),
                tem: tem.try_into().ok().expect("three residual caches"),
            },
        })
    }

    /// Backpropagates into the encoder; returns the gradient of the frame.
    fn encode_backward(
        &self,
        enc: &Encoded,
        d_scales: &[DenseArray; 3],
        grad: &mut ShortTermModel,
    ) -> Result<DenseArray> {
        let c = &enc.cache;
        // gradient arriving at the post-ReLU output of the deepest stage
        let mut d_next: Option<DenseArray> = None;
        for j in (0..3).rev() {
            let mut d_a = self.tem[j].backward(&c.tem[j], &d_scales[j], &mut grad.tem[j])?;
            if let Some(d) = d_next.take() {
                d_a = d_a.add(&d)?;
            }
            let d_pre = relu_backward(&c.stage_pre[j], &d_a)?;
            d_next = Some(self.stages[j].backward(&c.stage_in[j], &d_pre, &mut grad.stages[j])?);
        }
        let d_stem = relu_backward(&c.stem_pre, &d_next.expect("three stages"))?;
        self.stem.backward(&c.frame, &d_stem, &mut grad.stem)
    }
}

/// Everything the backward pass needs from [`ShortTermModel::forward`].
pub struct ShortForward {
    pub prediction: MaskImage,
    pub logits: DenseArray,
    encoded: Vec<Encoded>,
    cabs: Vec<[CabCache; 3]>,
    aggregated: Vec<[FeatureMap; 3]>,
    fused: [DenseArray; 3],
    decode_pre: [DenseArray; 3],
    summed: DenseArray,
    extent: (usize, usize),
}

impl ShortForward {
    pub fn encoded(&self) -> &[Encoded] {
        &self.encoded
    }

    /// Aggregated pyramid features per neighbour, scales 2, 3, 4.
    pub fn aggregated(&self) -> &[[FeatureMap; 3]] {
        &self.aggregated
    }
}

/// Parameter gradients plus gradients of the input frames `[t, t+1, t+2?]`.
pub struct ShortGrads {
    pub params: ShortTermModel,
    pub frames: Vec<DenseArray>,
}

impl ShortTermModel {
    /// Predicts the mask of `frame_t` from `frame_t` and one or two following
    /// frames.
    pub fn forward(
        &self,
        frame_t: &DenseArray,
        frame_t1: &DenseArray,
        frame_t2: Option<&DenseArray>,
    ) -> Result<ShortForward> {
        let (h, w) = check_frame(frame_t)?;
        for f in std::iter::once(frame_t1).chain(frame_t2) {
            if check_frame(f)? != (h, w) {
                return Err(dim_err!("frames differ in size"));
            }
        }
        let frames: Vec<&DenseArray> = std::iter::once(frame_t)
            .chain(std::iter::once(frame_t1))
            .chain(frame_t2)
            .collect();
        let encoded = frames.iter().map(|f| self.encode(f)).collect::<Result<Vec<_>>>()?;
        let reference = &encoded[0];

        let mut cabs: Vec<[CabCache; 3]> = Vec::new();
        let mut aggregated: Vec<[FeatureMap; 3]> = Vec::new();
        for nbr in &encoded[1..] {
            let mut cs = Vec::with_capacity(3);
            let mut ag = Vec::with_capacity(3);
            for j in 0..3 {
                let (a, c) = corrpyr::cab_forward(
                    &reference.scales[j],
                    &nbr.scales[j],
                    &self.phi[j],
                    self.config.schedule.0[j],
                )?;
                cs.push(c);
                ag.push(a);
            }
            cabs.push(cs.try_into().unwrap_or_else(|_| unreachable!("three scales")));
            aggregated.push(ag.try_into().expect("three scales"));
        }

        // decoded maps meet at the finest pyramid scale
        let (lh, lw) = corrpyr::stage_extent(h, w, corrpyr::PYRAMID_SCALES[0]);
        let mut summed = DenseArray::zeros(&[self.config.decoder_channels, lh, lw]);
        let mut fused = Vec::with_capacity(3);
        let mut decode_pre = Vec::with_capacity(3);
        for j in 0..3 {
            let f = if aggregated.len() == 2 {
                let stacked = numerics::concat_channels(&[aggregated[0][j].array(), aggregated[1][j].array()])?;
                self.fuse[j].forward(&stacked)?
            } else {
                aggregated[0][j].array().clone()
            };
            let pre = self.decode[j].forward(&f)?;
            let up = numerics::resize_bilinear(&relu(&pre), lh, lw)?;
            summed = summed.add(&up)?;
            fused.push(f);
            decode_pre.push(pre);
        }
        let small = self.head.forward(&summed)?;
        let logits = numerics::resize_bilinear(&small, h, w)?;
        let probs = logits.data().iter().map(|&v| sigmoid(v)).collect();
        Ok(ShortForward {
            prediction: MaskImage::probability(h, w, probs)?,
            logits,
            encoded,
            cabs,
            aggregated,
            fused: fused.try_into().expect("three scales"),
            decode_pre: decode_pre.try_into().expect("three scales"),
            summed,
            extent: (h, w),
        })
    }

    /// Backpropagates `d_pred` (gradient w.r.t. the probability map). With
    /// `freeze_motion` no gradient passes through the correlation blocks, so φ
    /// and the correlation path stay untouched.
    pub fn backward(&self, fwd: &ShortForward, d_pred: &DenseArray, freeze_motion: bool) -> Result<ShortGrads> {
        let (h, w) = fwd.extent;
        d_pred.expect_shape(&[1, h, w])?;
        let mut grad = self.zeros_like();
        let d_logits = d_pred.zip_with(&fwd.logits, |g, z| {
            let p = sigmoid(z);
            g * p * (1.0 - p)
        })?;
        let (lh, lw) = corrpyr::stage_extent(h, w, corrpyr::PYRAMID_SCALES[0]);
        let d_small = numerics::resize_bilinear_backward(&d_logits, lh, lw)?;
        let d_summed = self.head.backward(&fwd.summed, &d_small, &mut grad.head)?;

        let n_nbr = fwd.encoded.len() - 1;
        let mut d_scales: Vec<[DenseArray; 3]> = fwd
            .encoded
            .iter()
            .map(|e| e.scales.each_ref().map(|s| s.array().zeros_like()))
            .collect();
        for j in 0..3 {
            let (_, sh, sw) = fwd.decode_pre[j].dims3()?;
            let d_up = numerics::resize_bilinear_backward(&d_summed, sh, sw)?;
            let d_pre = relu_backward(&fwd.decode_pre[j], &d_up)?;
            let d_fused = self.decode[j].backward(&fwd.fused[j], &d_pre, &mut grad.decode[j])?;
            let d_agg: Vec<DenseArray> = if n_nbr == 2 {
                let c = self.config.channels;
                let stacked = numerics::concat_channels(&[fwd.aggregated[0][j].array(), fwd.aggregated[1][j].array()])?;
                let d_stacked = self.fuse[j].backward(&stacked, &d_fused, &mut grad.fuse[j])?;
                numerics::split_channels(&d_stacked, &[c, c])?
            } else {
                vec![d_fused]
            };
            if freeze_motion {
                continue;
            }
            for (n, d) in d_agg.iter().enumerate() {
                let g = corrpyr::cab_backward(&fwd.cabs[n][j], d)?;
                d_scales[0][j].axpy(1.0, &g.d_ref)?;
                d_scales[n + 1][j].axpy(1.0, &g.d_nbr)?;
                grad.phi[j].weight.axpy(1.0, &g.d_phi_weight)?;
                grad.phi[j].bias.axpy(1.0, &g.d_phi_bias)?;
            }
        }

        let mut frames = Vec::with_capacity(fwd.encoded.len());
        for (enc, d) in fwd.encoded.iter().zip(&d_scales) {
            frames.push(self.encode_backward(enc, d, &mut grad)?);
        }
        Ok(ShortGrads { params: grad, frames })
    }

    /// Prediction for `frame_t` only.
    pub fn predict(
        &self,
        frame_t: &DenseArray,
        frame_t1: &DenseArray,
        frame_t2: Option<&DenseArray>,
    ) -> Result<MaskImage> {
        Ok(self.forward(frame_t, frame_t1, frame_t2)?.prediction)
    }
}
