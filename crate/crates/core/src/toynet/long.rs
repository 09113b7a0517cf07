//! Long-term refinement: every pixel of every frame attends to its K most
//! relevant positions inside a spatio-temporal window of the clip.

use rand::Rng;

use crate::error::{dim_err, Error, Result};
use crate::mask::MaskImage;
use crate::numerics::DenseArray;
use crate::par;

use super::layers::sigmoid;
use super::short::ShortTermModel;

/// Input channels per frame: RGB plus the short-term prediction.
pub const LONG_INPUT_CHANNELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LongTermConfig {
    /// Frames either side of the query; `None` covers the whole clip.
    pub temporal_radius: Option<usize>,
    /// Chebyshev radius in pixels.
    pub spatial_radius: usize,
    pub top_k: usize,
}

impl Default for LongTermConfig {
    fn default() -> Self {
        Self {
            temporal_radius: None,
            spatial_radius: 4,
            top_k: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LongTermModel {
    pub config: LongTermConfig,
    /// `dim×4`
    pub query: DenseArray,
    /// `dim×4`
    pub key: DenseArray,
    /// `1×4`
    pub value: DenseArray,
    pub value_bias: f64,
}

impl LongTermModel {
    pub fn new(config: LongTermConfig, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let bound = 0.5;
        let mut proj = |rows| DenseArray::from_fn(&[rows, LONG_INPUT_CHANNELS], |_| rng.gen_range(-bound..bound));
        let (query, key, value) = (proj(dim), proj(dim), proj(1));
        Self::from_parts(config, query, key, value, 0.0)
    }

    /// Query and key pass the input through unchanged; the value reads the
    /// prediction channel.
    pub fn identity(config: LongTermConfig) -> Result<Self> {
        let n = LONG_INPUT_CHANNELS;
        let eye = DenseArray::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 });
        let value = DenseArray::new(vec![1, n], vec![0.0, 0.0, 0.0, 1.0])?;
        Self::from_parts(config, eye.clone(), eye, value, 0.0)
    }

    pub fn from_parts(
        config: LongTermConfig,
        query: DenseArray,
        key: DenseArray,
        value: DenseArray,
        value_bias: f64,
    ) -> Result<Self> {
        if config.top_k == 0 {
            return Err(Error::Input("top_k must be at least 1".into()));
        }
        let dim = query.shape().first().copied().unwrap_or(0);
        query.expect_shape(&[dim, LONG_INPUT_CHANNELS])?;
        key.expect_shape(&[dim, LONG_INPUT_CHANNELS])?;
        value.expect_shape(&[1, LONG_INPUT_CHANNELS])?;
        if dim == 0 {
            return Err(dim_err!("projection dimension must be positive"));
        }
        Ok(Self {
            config,
            query,
            key,
            value,
            value_bias,
        })
    }

    pub fn dim(&self) -> usize {
        self.query.shape()[0]
    }
}

/// `T×4×H×W`: frames with their prediction maps stacked on channels.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    values: DenseArray,
}

impl SequenceBatch {
    pub fn new(values: DenseArray) -> Result<Self> {
        let s = values.shape();
        if s.len() != 4 || s[1] != LONG_INPUT_CHANNELS {
            return Err(dim_err!("sequence batch must be T×4×H×W, got {s:?}"));
        }
        if s[0] < 2 {
            return Err(dim_err!("sequence batch needs at least 2 frames, got {}", s[0]));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("sequence batch".into()));
        }
        Ok(Self { values })
    }

    /// Stacks `3×H×W` frames with their `H×W` predictions.
    pub fn stack(frames: &[DenseArray], predictions: &[MaskImage]) -> Result<Self> {
        if frames.len() != predictions.len() {
            return Err(dim_err!(
                "{} frames but {} predictions",
                frames.len(),
                predictions.len()
            ));
        }
        let Some(first) = frames.first() else {
            return Err(dim_err!("empty sequence"));
        };
        let (_, h, w) = first.dims3()?;
        let mut data = Vec::with_capacity(frames.len() * LONG_INPUT_CHANNELS * h * w);
        for (f, p) in frames.iter().zip(predictions) {
            f.expect_shape(&[3, h, w])?;
            if p.extent() != (h, w) {
                return Err(dim_err!("prediction {:?} does not match frame {h}×{w}", p.extent()));
            }
            data.extend_from_slice(f.data());
            data.extend_from_slice(p.values());
        }
        Self::new(DenseArray::new(vec![frames.len(), LONG_INPUT_CHANNELS, h, w], data)?)
    }

    pub fn frames(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn extent(&self) -> (usize, usize) {
        (self.values.shape()[2], self.values.shape()[3])
    }

    pub fn values(&self) -> &DenseArray {
        &self.values
    }

    fn pixel(&self, t: usize, c: usize, y: usize, x: usize) -> f64 {
        let (h, w) = self.extent();
        self.values.data()[((t * LONG_INPUT_CHANNELS + c) * h + y) * w + x]
    }
}

/// Attended `(t, y, x)` positions with their weights for one query.
pub type AttentionRow = Vec<((usize, usize, usize), f64)>;

pub struct LongOutput {
    pub predictions: Vec<MaskImage>,
    /// Per query `(t, y, x)` in row-major order: attended `(t, y, x)` with weight.
    pub attention: Vec<AttentionRow>,
    /// Set when some query's neighbourhood held fewer than K positions.
    pub clipped: bool,
}

/// Positions a query at `(t, y, x)` may attend to.
pub fn neighbourhood(
    cfg: &LongTermConfig,
    frames: usize,
    extent: (usize, usize),
    t: usize,
    y: usize,
    x: usize,
) -> impl Iterator<Item = (usize, usize, usize)> {
    let (h, w) = extent;
    let rt = cfg.temporal_radius.unwrap_or(frames);
    let r = cfg.spatial_radius;
    let ts = t.saturating_sub(rt)..=(t + rt).min(frames - 1);
    let ys = y.saturating_sub(r)..=(y + r).min(h - 1);
    let xs = x.saturating_sub(r)..=(x + r).min(w - 1);
    ts.flat_map(move |tt| {
        let xs = xs.clone();
        ys.clone().flat_map(move |yy| xs.clone().map(move |xx| (tt, yy, xx)))
    })
}

fn project(m: &DenseArray, input: &[f64; LONG_INPUT_CHANNELS]) -> Vec<f64> {
    m.data()
        .chunks(LONG_INPUT_CHANNELS)
        .map(|row| row.iter().zip(input).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn long_forward(model: &LongTermModel, batch: &SequenceBatch) -> Result<LongOutput> {
    let t_n = batch.frames();
    let (h, w) = batch.extent();
    let plane = h * w;
    let n = t_n * plane;
    let scale = (model.dim() as f64).sqrt().recip();

    let input = |i: usize| {
        let (t, p) = (i / plane, i % plane);
        std::array::from_fn(|c| batch.pixel(t, c, p / w, p % w))
    };
    let queries = par::map_range(n, |i| project(&model.query, &input(i)));
    let keys = par::map_range(n, |i| project(&model.key, &input(i)));
    let values = par::map_range(n, |i| project(&model.value, &input(i))[0] + model.value_bias);

    let cfg = model.config;
    let rows = par::map_range(n, |i| {
        let (t, p) = (i / plane, i % plane);
        let (y, x) = (p / w, p % w);
        let mut scored: Vec<(usize, f64)> = neighbourhood(&cfg, t_n, (h, w), t, y, x)
            .map(|(tt, yy, xx)| {
                let j = tt * plane + yy * w + xx;
                let s: f64 = queries[i].iter().zip(&keys[j]).map(|(a, b)| a * b).sum();
                (j, s * scale)
            })
            .collect();
        let clipped = scored.len() < cfg.top_k;
        // highest score first; equal scores keep the lower index
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(cfg.top_k);
        let m = scored[0].1;
        let z: f64 = scored.iter().map(|(_, s)| (s - m).exp()).sum();
        let row: Vec<(usize, f64)> = scored.iter().map(|&(j, s)| (j, (s - m).exp() / z)).collect();
        let agg: f64 = row.iter().map(|&(j, a)| a * values[j]).sum();
        let logit = agg + batch.pixel(t, LONG_INPUT_CHANNELS - 1, y, x);
        (sigmoid(logit), row, clipped)
    });

    let mut predictions = Vec::with_capacity(t_n);
    let mut attention = Vec::with_capacity(n);
    let mut clipped = false;
    let mut probs = Vec::with_capacity(n);
    for (p, row, c) in rows {
        probs.push(p);
        clipped |= c;
        attention.push(
            row.into_iter()
                .map(|(j, a)| ((j / plane, (j % plane) / w, j % w), a))
                .collect(),
        );
    }
    for chunk in probs.chunks(plane) {
        predictions.push(MaskImage::probability(h, w, chunk.to_vec())?);
    }
    Ok(LongOutput {
        predictions,
        attention,
        clipped,
    })
}

/// Runs the short-term model over a clip (each frame paired with its
/// successor, the last one with its predecessor), then refines the whole clip.
/// The short model is only read, never updated.
pub fn two_stage_forward(short: &ShortTermModel, long: &LongTermModel, frames: &[DenseArray]) -> Result<LongOutput> {
    if frames.len() < 2 {
        return Err(dim_err!("a clip needs at least 2 frames, got {}", frames.len()));
    }
    let last = frames.len() - 1;
    let predictions = par::map_range(frames.len(), |t| {
        let next = if t == last { t - 1 } else { t + 1 };
        let second = (t + 2 <= last).then(|| &frames[t + 2]);
        short.predict(&frames[t], &frames[next], second)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    long_forward(long, &SequenceBatch::stack(frames, &predictions)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(t: usize, h: usize, w: usize, seed: u64) -> SequenceBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SequenceBatch::new(DenseArray::from_fn(&[t, 4, h, w], |_| rng.gen())).unwrap()
    }

    #[test]
    fn self_attention_preserves_ranking() {
        let cfg = LongTermConfig {
            temporal_radius: Some(0),
            spatial_radius: 0,
            top_k: 1,
        };
        let model = LongTermModel::identity(cfg).unwrap();
        let batch = random_batch(2, 5, 6, 3);
        let out = long_forward(&model, &batch).unwrap();
        for (i, row) in out.attention.iter().enumerate() {
            let (t, p) = (i / 30, i % 30);
            assert_eq!(row, &vec![((t, p / 6, p % 6), 1.0)]);
        }
        for t in 0..2 {
            let input: Vec<f64> = (0..30).map(|p| batch.pixel(t, 3, p / 6, p % 6)).collect();
            let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            assert_eq!(argmax(&input), argmax(out.predictions[t].values()));
        }
    }

    #[test]
    fn uniform_input_gives_uniform_output() {
        let model = LongTermModel::new(LongTermConfig::default(), 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let batch = SequenceBatch::new(DenseArray::full(&[3, 4, 7, 7], 0.3)).unwrap();
        let out = long_forward(&model, &batch).unwrap();
        let v0 = out.predictions[0].values()[0];
        for p in &out.predictions {
            assert!(p.values().iter().all(|&v| (v - v0).abs() < 1e-12));
        }
    }

    #[test]
    fn oversized_k_is_clipped() {
        let cfg = LongTermConfig {
            temporal_radius: Some(0),
            spatial_radius: 1,
            top_k: 20,
        };
        let model = LongTermModel::identity(cfg).unwrap();
        let out = long_forward(&model, &random_batch(2, 4, 4, 9)).unwrap();
        assert!(out.clipped);
        assert_eq!(out.attention[5].len(), 9);
        assert_eq!(out.attention[0].len(), 4);
    }

    #[test]
    fn batch_validation() {
        assert!(SequenceBatch::new(DenseArray::zeros(&[1, 4, 2, 2])).is_err());
        assert!(SequenceBatch::new(DenseArray::zeros(&[2, 3, 2, 2])).is_err());
        let cfg = LongTermConfig {
            top_k: 0,
            ..Default::default()
        };
        assert!(LongTermModel::identity(cfg).is_err());
    }
}
