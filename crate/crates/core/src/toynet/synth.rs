//! Synthetic camouflage: a square whose texture is drawn from the same
//! distribution as a static noise background, moving 1–2 px per frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::MaskImage;
use crate::numerics::DenseArray;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub size: usize,
    pub frames: usize,
    pub min_side: usize,
    pub max_side: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 32,
            frames: 3,
            min_side: 8,
            max_side: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthClip {
    /// `3×size×size` each.
    pub frames: Vec<DenseArray>,
    pub masks: Vec<MaskImage>,
    /// Per-frame displacement `(dy, dx)`.
    pub velocity: (isize, isize),
}

/// One training example: the reference frame, its two successors and the
/// reference mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySample {
    pub frames: [DenseArray; 3],
    pub gt: MaskImage,
}

pub fn synth_clip(cfg: &SynthConfig, rng: &mut impl Rng) -> Result<SynthClip> {
    let n = cfg.size;
    if cfg.frames == 0 || cfg.min_side == 0 || cfg.min_side > cfg.max_side {
        return Err(Error::Input(format!("invalid synthetic config {cfg:?}")));
    }
    let side = rng.gen_range(cfg.min_side..=cfg.max_side);
    let travel = 2 * (cfg.frames - 1);
    if side + travel >= n {
        return Err(Error::Input(format!(
            "a {side}px square cannot move {travel}px in {n}px"
        )));
    }
    let mut speed = || {
        let s = rng.gen_range(1..=2isize);
        if rng.gen_bool(0.5) {
            s
        } else {
            -s
        }
    };
    let velocity = (speed(), speed());
    let background: Vec<f64> = (0..3 * n * n).map(|_| rng.gen()).collect();
    let texture: Vec<f64> = (0..3 * side * side).map(|_| rng.gen()).collect();
    // start so that every frame keeps the square fully inside
    let start = |v: isize, rng: &mut dyn rand::RngCore| -> usize {
        let lo = if v < 0 { travel } else { 0 };
        let hi = n - side - if v > 0 { travel } else { 0 };
        rng.gen_range(lo..=hi)
    };
    let y0 = start(velocity.0, rng);
    let x0 = start(velocity.1, rng);

    let mut frames = Vec::with_capacity(cfg.frames);
    let mut masks = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames as isize {
        let oy = (y0 as isize + velocity.0 * t) as usize;
        let ox = (x0 as isize + velocity.1 * t) as usize;
        let mut img = background.clone();
        let mut mask = vec![0.0; n * n];
        for y in 0..side {
            for x in 0..side {
                mask[(oy + y) * n + ox + x] = 1.0;
                for c in 0..3 {
                    img[(c * n + oy + y) * n + ox + x] = texture[(c * side + y) * side + x];
                }
            }
        }
        frames.push(DenseArray::new(vec![3, n, n], img)?);
        masks.push(MaskImage::binary(n, n, mask)?);
    }
    Ok(SynthClip {
        frames,
        masks,
        velocity,
    })
}

/// `count` independent three-frame samples from one seed.
pub fn toy_samples(cfg: &SynthConfig, count: usize, seed: u64) -> Result<Vec<ToySample>> {
    let cfg = SynthConfig { frames: 3, ..*cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let clip = synth_clip(&cfg, &mut rng)?;
            let [a, b, c]: [DenseArray; 3] = clip.frames.try_into().expect("three frames");
            Ok(ToySample {
                frames: [a, b, c],
                gt: clip.masks[0].clone(),
            })
        })
        .collect()
}
