#![allow(dead_code)]

use rand::Rng;
use vcod_core::corrpyr::FeatureMap;
use vcod_core::{DenseArray, MaskImage};
use vcod_oracles::Img;

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn feature(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> (FeatureMap, Img) {
    let v = uniform(rng, c * h * w, -1.0, 1.0);
    let f = FeatureMap::new(DenseArray::new(vec![c, h, w], v.clone()).unwrap()).unwrap();
    (f, Img { c, h, w, v })
}

pub fn img(a: &DenseArray) -> Img {
    let (c, h, w) = a.dims3().unwrap();
    Img {
        c,
        h,
        w,
        v: a.data().to_vec(),
    }
}

/// Binary mask with a few random rectangles.
pub fn blob_mask(rng: &mut impl Rng, h: usize, w: usize) -> MaskImage {
    let mut v = vec![0.0; h * w];
    for _ in 0..rng.gen_range(1..=3) {
        let (y0, x0) = (rng.gen_range(0..h), rng.gen_range(0..w));
        let (y1, x1) = (rng.gen_range(y0..h) + 1, rng.gen_range(x0..w) + 1);
        for y in y0..y1 {
            for x in x0..x1 {
                v[y * w + x] = 1.0;
            }
        }
    }
    MaskImage::binary(h, w, v).unwrap()
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| vcod_oracles::rel_err(x, y))
        .fold(0.0, f64::max)
}
