mod common;

use common::{feature, max_rel_err, uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcod_core::corrpyr::{self, ChannelMixer, FeatureMap};
use vcod_core::losses::{self, LossConfig};
use vcod_core::numerics;
use vcod_core::toynet::{synth, ShortConfig, ShortTermModel};
use vcod_core::{DenseArray, MaskImage};
use vcod_oracles::central_diff;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn arr(shape: &[usize], v: &[f64]) -> DenseArray {
    DenseArray::new(shape.to_vec(), v.to_vec()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn cab_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let c = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=2);
        let (h, w) = (2 * rng.gen_range(1..=2), 2 * rng.gen_range(1..=3));
        let (fr, _) = feature(&mut rng, c, h, w);
        let (fnb, _) = feature(&mut rng, c, h, w);
        let pw = uniform(&mut rng, c * c, -1.0, 1.0);
        let pb = uniform(&mut rng, c, -0.5, 0.5);
        let r = uniform(&mut rng, c * h * w, -1.0, 1.0);

        let loss = |fr: &[f64], fnb: &[f64], pw: &[f64], pb: &[f64]| {
            let phi = ChannelMixer {
                weight: arr(&[c, c, 1, 1], pw),
                bias: arr(&[c], pb),
            };
            let a = FeatureMap::new(arr(&[c, h, w], fr)).unwrap();
            let b = FeatureMap::new(arr(&[c, h, w], fnb)).unwrap();
            dot(corrpyr::cab_forward(&a, &b, &phi, k).unwrap().0.array().data(), &r)
        };
        let phi = ChannelMixer {
            weight: arr(&[c, c, 1, 1], &pw),
            bias: arr(&[c], &pb),
        };
        let (_, cache) = corrpyr::cab_forward(&fr, &fnb, &phi, k).unwrap();
        let g = corrpyr::cab_backward(&cache, &arr(&[c, h, w], &r)).unwrap();

        let (a, b) = (fr.array().data(), fnb.array().data());
        let fd_ref = central_diff(|x| loss(x, b, &pw, &pb), a, STEP);
        let fd_nbr = central_diff(|x| loss(a, x, &pw, &pb), b, STEP);
        let fd_w = central_diff(|x| loss(a, b, x, &pb), &pw, STEP);
        let fd_b = central_diff(|x| loss(a, b, &pw, x), &pb, STEP);
        assert!(max_rel_err(g.d_ref.data(), &fd_ref) < TOL);
        assert!(max_rel_err(g.d_nbr.data(), &fd_nbr) < TOL);
        assert!(max_rel_err(g.d_phi_weight.data(), &fd_w) < TOL);
        assert!(max_rel_err(g.d_phi_bias.data(), &fd_b) < TOL);
    }
}

#[test]
fn short_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let cfg = LossConfig::default();
    for _ in 0..20 {
        let gt = common::blob_mask(&mut rng, 8, 8);
        let p = uniform(&mut rng, 64, 0.05, 0.95);
        let loss = |x: &[f64]| {
            let pred = MaskImage::probability(8, 8, x.to_vec()).unwrap();
            losses::short_loss(&pred, &gt, &cfg).unwrap().total
        };
        let pred = MaskImage::probability(8, 8, p.clone()).unwrap();
        let g = losses::short_loss_grad(&pred, &gt, &cfg).unwrap();
        assert!(max_rel_err(&g, &central_diff(loss, &p, STEP)) < TOL);
    }
}

#[test]
fn conv_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (stride, pad, k) in [(1, 1, 3), (2, 0, 2), (4, 0, 4), (1, 0, 1)] {
        let (c, o, h) = (2, 3, 8);
        let x = uniform(&mut rng, c * h * h, -1.0, 1.0);
        let wt = uniform(&mut rng, o * c * k * k, -1.0, 1.0);
        let b = uniform(&mut rng, o, -1.0, 1.0);
        let out = |x: &[f64], wt: &[f64], b: &[f64]| {
            numerics::conv2d(
                &arr(&[c, h, h], x),
                &arr(&[o, c, k, k], wt),
                Some(&arr(&[o], b)),
                stride,
                pad,
            )
            .unwrap()
        };
        let y = out(&x, &wt, &b);
        let r = uniform(&mut rng, y.len(), -1.0, 1.0);
        let (dx, dw, db) = numerics::conv2d_backward(
            &arr(&[c, h, h], &x),
            &arr(&[o, c, k, k], &wt),
            &DenseArray::new(y.shape().to_vec(), r.clone()).unwrap(),
            stride,
            pad,
        )
        .unwrap();
        assert!(max_rel_err(dx.data(), &central_diff(|v| dot(out(v, &wt, &b).data(), &r), &x, STEP)) < TOL);
        assert!(max_rel_err(dw.data(), &central_diff(|v| dot(out(&x, v, &b).data(), &r), &wt, STEP)) < TOL);
        assert!(max_rel_err(db.data(), &central_diff(|v| dot(out(&x, &wt, v).data(), &r), &b, STEP)) < TOL);
    }
}

#[test]
fn resize_backward_is_the_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for (h, w, oh, ow) in [(4, 4, 32, 32), (3, 5, 7, 2), (8, 8, 8, 8)] {
        let x = uniform(&mut rng, 2 * h * w, -1.0, 1.0);
        let r = uniform(&mut rng, 2 * oh * ow, -1.0, 1.0);
        let f = |v: &[f64]| {
            dot(
                numerics::resize_bilinear(&arr(&[2, h, w], v), oh, ow).unwrap().data(),
                &r,
            )
        };
        let g = numerics::resize_bilinear_backward(&arr(&[2, oh, ow], &r), h, w).unwrap();
        assert!(max_rel_err(g.data(), &central_diff(f, &x, STEP)) < TOL);
    }
}

fn sample_frames(seed: u64) -> (synth::ToySample, ShortTermModel) {
    let s = synth::toy_samples(&synth::SynthConfig::default(), 1, seed)
        .unwrap()
        .remove(0);
    (s, ShortTermModel::new(ShortConfig::toy(), seed))
}

#[test]
fn gradient_reaches_the_neighbour_frame() {
    let cfg = LossConfig::default();
    for seed in 0..3 {
        let (s, model) = sample_frames(seed);
        let [a, b, c] = &s.frames;
        let fwd = model.forward(a, b, Some(c)).unwrap();
        let d = losses::short_loss_grad_array(&fwd.prediction, &s.gt, &cfg).unwrap();
        let g = model.backward(&fwd, &d, false).unwrap();
        assert!(g.frames[1].data().iter().any(|&v| v != 0.0));
        assert!(g.frames[2].data().iter().any(|&v| v != 0.0));

        // spot-check a few neighbour pixels against finite differences
        let loss = |x: &[f64]| {
            let b2 = arr(&[3, 32, 32], x);
            let p = model.predict(a, &b2, Some(c)).unwrap();
            losses::short_loss(&p, &s.gt, &cfg).unwrap().total
        };
        let base = b.data().to_vec();
        let mut buf = base.clone();
        for &i in &[0usize, 517, 1400, 3071] {
            buf[i] = base[i] + STEP;
            let up = loss(&buf);
            buf[i] = base[i] - STEP;
            let down = loss(&buf);
            buf[i] = base[i];
            let fd = (up - down) / (2.0 * STEP);
            assert!(vcod_oracles::rel_err(g.frames[1].data()[i], fd) < TOL, "pixel {i}");
        }

        let frozen = model.backward(&fwd, &d, true).unwrap();
        assert!(frozen.frames.iter().all(|f| f.data().iter().all(|&v| v == 0.0)));
        assert!(frozen
            .params
            .phi
            .iter()
            .all(|p| p.weight.data().iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn model_parameter_gradients_match_finite_differences() {
    let cfg = LossConfig::default();
    let (s, model) = sample_frames(7);
    let [a, b, c] = &s.frames;
    let loss = |m: &ShortTermModel| {
        losses::short_loss(&m.predict(a, b, Some(c)).unwrap(), &s.gt, &cfg)
            .unwrap()
            .total
    };
    let fwd = model.forward(a, b, Some(c)).unwrap();
    let d = losses::short_loss_grad_array(&fwd.prediction, &s.gt, &cfg).unwrap();
    let g = model.backward(&fwd, &d, false).unwrap().params;
    let grads = g.params();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (k, (name, t)) in grads.iter().enumerate() {
        let i = rng.gen_range(0..t.len());
        let mut up = model.clone();
        up.params_mut()[k].1.data_mut()[i] += STEP;
        let mut down = model.clone();
        down.params_mut()[k].1.data_mut()[i] -= STEP;
        let fd = (loss(&up) - loss(&down)) / (2.0 * STEP);
        assert!(
            vcod_oracles::rel_err(t.data()[i], fd) < TOL,
            "{name}[{i}]: {} vs {fd}",
            t.data()[i]
        );
    }
}

#[test]
fn perturbing_the_neighbour_changes_the_prediction() {
    let (s, model) = sample_frames(1);
    let [a, b, _] = &s.frames;
    let p0 = model.predict(a, b, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = uniform(&mut rng, b.len(), -0.1, 0.1);
    let b2 = b.add(&arr(b.shape(), &noise)).unwrap();
    let p1 = model.predict(a, &b2, None).unwrap();
    let diff = p0
        .values()
        .iter()
        .zip(p1.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff > 0.0);
}
