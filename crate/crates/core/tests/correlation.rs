mod common;

use std::time::Instant;

use common::{feature, max_rel_err, uniform};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcod_core::corrpyr::{self, ChannelMixer, FeatureMap, PoolSchedule};
use vcod_core::toynet::{ShortConfig, ShortTermModel};
use vcod_core::DenseArray;
use vcod_oracles as oracle;

fn assert_unit_slices(vol: &corrpyr::CorrelationVolume) {
    for s in vol.slice_sums() {
        assert!((s - 1.0).abs() <= 1e-9, "slice sums to {s}");
    }
}

#[test]
fn fifty_random_instances_match_nested_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let start = Instant::now();
    for _ in 0..50 {
        let c = rng.gen_range(1..=4);
        let (hr, wr) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let (hn, wn) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let (fr, ir) = feature(&mut rng, c, hr, wr);
        let (fnb, inb) = feature(&mut rng, c, hn, wn);
        let (g, ig) = feature(&mut rng, c, hn, wn);

        let raw = corrpyr::correlation_volume(&fr, &fnb).unwrap();
        let want_raw = oracle::correlation(&ir, &inb);
        assert_eq!(raw.values.shape(), &[hr, wr, hn, wn]);
        assert!(max_rel_err(raw.values.data(), &want_raw) <= 1e-12);

        let want_norm = oracle::normalize(&want_raw, hn * wn);
        for vol in [
            corrpyr::normalize_volume(&raw).unwrap(),
            corrpyr::normalized_correlation(&fr, &fnb).unwrap(),
        ] {
            assert!(max_rel_err(vol.values.data(), &want_norm) <= 1e-12);
            assert_unit_slices(&vol);
        }

        let vol = corrpyr::normalized_correlation(&fr, &fnb).unwrap();
        let agg = corrpyr::aggregate(&vol, &g).unwrap();
        assert!(max_rel_err(agg.array().data(), &oracle::aggregate(&want_norm, &ig)) <= 1e-12);
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn cab_matches_composed_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let c = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=2);
        let (h, w) = (2 * rng.gen_range(1..=3), 2 * rng.gen_range(1..=3));
        let (fr, ir) = feature(&mut rng, c, h, w);
        let (fnb, inb) = feature(&mut rng, c, h, w);
        let phi = ChannelMixer {
            weight: DenseArray::new(vec![c, c, 1, 1], uniform(&mut rng, c * c, -1.0, 1.0)).unwrap(),
            bias: DenseArray::new(vec![c], uniform(&mut rng, c, -0.5, 0.5)).unwrap(),
        };
        let (out, cache) = corrpyr::cab_forward(&fr, &fnb, &phi, k).unwrap();

        let pooled = oracle::max_pool(&inb, k, k);
        let mut projected = oracle::conv(&pooled, phi.weight.data(), c, 1, 1, 1, 0);
        let plane = pooled.h * pooled.w;
        for (i, v) in projected.v.iter_mut().enumerate() {
            *v += phi.bias.data()[i / plane];
        }
        let vol = oracle::normalize(&oracle::correlation(&ir, &pooled), plane);
        assert!(max_rel_err(cache.volume().values.data(), &vol) <= 1e-12);
        assert_unit_slices(&cache.volume());
        assert!(max_rel_err(out.array().data(), &oracle::aggregate(&vol, &projected)) <= 1e-12);
    }
}

#[test]
fn large_logits_stay_finite_when_stabilised() {
    let big = FeatureMap::new(DenseArray::full(&[2, 2, 2], 30.0)).unwrap();
    assert!(corrpyr::correlation_volume(&big, &big).is_err());
    let vol = corrpyr::normalized_correlation(&big, &big).unwrap();
    assert!(vol.values.is_finite());
    assert_unit_slices(&vol);
}

proptest! {
    #[test]
    fn normalized_slices_are_distributions(
        seed in any::<u64>(),
        c in 1usize..5,
        h in 1usize..7,
        w in 1usize..7,
        scale in 0.1f64..8.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = feature(&mut rng, c, h, w);
        let (b, _) = feature(&mut rng, c, w, h);
        let a = FeatureMap::new(a.array().scale(scale)).unwrap();
        let vol = corrpyr::normalized_correlation(&a, &b).unwrap();
        prop_assert!(vol.values.data().iter().all(|&v| v >= 0.0));
        for s in vol.slice_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn aggregation_of_constant_features_is_constant(seed in any::<u64>(), v in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = feature(&mut rng, 2, 3, 4);
        let (b, _) = feature(&mut rng, 2, 5, 2);
        let g = FeatureMap::new(DenseArray::full(&[3, 5, 2], v)).unwrap();
        let vol = corrpyr::normalized_correlation(&a, &b).unwrap();
        let out = corrpyr::aggregate(&vol, &g).unwrap();
        prop_assert!(out.array().data().iter().all(|&x| (x - v).abs() <= 1e-12));
    }
}

#[test]
fn stage_and_pyramid_extents() {
    for n in [64usize, 96, 128] {
        let model = ShortTermModel::new(ShortConfig::default(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut frame = || DenseArray::new(vec![3, n, n], uniform(&mut rng, 3 * n * n, 0.0, 1.0)).unwrap();
        let (a, b) = (frame(), frame());
        let ea = model.encode(&a).unwrap();
        let eb = model.encode(&b).unwrap();
        assert_eq!(ea.low.shape(), &[16, n / 4, n / 4]);
        for (j, f) in ea.scales.iter().enumerate() {
            let (h, w) = corrpyr::stage_extent(n, n, corrpyr::PYRAMID_SCALES[j]);
            assert_eq!((h, w), (n >> (j + 3), n >> (j + 3)));
            assert_eq!((f.channels(), f.height(), f.width()), (32, h, w));
        }
        // the default schedule needs at least one pooled cell per scale
        let schedule = if n / 8 >= 8 {
            PoolSchedule::default()
        } else {
            PoolSchedule([1, 1, 1])
        };
        let pyr =
            corrpyr::build_pyramid((n, n), &ea.scales, &eb.scales, Some(&eb.scales), &model.phi, schedule).unwrap();
        for (lvl, f) in pyr.levels.iter().zip(&ea.scales) {
            assert_eq!(lvl.next.array().shape(), f.array().shape());
            assert_eq!(lvl.second.as_ref().unwrap().array().shape(), f.array().shape());
        }
    }
}

#[test]
fn pyramid_rejects_bad_extents() {
    let phis: [ChannelMixer; 3] = std::array::from_fn(|_| ChannelMixer::identity(2));
    let feats =
        |n: usize| -> [FeatureMap; 3] { std::array::from_fn(|j| FeatureMap::zeros(2, n >> (j + 3), n >> (j + 3))) };
    let ok = feats(64);
    assert!(corrpyr::build_pyramid((64, 64), &ok, &ok, None, &phis, PoolSchedule([1, 1, 1])).is_ok());
    assert!(corrpyr::build_pyramid((48, 64), &ok, &ok, None, &phis, PoolSchedule([1, 1, 1])).is_err());
    assert!(corrpyr::build_pyramid((128, 128), &ok, &ok, None, &phis, PoolSchedule([1, 1, 1])).is_err());
}

#[test]
fn parallel_and_sequential_volumes_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, _) = feature(&mut rng, 4, 12, 12);
    let (b, _) = feature(&mut rng, 4, 12, 12);
    let par = corrpyr::normalized_correlation(&a, &b).unwrap();
    let seq = vcod_core::par::sequential(|| corrpyr::normalized_correlation(&a, &b).unwrap());
    assert_eq!(par, seq);
}
