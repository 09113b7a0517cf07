mod common;

use std::fs;

use common::{gt_as_predictions, interior_rect, rect, sequence, stem, translation_flows, H, W};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vcod_core::MaskImage;
use vcod_harness::eval::EvalMode;
use vcod_harness::io::write_mask;
use vcod_harness::report;
use vcod_harness::{run_eval, run_pseudo, scan_dataset, HarnessError, RunConfig};

fn fixture(rng: &mut ChaCha8Rng) -> tempfile::TempDir {
    let root = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let masks: Vec<MaskImage> = (0..11).map(|_| interior_rect(rng, H, W)).collect();
        sequence(&root.path().join(name), 11, 5, |i| masks[i].clone());
    }
    root
}

#[test]
fn ground_truth_as_prediction() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let root = fixture(&mut rng);
    let pred = tempfile::tempdir().unwrap();
    gt_as_predictions(root.path(), pred.path());
    let out = run_eval(&scan_dataset(root.path()).unwrap(), pred.path(), &RunConfig::default()).unwrap();
    assert_eq!(out.sequences.len(), 2);
    assert_eq!(out.overall.frame_count, 6);
    let r = out.overall;
    // S_α carries epsilon smoothing, so it lands within rounding of 1
    assert!((r.s_alpha - 1.0).abs() < 1e-9);
    assert_eq!((r.f_beta_w, r.mae), (1.0, 0.0));
    // every level but the last keeps the binary map intact
    assert!((r.m_dice - 255.0 / 256.0).abs() < 1e-12);
    assert!((r.m_iou - 255.0 / 256.0).abs() < 1e-12);
    let gt = vcod_harness::io::read_binary_mask(&root.path().join("a/GT/00000.png"), 0.5).unwrap();
    assert!((r.m_dice - vcod_oracles::metrics::mean_dice(gt.values(), gt.values())).abs() < 1e-12);
    let md = report::markdown(&report::rows(&out));
    assert!(md.lines().last().unwrap().starts_with("| overall | 1.000 | 1.000 |"));
}

#[test]
fn empty_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let root = fixture(&mut rng);
    let pred = tempfile::tempdir().unwrap();
    for seq in ["a", "b"] {
        for i in [0, 5, 10] {
            write_mask(
                &pred.path().join(seq).join(format!("{}.png", stem(i))),
                &MaskImage::binary(H, W, vec![0.0; H * W]).unwrap(),
            )
            .unwrap();
        }
    }
    let out = run_eval(&scan_dataset(root.path()).unwrap(), pred.path(), &RunConfig::default()).unwrap();
    assert_eq!(out.overall.f_beta_w, 0.0);
    assert_eq!(out.overall.m_dice, 0.0);
    assert_eq!(out.overall.m_iou, 0.0);
}

#[test]
fn missing_predictions_are_listed() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let root = fixture(&mut rng);
    let pred = tempfile::tempdir().unwrap();
    gt_as_predictions(root.path(), pred.path());
    fs::remove_file(pred.path().join("a/00005.png")).unwrap();
    fs::remove_dir_all(pred.path().join("b")).unwrap();
    match run_eval(&scan_dataset(root.path()).unwrap(), pred.path(), &RunConfig::default()) {
        Err(HarnessError::MissingPredictions { missing }) => {
            assert_eq!(missing, ["a/00005", "b/00000", "b/00005", "b/00010"])
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn shared_stem_is_ambiguous() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let root = fixture(&mut rng);
    let pred = tempfile::tempdir().unwrap();
    gt_as_predictions(root.path(), pred.path());
    fs::copy(pred.path().join("b/00010.png"), pred.path().join("b/00010.jpg")).unwrap();
    match run_eval(&scan_dataset(root.path()).unwrap(), pred.path(), &RunConfig::default()) {
        Err(HarnessError::AmbiguousPrediction { frame, candidates }) => {
            assert_eq!(frame, "b/00010");
            assert_eq!(candidates.len(), 2);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn annotated_mode_reads_only_annotated_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let root = fixture(&mut rng);
    let pred = tempfile::tempdir().unwrap();
    // predictions exist for every frame, annotated or not
    for seq in ["a", "b"] {
        for i in 0..11 {
            write_mask(
                &pred.path().join(seq).join(format!("{}.png", stem(i))),
                &interior_rect(&mut rng, H, W),
            )
            .unwrap();
        }
    }
    let out = run_eval(&scan_dataset(root.path()).unwrap(), pred.path(), &RunConfig::default()).unwrap();
    let mut want = Vec::new();
    for seq in ["a", "b"] {
        for i in [0, 5, 10] {
            want.push(root.path().join(seq).join("GT").join(format!("{}.png", stem(i))));
            want.push(pred.path().join(seq).join(format!("{}.png", stem(i))));
        }
    }
    want.sort();
    assert_eq!(out.accessed, want);
}

#[test]
fn pseudo_mode_adds_warped_frames() {
    let root = tempfile::tempdir().unwrap();
    let seq = root.path().join("s");
    sequence(&seq, 6, 5, |_| rect(H, W, 4, 9, 5, 11));
    for n in 1..=4 {
        translation_flows(&seq, 0, n, 0.0, 0.0, H, W);
    }
    let config = RunConfig {
        mode: EvalMode::AllFramesWithPseudo,
        ..RunConfig::default()
    };
    run_pseudo(&scan_dataset(root.path()).unwrap(), config.pseudo_params()).unwrap();
    let pred = tempfile::tempdir().unwrap();
    for i in 0..6 {
        write_mask(
            &pred.path().join("s").join(format!("{}.png", stem(i))),
            &rect(H, W, 4, 9, 5, 11),
        )
        .unwrap();
    }
    let m = scan_dataset(root.path()).unwrap();
    let out = run_eval(&m, pred.path(), &config).unwrap();
    // frames 0 and 5 are annotated, 1..=4 have pseudo masks
    assert_eq!(out.overall.frame_count, 6);
    assert_eq!(out.sequences[0].pseudo_frames, 4);
    assert!((out.overall.s_alpha - 1.0).abs() < 1e-9);
    let annotated = run_eval(&m, pred.path(), &RunConfig::default()).unwrap();
    assert_eq!(annotated.overall.frame_count, 2);
}

#[test]
fn reports_are_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let root = fixture(&mut rng);
    let pred = tempfile::tempdir().unwrap();
    for seq in ["a", "b"] {
        for i in [0, 5, 10] {
            write_mask(
                &pred.path().join(seq).join(format!("{}.png", stem(i))),
                &interior_rect(&mut rng, H, W),
            )
            .unwrap();
        }
    }
    let m = scan_dataset(root.path()).unwrap();
    let a = run_eval(&m, pred.path(), &RunConfig::default()).unwrap();
    let b = vcod_core::par::sequential(|| run_eval(&m, pred.path(), &RunConfig::default()).unwrap());
    assert_eq!(a, b);
    let (ra, rb) = (report::rows(&a), report::rows(&b));
    assert_eq!(report::csv(&ra), report::csv(&rb));
    assert_eq!(report::markdown(&ra), report::markdown(&rb));
    assert_eq!(report::csv(&ra).lines().count(), 4);
}

#[test]
fn invalid_configuration() {
    let root = tempfile::tempdir().unwrap();
    sequence(&root.path().join("s"), 1, 5, |_| rect(H, W, 4, 9, 5, 11));
    let m = scan_dataset(root.path()).unwrap();
    for c in [
        RunConfig {
            threshold: 1.0,
            ..RunConfig::default()
        },
        RunConfig {
            threshold: 0.0,
            ..RunConfig::default()
        },
        RunConfig {
            consistency: vcod_core::pseudolabel::ConsistencyParams { alpha: -1.0, beta: 0.5 },
            ..RunConfig::default()
        },
        RunConfig {
            threads: Some(0),
            ..RunConfig::default()
        },
    ] {
        assert!(matches!(run_eval(&m, root.path(), &c), Err(HarnessError::Config(_))));
    }
}

#[test]
fn published_row_formatting() {
    let row = report::markdown_row("SLT-Net", [0.656, 0.357, 0.785, 0.021, 0.397, 0.310]);
    assert_eq!(row, "| SLT-Net | 0.656 | 0.357 | 0.785 | 0.021 | 0.397 | 0.310 |");
}
