use c2t_core::models::{
    entropy_histogram, gen_target, greedy_continuation, load_model, save_model, DraftMode, RowStorage,
};
use c2t_core::pipeline::{PipelineConfig, BUNDLED_SCHEDULE};
use c2t_core::ModelPairSpec;

fn spec(vocab: usize, schedule: &str) -> ModelPairSpec {
    ModelPairSpec {
        vocab,
        order: 2,
        seed: 42,
        concentration_schedule: ModelPairSpec::parse_schedule(schedule).unwrap(),
        draft_noise: 0.3,
        noise_concentration: 0.1,
        draft_mode: DraftMode::MixturePerturb,
        spread_bins: 0,
    }
}

fn covered(hist: &[usize; 7], min: usize) -> usize {
    hist.iter().filter(|&&n| n >= min).count()
}

#[test]
fn bundled_schedule_reaches_every_entropy_bin() {
    let target = gen_target(&spec(1024, BUNDLED_SCHEDULE)).unwrap();
    let hist = entropy_histogram(&target, 5000, 1);
    assert_eq!(covered(&hist, 10), 7, "{hist:?}");
}

#[test]
fn three_point_schedule_covers_few_bins() {
    // Measured coverage of {0.01, 1, 100} at V = 2048; see the README.
    let target = gen_target(&spec(2048, "0.01:0.34,1:0.33,100:0.33")).unwrap();
    let hist = entropy_histogram(&target, 2000, 1);
    let n = covered(&hist, 10);
    assert!((2..=3).contains(&n), "{hist:?}");
}

#[test]
fn rows_are_distributions_and_reproducible() {
    let s = spec(64, "0.05:0.5,1:0.5");
    let a = gen_target(&s).unwrap();
    let b = gen_target(&s).unwrap();
    for ctx in [vec![], vec![3], vec![5, 7], vec![1, 2, 3]] {
        let row = a.next_dist(&ctx).unwrap();
        assert_eq!(row.len(), 64);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(row.iter().all(|&p| p >= 0.0));
        assert_eq!(row, b.next_dist(&ctx).unwrap());
    }
    assert!(a.next_dist(&[64]).is_err());
}

#[test]
fn model_files_round_trip() {
    let s = spec(16, "0.5:1");
    let target = gen_target(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for storage in [RowStorage::Procedural, RowStorage::Jsonl, RowStorage::Blob] {
        let path = dir.path().join(format!("{storage:?}.model"));
        save_model(&path, &target, "target", Some(&s), storage).unwrap();
        let (header, back) = load_model(&path).unwrap();
        assert_eq!(header.vocab, 16);
        for ctx in [vec![], vec![2], vec![9, 4]] {
            assert_eq!(back.next_dist(&ctx).unwrap(), target.next_dist(&ctx).unwrap());
        }
        assert_eq!(
            greedy_continuation(&back, &[1], 12).unwrap(),
            greedy_continuation(&target, &[1], 12).unwrap()
        );
    }
}

#[test]
fn bundled_pair_matches_its_manifest() {
    let cfg = PipelineConfig::default();
    let back = PipelineConfig::from_manifest(&cfg.to_manifest()).unwrap();
    assert_eq!(back.to_manifest().to_string(), cfg.to_manifest().to_string());
    assert_eq!(cfg.pair().unwrap().vocab(), 1024);
}
