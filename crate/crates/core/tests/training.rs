use sasv_core::models::{train_baseline2, train_iep, train_msfm, TrainingData};
use sasv_core::nn::{OptimizerKind, TrainConfig};
use sasv_core::sampling::{generate_synthetic, SyntheticConfig, SyntheticDataset};
use sasv_core::Error;

fn dataset() -> SyntheticDataset {
    generate_synthetic(&SyntheticConfig {
        n_speakers: 12,
        utts_per_speaker: 10,
        spoofs_per_speaker: 10,
        dev_speakers: 0,
        eval_speakers: 2,
        asv_dim: 32,
        cm_dim: 16,
        speaker_rank: 8,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        epochs: 6,
        samples_per_epoch: 400,
        ..TrainConfig::default()
    }
}

fn data(ds: &SyntheticDataset) -> TrainingData<'_> {
    TrainingData {
        records: &ds.train,
        asv: &ds.asv,
        cm: &ds.cm,
        cm_scores: Some(&ds.cm_scores),
    }
}

fn decreased(losses: &[f64]) -> bool {
    losses.iter().all(|l| l.is_finite()) && losses.last() < losses.first()
}

#[test]
fn msfm_loss_decreases_with_and_without_sssv_score() {
    let ds = dataset();
    for use_sssv in [true, false] {
        let (_, log) = train_msfm(&data(&ds), use_sssv, &config()).unwrap();
        assert_eq!(log.epoch_losses.len(), 6);
        assert!(decreased(&log.epoch_losses), "{:?}", log.epoch_losses);
    }
}

#[test]
fn iep_loss_decreases() {
    let ds = dataset();
    let (model, log) = train_iep(&data(&ds), &config()).unwrap();
    assert!(decreased(&log.epoch_losses), "{:?}", log.epoch_losses);
    assert_eq!(model.margin, 0.5);
}

#[test]
fn baseline2_loss_decreases() {
    let ds = dataset();
    let cfg = TrainConfig {
        epochs: 3,
        samples_per_epoch: 200,
        optimizer: OptimizerKind::Sgd,
        learning_rate: 0.05,
        ..config()
    };
    let (_, log) = train_baseline2(&data(&ds), &cfg).unwrap();
    assert!(decreased(&log.epoch_losses), "{:?}", log.epoch_losses);
}

#[test]
fn same_seed_same_model_other_seed_other_model() {
    let ds = dataset();
    let cfg = TrainConfig {
        epochs: 2,
        ..config()
    };
    let (a, log_a) = train_msfm(&data(&ds), true, &cfg).unwrap();
    let (b, log_b) = train_msfm(&data(&ds), true, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    let (c, _) = train_msfm(&data(&ds), true, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a, c);
    let (d, _) = train_iep(&data(&ds), &cfg).unwrap();
    let (e, _) = train_iep(&data(&ds), &cfg).unwrap();
    assert_eq!(d, e);
}

#[test]
fn fusion_needs_cm_scores_and_spoofs() {
    let ds = dataset();
    let no_scores = TrainingData {
        cm_scores: None,
        ..data(&ds)
    };
    assert!(matches!(
        train_msfm(&no_scores, true, &config()),
        Err(Error::Config(_))
    ));

    let bonafide_only: Vec<_> = ds
        .train
        .iter()
        .filter(|r| r.is_bonafide())
        .cloned()
        .collect();
    let err = train_msfm(
        &TrainingData {
            records: &bonafide_only,
            ..data(&ds)
        },
        true,
        &config(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("spoof-same"), "{err}");
}

#[test]
fn diverging_training_is_reported() {
    let ds = dataset();
    let cfg = TrainConfig {
        learning_rate: 1e300,
        optimizer: OptimizerKind::Sgd,
        epochs: 3,
        ..config()
    };
    match train_iep(&data(&ds), &cfg) {
        Err(Error::NonFiniteLoss { .. }) | Err(Error::NonFinite(_)) => {}
        other => panic!("expected a non-finite failure, got {other:?}"),
    }
}
