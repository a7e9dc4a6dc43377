use sasv_core::data::TrialLabel;
use sasv_core::metrics::{compute_eer, evaluate_system, Metric};
use sasv_core::models::{score_trials, EvalData, System};
use sasv_core::sampling::{generate_synthetic, SyntheticConfig};
use sasv_core::vector::cosine;

#[test]
fn default_dataset_separates_speakers_but_not_spoofs_by_asv_alone() {
    let ds = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let data = EvalData {
        asv: &ds.asv,
        cm: Some(&ds.cm),
        cm_scores: Some(&ds.cm_scores),
    };
    let scored = score_trials(&System::AsvCosine, &ds.eval.trials, &data).unwrap();
    let report = evaluate_system(&scored, 20).unwrap();
    assert!(report.get(Metric::Sv).eer_percent().unwrap() < 5.0);
    assert!(report.get(Metric::Spf).eer_percent().unwrap() > 35.0);
    assert!(report.get(Metric::Sasv).eer_percent().unwrap() > 20.0);
}

#[test]
fn spoofs_spread_like_bonafide_are_indistinguishable_by_asv() {
    let cfg = SyntheticConfig {
        n_speakers: 60,
        dev_speakers: 0,
        eval_speakers: 30,
        spoof_asv_spread: 0.12,
        asv_noise: 0.12,
        ..SyntheticConfig::default()
    };
    let ds = generate_synthetic(&cfg).unwrap();
    let data = EvalData {
        asv: &ds.asv,
        cm: None,
        cm_scores: None,
    };
    let scored = score_trials(&System::AsvCosine, &ds.eval.trials, &data).unwrap();
    let spf = evaluate_system(&scored, 20)
        .unwrap()
        .get(Metric::Spf)
        .eer_percent()
        .unwrap();
    // ~1100 target and 1200 spoof trials: a few points of sampling noise
    assert!((spf - 50.0).abs() < 5.0, "SPF-EER {spf}");
}

#[test]
fn well_separated_cm_clusters_are_classified_by_cosine() {
    let cfg = SyntheticConfig {
        n_speakers: 50,
        utts_per_speaker: 100,
        spoofs_per_speaker: 100,
        cm_separation: 8.0,
        cm_dim: 160,
        ..SyntheticConfig::default()
    };
    let ds = generate_synthetic(&cfg).unwrap();
    let mut records: Vec<_> = ds.train.iter().collect();
    records.extend(ds.dev.records.iter().chain(&ds.eval.records));
    assert_eq!(records.len(), 10_000);

    // direction between the two class means
    let mut direction = vec![0.0; 160];
    for r in &records {
        let sign = if r.is_bonafide() { 1.0 } else { -1.0 };
        for (d, v) in direction
            .iter_mut()
            .zip(ds.cm.get(&r.utterance_id).unwrap())
        {
            *d += sign * v;
        }
    }
    let errors = records
        .iter()
        .filter(|r| {
            let c = cosine(ds.cm.get(&r.utterance_id).unwrap(), &direction).unwrap();
            (c >= 0.0) != r.is_bonafide()
        })
        .count();
    // Gaussian overlap: P(N(0,1) > 4) ~ 3e-5, i.e. ~0.3 expected errors
    assert!((errors as f64) < 10.0, "{errors} errors");
}

#[test]
fn cm_scores_are_class_posteriors() {
    let ds = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let (mut bona, mut spoof) = (Vec::new(), Vec::new());
    for r in &ds.train {
        let s = ds.cm_scores.get(&r.utterance_id).unwrap();
        assert!((0.0..=1.0).contains(&s));
        if r.is_bonafide() {
            bona.push(s)
        } else {
            spoof.push(s)
        }
    }
    assert!(compute_eer(&bona, &spoof).unwrap().eer < 0.01);
    // trials reference only known utterances
    for t in ds.eval.trials.iter().chain(&ds.dev.trials) {
        assert!(ds.asv.contains(&t.test_utterance_id));
        assert!(t.enroll_utterance_ids.iter().all(|u| ds.cm.contains(u)));
        if t.label == TrialLabel::Spoof {
            assert!(ds.cm_scores.get(&t.test_utterance_id).unwrap() < 1.0);
        }
    }
}
