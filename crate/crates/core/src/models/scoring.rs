use std::collections::HashMap;

use super::{baseline1_score, Baseline2Model, IepModel, MsfmInput, MsfmModel};
use crate::data::{CmScores, EmbeddingStore, TrialRecord};
use crate::metrics::ScoredTrial;
use crate::vector::cosine;
use crate::{Error, Result};

/// A scoring rule for trials.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    /// Cosine similarity of ASV embeddings alone.
    AsvCosine,
    Baseline1,
    Baseline2(Baseline2Model),
    Msfm(MsfmModel),
    Iep(IepModel),
}

impl System {
    fn needs_cm_store(&self) -> bool {
        matches!(
            self,
            System::Baseline2(_) | System::Msfm(_) | System::Iep(_)
        )
    }

    fn needs_cm_scores(&self) -> bool {
        matches!(self, System::Baseline1 | System::Msfm(_))
    }

    /// Whether the enrollment side needs a CM embedding.
    fn needs_enroll_cm(&self) -> bool {
        matches!(self, System::Msfm(_) | System::Iep(_))
    }
}

/// Inputs available at scoring time.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub asv: &'a EmbeddingStore,
    pub cm: Option<&'a EmbeddingStore>,
    pub cm_scores: Option<&'a CmScores>,
}

struct Enrollment {
    asv: Vec<f64>,
    cm: Option<Vec<f64>>,
    projected: Option<Vec<f64>>,
}

fn missing_error(store: &'static str, ids: Vec<String>) -> Result<()> {
    if ids.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingUtterances { store, ids })
    }
}

/// Scores every trial, in order.
///
/// All missing utterances are reported together before any scoring happens.
/// Enrollment CM embeddings absent from the CM store fall back to the mean of
/// the ones present, or to the store-wide mean if none are.
pub fn score_trials(
    system: &System,
    trials: &[TrialRecord],
    data: &EvalData,
) -> Result<Vec<ScoredTrial>> {
    let test_ids = || trials.iter().map(|t| t.test_utterance_id.as_str());
    let enroll_ids = || {
        trials
            .iter()
            .flat_map(|t| t.enroll_utterance_ids.iter().map(String::as_str))
    };

    missing_error(
        data.asv.kind().as_str(),
        data.asv.missing(enroll_ids().chain(test_ids())),
    )?;
    let cm = if system.needs_cm_store() {
        let cm = data
            .cm
            .ok_or_else(|| Error::Config("this system needs a CM embedding store".into()))?;
        missing_error(cm.kind().as_str(), cm.missing(test_ids()))?;
        Some(cm)
    } else {
        None
    };
    let cm_scores = if system.needs_cm_scores() {
        let s = data
            .cm_scores
            .ok_or_else(|| Error::Config("this system needs countermeasure scores".into()))?;
        let mut missing: Vec<String> = Vec::new();
        for id in test_ids() {
            if s.get(id).is_none() && !missing.iter().any(|m| m == id) {
                missing.push(id.to_string());
            }
        }
        missing_error("cm scores", missing)?;
        Some(s)
    } else {
        None
    };
    let cm_mean = match cm {
        Some(store) if system.needs_enroll_cm() => store.mean(),
        _ => None,
    };

    let mut enrollments: HashMap<&str, Enrollment> = HashMap::new();
    let mut out = Vec::with_capacity(trials.len());
    for trial in trials {
        if !enrollments.contains_key(trial.enroll_speaker_id.as_str()) {
            let asv = data.asv.enrollment_embedding(&trial.enroll_utterance_ids)?;
            let enroll_cm = match cm {
                Some(store) if system.needs_enroll_cm() => {
                    let present: Vec<&String> = trial
                        .enroll_utterance_ids
                        .iter()
                        .filter(|id| store.contains(id))
                        .collect();
                    if present.is_empty() {
                        log::debug!(
                            "no CM embedding for {}'s enrollment; using the store mean",
                            trial.enroll_speaker_id
                        );
                        Some(cm_mean.clone().ok_or(Error::Empty("cm store"))?)
                    } else {
                        Some(store.enrollment_embedding(&present)?)
                    }
                }
                _ => None,
            };
            let projected = match (system, &enroll_cm) {
                (System::Iep(m), Some(c)) => Some(m.project(&asv, c)?),
                _ => None,
            };
            enrollments.insert(
                &trial.enroll_speaker_id,
                Enrollment {
                    asv,
                    cm: enroll_cm,
                    projected,
                },
            );
        }
        let enroll = &enrollments[trial.enroll_speaker_id.as_str()];
        let test_asv = data.asv.get(&trial.test_utterance_id).expect("checked");
        let test_cm = || {
            cm.and_then(|c| c.get(&trial.test_utterance_id))
                .expect("checked")
        };
        let cm_score = || {
            cm_scores
                .and_then(|s| s.get(&trial.test_utterance_id))
                .expect("checked")
        };
        let score = match system {
            System::AsvCosine => cosine(&enroll.asv, test_asv)?,
            System::Baseline1 => baseline1_score(cosine(&enroll.asv, test_asv)?, cm_score()),
            System::Baseline2(m) => m.score(&enroll.asv, test_asv, test_cm())?,
            System::Msfm(m) => m.score(&MsfmInput {
                enroll_asv: &enroll.asv,
                enroll_cm: enroll.cm.as_deref().expect("computed above"),
                test_asv,
                test_cm: test_cm(),
                cm_score: cm_score(),
            })?,
            System::Iep(m) => {
                let zt = m.project(test_asv, test_cm())?;
                cosine(enroll.projected.as_deref().expect("computed above"), &zt)?
            }
        };
        out.push(ScoredTrial {
            trial: trial.clone(),
            score,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{StoreKind, TrialLabel};
    use crate::models::EmbeddingDims;

    fn trial(spk: &str, enroll: &[&str], test: &str) -> TrialRecord {
        TrialRecord {
            enroll_speaker_id: spk.into(),
            enroll_utterance_ids: enroll.iter().map(|s| s.to_string()).collect(),
            test_utterance_id: test.into(),
            label: TrialLabel::Target,
        }
    }

    fn stores() -> (EmbeddingStore, EmbeddingStore, CmScores) {
        let mut asv = EmbeddingStore::new(StoreKind::Asv, 2).unwrap();
        asv.insert("e1", vec![1.0, 0.0]).unwrap();
        asv.insert("e2", vec![0.0, 1.0]).unwrap();
        asv.insert("t1", vec![1.0, 1.0]).unwrap();
        let mut cm = EmbeddingStore::new(StoreKind::Cm, 1).unwrap();
        cm.insert("t1", vec![3.0]).unwrap();
        cm.insert("x", vec![1.0]).unwrap();
        let mut s = CmScores::new();
        s.insert("t1", 0.25).unwrap();
        (asv, cm, s)
    }

    #[test]
    fn asv_cosine_and_baseline1() {
        let (asv, cm, s) = stores();
        let data = EvalData {
            asv: &asv,
            cm: Some(&cm),
            cm_scores: Some(&s),
        };
        let trials = [trial("A", &["e1", "e2"], "t1")];
        let cos = score_trials(&System::AsvCosine, &trials, &data).unwrap();
        assert!((cos[0].score - 1.0).abs() < 1e-12);
        let b1 = score_trials(&System::Baseline1, &trials, &data).unwrap();
        assert!((b1[0].score - 1.25).abs() < 1e-12);
    }

    #[test]
    fn missing_ids_are_listed_together() {
        let (asv, _, _) = stores();
        let data = EvalData {
            asv: &asv,
            cm: None,
            cm_scores: None,
        };
        let trials = [
            trial("A", &["e1", "gone1"], "t1"),
            trial("B", &["e2"], "gone2"),
        ];
        match score_trials(&System::AsvCosine, &trials, &data) {
            Err(Error::MissingUtterances { ids, .. }) => assert_eq!(ids, vec!["gone1", "gone2"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            score_trials(&System::Baseline1, &[trial("A", &["e1"], "t1")], &data),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn absent_enrollment_cm_uses_store_mean() {
        let (asv, cm, s) = stores();
        let data = EvalData {
            asv: &asv,
            cm: Some(&cm),
            cm_scores: Some(&s),
        };
        let dims = EmbeddingDims { asv: 2, cm: 1 };
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let m = IepModel::init(dims, 0.5, &mut rng);
        let got =
            score_trials(&System::Iep(m.clone()), &[trial("A", &["e1"], "t1")], &data).unwrap();
        // store mean of [3] and [1]
        let ze = m.project(&[1.0, 0.0], &[2.0]).unwrap();
        let zt = m.project(&[1.0, 1.0], &[3.0]).unwrap();
        assert!((got[0].score - cosine(&ze, &zt).unwrap()).abs() < 1e-12);
    }
}
