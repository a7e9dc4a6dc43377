//! Training loops. Each run is a pure function of its data and config: model
//! initialization and all sampling draw from one ChaCha stream seeded with
//! `config.seed`, and gradients are accumulated in a fixed order.

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Baseline2Model, EmbeddingDims, IepModel, MsfmInput, MsfmModel};
use crate::data::{CmScores, EmbeddingStore, UtteranceRecord};
use crate::nn::{Optimizer, Parameters, TrainConfig};
use crate::sampling::{sample_training_pairs, sample_triplets, TrainingPair};
use crate::{Error, Result};

/// Labelled utterances with their embeddings.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub records: &'a [UtteranceRecord],
    pub asv: &'a EmbeddingStore,
    pub cm: &'a EmbeddingStore,
    /// Needed by the score-fusion model only.
    pub cm_scores: Option<&'a CmScores>,
}

impl TrainingData<'_> {
    pub fn dims(&self) -> EmbeddingDims {
        EmbeddingDims {
            asv: self.asv.dim(),
            cm: self.cm.dim(),
        }
    }

    fn check_coverage(&self, need_cm_scores: bool) -> Result<()> {
        let ids = || self.records.iter().map(|r| r.utterance_id.as_str());
        for store in [self.asv, self.cm] {
            let missing = store.missing(ids());
            if !missing.is_empty() {
                return Err(Error::MissingUtterances {
                    store: store.kind().as_str(),
                    ids: missing,
                });
            }
        }
        if need_cm_scores {
            let scores = self
                .cm_scores
                .ok_or_else(|| Error::Config("countermeasure scores are required".into()))?;
            let missing: Vec<String> = ids()
                .filter(|id| scores.get(id).is_none())
                .map(str::to_string)
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingUtterances {
                    store: "cm scores",
                    ids: missing,
                });
            }
        }
        Ok(())
    }

    fn emb(&self, id: &str) -> (&[f64], &[f64]) {
        (
            self.asv.get(id).expect("coverage checked"),
            self.cm.get(id).expect("coverage checked"),
        )
    }
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

fn one_hot(index: usize) -> [f64; 2] {
    let mut v = [0.0; 2];
    v[index] = 1.0;
    v
}

/// Shared mini-batch loop over freshly sampled pairs.
fn train_on_pairs<M, G>(
    model: &mut M,
    grads: &mut G,
    data: &TrainingData,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut sample_loss: impl FnMut(&M, &TrainingPair, &mut G) -> Result<f64>,
) -> Result<TrainLog>
where
    M: Parameters,
    G: Parameters,
{
    let optimizer = Optimizer::new(config);
    let mut state = optimizer.init_state(model);
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        let pairs = sample_training_pairs(data.records, config.samples_per_epoch, rng)?;
        let mut epoch_total = 0.0;
        for (step, batch) in pairs.chunks(config.batch_size).enumerate() {
            grads.fill_zero();
            let mut batch_total = 0.0;
            for pair in batch {
                batch_total += sample_loss(model, pair, grads)?;
            }
            if !batch_total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            grads.scale(1.0 / batch.len() as f64);
            optimizer
                .step(model, grads, &mut state)
                .map_err(|_| Error::NonFiniteLoss { epoch, step })?;
            epoch_total += batch_total;
        }
        let mean = epoch_total / pairs.len() as f64;
        debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        log.epoch_losses.push(mean);
    }
    Ok(log)
}

/// Trains the score-fusion model (auxiliary network and fusion head jointly)
/// on `L_SSSV + L_sf`.
pub fn train_msfm(
    data: &TrainingData,
    use_sssv_score: bool,
    config: &TrainConfig,
) -> Result<(MsfmModel, TrainLog)> {
    config.validate()?;
    data.check_coverage(true)?;
    let scores = data.cm_scores.expect("coverage checked");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MsfmModel::init(data.dims(), use_sssv_score, &mut rng);
    let mut grads = model.zero_grads();
    let log = train_on_pairs(
        &mut model,
        &mut grads,
        data,
        config,
        &mut rng,
        |m, pair, g| {
            let (enroll_asv, enroll_cm) = data.emb(&pair.enroll_utterance_id);
            let (test_asv, test_cm) = data.emb(&pair.test_utterance_id);
            let input = MsfmInput {
                enroll_asv,
                enroll_cm,
                test_asv,
                test_cm,
                cm_score: scores
                    .get(&pair.test_utterance_id)
                    .expect("coverage checked"),
            };
            let t = one_hot(pair.sv_label.class_index());
            let l = one_hot(pair.sasv_label.class_index());
            Ok(m.loss_and_grad(&input, &t, &l, g)?.total)
        },
    )?;
    Ok((model, log))
}

/// Trains the three-embedding MLP baseline with cross entropy on SASV labels.
pub fn train_baseline2(
    data: &TrainingData,
    config: &TrainConfig,
) -> Result<(Baseline2Model, TrainLog)> {
    config.validate()?;
    data.check_coverage(false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Baseline2Model::init(data.dims(), &mut rng);
    let mut grads = crate::nn::MlpParams::zeros(model.mlp.spec());
    let log = train_on_pairs(
        &mut model,
        &mut grads,
        data,
        config,
        &mut rng,
        |m, pair, g| {
            let (enroll_asv, _) = data.emb(&pair.enroll_utterance_id);
            let (test_asv, test_cm) = data.emb(&pair.test_utterance_id);
            let l = one_hot(pair.sasv_label.class_index());
            m.loss_and_grad(enroll_asv, test_asv, test_cm, &l, g)
        },
    )?;
    Ok((model, log))
}

/// Trains the embedding projector on `samples_per_epoch` fresh triplets per
/// epoch, `triplets_per_batch` per optimizer step.
pub fn train_iep(data: &TrainingData, config: &TrainConfig) -> Result<(IepModel, TrainLog)> {
    config.validate()?;
    data.check_coverage(false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = IepModel::init(data.dims(), config.margin, &mut rng);
    model.length_norm = config.iep_length_norm;
    let mut grads = model.zero_grads();
    let optimizer = Optimizer::new(config);
    let mut state = optimizer.init_state(&model);
    let mut log = TrainLog::default();
    for epoch in 0..config.epochs {
        let triplets = sample_triplets(data.records, config.samples_per_epoch, &mut rng)?;
        let mut epoch_total = 0.0;
        for (step, batch) in triplets.chunks(config.triplets_per_batch).enumerate() {
            let inputs: Vec<_> = batch
                .iter()
                .map(|t| {
                    [
                        data.emb(&t.anchor_id),
                        data.emb(&t.positive_id),
                        data.emb(&t.negative_id),
                    ]
                })
                .collect();
            grads.fill_zero();
            let loss = model.triplet_loss_and_grad(&inputs, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            optimizer
                .step(&mut model, &grads, &mut state)
                .map_err(|_| Error::NonFiniteLoss { epoch, step })?;
            epoch_total += loss * batch.len() as f64;
        }
        let mean = epoch_total / triplets.len() as f64;
        debug!("epoch {} mean triplet loss {mean:.6}", epoch + 1);
        log.epoch_losses.push(mean);
    }
    Ok((model, log))
}
