//! Synthetic embeddings with the geometry seen on real ASV/CM front-ends:
//! target and non-target ASV scores well separated, spoof ASV scores spread
//! over the target region, and a CM space where bonafide and spoof form two
//! Gaussian clusters.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{
    CmScores, EmbeddingStore, EnrollmentMap, SpoofKey, StoreKind, TrialLabel, TrialRecord,
    UtteranceRecord,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_speakers: usize,
    /// Bonafide utterances per speaker, enrollment included.
    pub utts_per_speaker: usize,
    pub spoofs_per_speaker: usize,
    /// Bonafide utterances per dev/eval speaker reserved for enrollment.
    pub enroll_per_speaker: usize,
    pub dev_speakers: usize,
    pub eval_speakers: usize,
    /// Non-target trials generated per bonafide test utterance.
    pub nontargets_per_test: usize,
    pub spoof_systems: usize,
    pub asv_dim: usize,
    pub cm_dim: usize,
    /// Per-coordinate standard deviation around the speaker mean.
    pub asv_noise: f64,
    /// Speaker means are drawn from a random subspace of this rank
    /// (0 = the whole ASV space). Noise is added in every dimension.
    pub speaker_rank: usize,
    /// Per-coordinate standard deviation of spoofs around the target mean.
    pub spoof_asv_spread: f64,
    /// Distance between the bonafide and spoof CM cluster means.
    pub cm_separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_speakers: 50,
            utts_per_speaker: 40,
            spoofs_per_speaker: 40,
            enroll_per_speaker: 2,
            dev_speakers: 10,
            eval_speakers: 10,
            nontargets_per_test: 1,
            spoof_systems: 6,
            asv_dim: 192,
            cm_dim: 160,
            asv_noise: 0.12,
            speaker_rank: 24,
            spoof_asv_spread: 0.13,
            cm_separation: 6.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn train_speakers(&self) -> usize {
        self.n_speakers
            .saturating_sub(self.dev_speakers + self.eval_speakers)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_speakers", self.n_speakers),
            ("utts_per_speaker", self.utts_per_speaker),
            ("spoofs_per_speaker", self.spoofs_per_speaker),
            ("enroll_per_speaker", self.enroll_per_speaker),
            ("nontargets_per_test", self.nontargets_per_test),
            ("spoof_systems", self.spoof_systems),
            ("asv_dim", self.asv_dim),
            ("cm_dim", self.cm_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.n_speakers < 2 {
            return Err(Error::Config(
                "at least two speakers are needed for non-target trials".into(),
            ));
        }
        if self.utts_per_speaker < 2 || self.utts_per_speaker <= self.enroll_per_speaker {
            return Err(Error::Config(
                "utts_per_speaker must exceed enroll_per_speaker and be at least 2".into(),
            ));
        }
        for (name, n) in [
            ("dev_speakers", self.dev_speakers),
            ("eval_speakers", self.eval_speakers),
        ] {
            if n == 1 {
                return Err(Error::Config(format!("{name} must be 0 or at least 2")));
            }
            if n > 0 && self.nontargets_per_test >= n {
                return Err(Error::Config(format!(
                    "nontargets_per_test must be smaller than {name}"
                )));
            }
        }
        if self.speaker_rank > self.asv_dim {
            return Err(Error::Config("speaker_rank must not exceed asv_dim".into()));
        }
        if self.train_speakers() < 2 {
            return Err(Error::Config(
                "need at least two training speakers after the dev/eval split".into(),
            ));
        }
        for (name, v) in [
            ("asv_noise", self.asv_noise),
            ("spoof_asv_spread", self.spoof_asv_spread),
            ("cm_separation", self.cm_separation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// A dev or eval partition: its utterances, enrollment map and trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub records: Vec<UtteranceRecord>,
    pub enrollment: EnrollmentMap,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub train: Vec<UtteranceRecord>,
    pub dev: Partition,
    pub eval: Partition,
    pub asv: EmbeddingStore,
    pub cm: EmbeddingStore,
    /// Bonafide posterior of the ideal countermeasure for the CM clusters.
    pub cm_scores: CmScores,
}

struct Generator {
    rng: ChaCha8Rng,
    cfg: SyntheticConfig,
    cm_direction: Vec<f64>,
    /// Orthonormal basis of the speaker subspace; empty for full rank.
    speaker_basis: Vec<Vec<f64>>,
    asv: EmbeddingStore,
    cm: EmbeddingStore,
    cm_scores: CmScores,
    next_system: usize,
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = crate::vector::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

impl Generator {
    fn gaussian(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.rng.sample(StandardNormal)).collect()
    }

    fn unit(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v = self.gaussian(dim);
            if crate::vector::norm(&v) > 1e-12 {
                return normalized(v);
            }
        }
    }

    fn speaker_mean(&mut self) -> Vec<f64> {
        if self.speaker_basis.is_empty() {
            return self.unit(self.cfg.asv_dim);
        }
        let coeffs = self.unit(self.speaker_basis.len());
        let mut mean = vec![0.0; self.cfg.asv_dim];
        for (c, b) in coeffs.iter().zip(&self.speaker_basis) {
            crate::vector::axpy(*c, b, &mut mean);
        }
        normalized(mean)
    }

    /// Gram-Schmidt on Gaussian draws.
    fn subspace(&mut self, rank: usize) -> Vec<Vec<f64>> {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
        while basis.len() < rank {
            let mut v = self.gaussian(self.cfg.asv_dim);
            for b in &basis {
                let p = crate::vector::dot(b, &v);
                crate::vector::axpy(-p, b, &mut v);
            }
            if crate::vector::norm(&v) > 1e-6 {
                basis.push(normalized(v));
            }
        }
        basis
    }

    fn around(&mut self, mean: &[f64], sd: f64) -> Vec<f64> {
        let noise = self.gaussian(mean.len());
        let v: Vec<f64> = mean.iter().zip(&noise).map(|(m, n)| m + sd * n).collect();
        if crate::vector::norm(&v) == 0.0 {
            return mean.to_vec();
        }
        normalized(v)
    }

    fn emit(&mut self, id: &str, asv: Vec<f64>, bonafide: bool) -> Result<()> {
        let half = 0.5 * self.cfg.cm_separation * if bonafide { 1.0 } else { -1.0 };
        let noise = self.gaussian(self.cfg.cm_dim);
        let cm: Vec<f64> = self
            .cm_direction
            .iter()
            .zip(&noise)
            .map(|(d, n)| half * d + n)
            .collect();
        // log-likelihood ratio of the two unit-variance clusters
        let llr = self.cfg.cm_separation * crate::vector::dot(&self.cm_direction, &cm);
        self.cm_scores.insert(id, 1.0 / (1.0 + (-llr).exp()))?;
        self.asv.insert(id, asv)?;
        self.cm.insert(id, cm)?;
        Ok(())
    }

    /// Bonafide then spoofed utterances for each speaker.
    fn speakers(&mut self, tag: char, speakers: &[String]) -> Result<Vec<UtteranceRecord>> {
        let mut records = Vec::new();
        let mut counter = 0usize;
        for spk in speakers {
            let mean = self.speaker_mean();
            for _ in 0..self.cfg.utts_per_speaker {
                let id = format!("SYN_{tag}_{counter:06}");
                counter += 1;
                let v = self.around(&mean, self.cfg.asv_noise);
                self.emit(&id, v, true)?;
                records.push(UtteranceRecord {
                    utterance_id: id,
                    speaker_id: spk.clone(),
                    spoof_key: SpoofKey::Bonafide,
                    system_id: None,
                });
            }
            for _ in 0..self.cfg.spoofs_per_speaker {
                let id = format!("SYN_{tag}_{counter:06}");
                counter += 1;
                let v = self.around(&mean, self.cfg.spoof_asv_spread);
                self.emit(&id, v, false)?;
                let system = format!("A{:02}", self.next_system % self.cfg.spoof_systems + 1);
                self.next_system += 1;
                records.push(UtteranceRecord {
                    utterance_id: id,
                    speaker_id: spk.clone(),
                    spoof_key: SpoofKey::Spoof,
                    system_id: Some(system),
                });
            }
        }
        Ok(records)
    }

    fn partition(&mut self, tag: char, speakers: &[String]) -> Result<Partition> {
        let records = self.speakers(tag, speakers)?;
        let mut enrollment = EnrollmentMap::new();
        let mut tests: Vec<(usize, &str)> = Vec::new();
        let mut spoofs: Vec<(usize, &str)> = Vec::new();
        for (s, spk) in speakers.iter().enumerate() {
            let bona: Vec<&str> = records
                .iter()
                .filter(|r| &r.speaker_id == spk && r.is_bonafide())
                .map(|r| r.utterance_id.as_str())
                .collect();
            let (enroll, test) = bona.split_at(self.cfg.enroll_per_speaker);
            enrollment.insert(spk.clone(), enroll.iter().map(|s| s.to_string()).collect());
            tests.extend(test.iter().map(|u| (s, *u)));
            spoofs.extend(
                records
                    .iter()
                    .filter(|r| &r.speaker_id == spk && !r.is_bonafide())
                    .map(|r| (s, r.utterance_id.as_str())),
            );
        }
        let trial = |s: usize, utt: &str, label| TrialRecord {
            enroll_speaker_id: speakers[s].clone(),
            enroll_utterance_ids: enrollment[&speakers[s]].clone(),
            test_utterance_id: utt.to_string(),
            label,
        };
        let mut trials = Vec::new();
        for &(s, utt) in &tests {
            trials.push(trial(s, utt, TrialLabel::Target));
            // distinct other speakers
            let picks = index::sample(
                &mut self.rng,
                speakers.len() - 1,
                self.cfg.nontargets_per_test,
            );
            for k in picks.iter() {
                let o = if k >= s { k + 1 } else { k };
                trials.push(trial(o, utt, TrialLabel::Nontarget));
            }
        }
        for &(s, utt) in &spoofs {
            trials.push(trial(s, utt, TrialLabel::Spoof));
        }
        Ok(Partition {
            records,
            enrollment,
            trials,
        })
    }
}

/// Builds a train/dev/eval dataset. Speakers are disjoint across partitions.
/// Output is a pure function of the config (including its seed).
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut g = Generator {
        cm_direction: Vec::new(),
        speaker_basis: Vec::new(),
        asv: EmbeddingStore::new(StoreKind::Asv, cfg.asv_dim)?,
        cm: EmbeddingStore::new(StoreKind::Cm, cfg.cm_dim)?,
        cm_scores: CmScores::new(),
        next_system: 0,
        cfg: cfg.clone(),
        rng: ChaCha8Rng::from_rng(&mut rng),
    };
    g.cm_direction = g.unit(cfg.cm_dim);
    if cfg.speaker_rank > 0 && cfg.speaker_rank < cfg.asv_dim {
        g.speaker_basis = g.subspace(cfg.speaker_rank);
    }

    let names: Vec<String> = (0..cfg.n_speakers).map(|i| format!("SYN_{i:04}")).collect();
    let n_train = cfg.train_speakers();
    let (train_spk, rest) = names.split_at(n_train);
    let (dev_spk, eval_spk) = rest.split_at(cfg.dev_speakers);

    let train = g.speakers('T', train_spk)?;
    let dev = if dev_spk.is_empty() {
        Partition {
            records: Vec::new(),
            enrollment: EnrollmentMap::new(),
            trials: Vec::new(),
        }
    } else {
        g.partition('D', dev_spk)?
    };
    let eval = if eval_spk.is_empty() {
        Partition {
            records: Vec::new(),
            enrollment: EnrollmentMap::new(),
            trials: Vec::new(),
        }
    } else {
        g.partition('E', eval_spk)?
    };
    Ok(SyntheticDataset {
        train,
        dev,
        eval,
        asv: g.asv,
        cm: g.cm,
        cm_scores: g.cm_scores,
    })
}
