//! SASV back-ends.
//!
//! - [`MsfmModel`]: score fusion. An auxiliary speaker verification network
//!   (`u1`, `u2`, `pj`) reads enrollment and test embeddings and produces a
//!   score that is fused with the ASV and CM scores by `sf`.
//! - [`IepModel`]: embedding projection `z = g(f(x ⊕ y) ⊕ x ⊕ y)` trained with
//!   a cosine triplet loss; trials are scored by cosine similarity of `z`.
//! - [`baseline1_score`] (ASV + CM score sum) and [`Baseline2Model`] (an MLP
//!   over enrollment ASV, test ASV and test CM embeddings).

mod baseline;
mod checkpoint;
mod iep;
mod msfm;
mod scoring;
mod train;

use std::fmt;
use std::str::FromStr;

pub use baseline::{baseline1_score, baseline2_spec, Baseline2Model};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use iep::{f_spec, g_spec, triplet_loss, IepGrads, IepModel, IEP_DIM};
pub use msfm::{
    msfm_loss, pj_spec, sf_spec, u_spec, MsfmGrads, MsfmInput, MsfmLoss, MsfmModel, MsfmOutput,
    FUSION_DIM,
};
pub use scoring::{score_trials, EvalData, System};
pub use train::{train_baseline2, train_iep, train_msfm, TrainLog, TrainingData};

use crate::Error;

/// ASV and CM embedding sizes the networks are wired for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingDims {
    pub asv: usize,
    pub cm: usize,
}

impl Default for EmbeddingDims {
    fn default() -> Self {
        Self { asv: 192, cm: 160 }
    }
}

impl EmbeddingDims {
    pub fn joint(&self) -> usize {
        self.asv + self.cm
    }
}

/// Cosine similarity of two embeddings, the ASV scoring rule.
pub fn cosine_score(a: &[f64], b: &[f64]) -> crate::Result<f64> {
    crate::vector::cosine(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Msfm,
    MsfmNoSssv,
    Iep,
    Baseline1,
    Baseline2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Msfm,
        ModelKind::MsfmNoSssv,
        ModelKind::Iep,
        ModelKind::Baseline1,
        ModelKind::Baseline2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Msfm => "msfm",
            ModelKind::MsfmNoSssv => "msfm-no-sssv",
            ModelKind::Iep => "iep",
            ModelKind::Baseline1 => "baseline1",
            ModelKind::Baseline2 => "baseline2",
        }
    }

    pub fn is_trainable(self) -> bool {
        self != ModelKind::Baseline1
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

fn check_len(expected: usize, v: &[f64]) -> crate::Result<()> {
    if v.len() != expected {
        return Err(Error::shape(expected, v.len()));
    }
    Ok(())
}

/// Gradient of `softmax(logits)[1]` with respect to two logits, scaled by `upstream`.
fn target_prob_grad(p: &[f64], upstream: f64) -> [f64; 2] {
    [-upstream * p[1] * p[0], upstream * p[1] * (1.0 - p[1])]
}
