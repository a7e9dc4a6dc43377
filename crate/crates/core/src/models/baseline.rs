use rand::Rng;

use super::{check_len, EmbeddingDims};
use crate::nn::{cce_grad, cce_loss, softmax, Mlp, MlpParams, MlpSpec, Parameters};
use crate::vector::concat;
use crate::{Error, Result};

/// Sum of the ASV and CM scores; needs no training.
pub fn baseline1_score(asv_score: f64, cm_score: f64) -> f64 {
    asv_score + cm_score
}

/// `(2·asv + cm) → 1024 → 1024 → 1024 → 2` with ELU after each hidden layer.
pub fn baseline2_spec(dims: EmbeddingDims) -> MlpSpec {
    MlpSpec::feedforward(&[2 * dims.asv + dims.cm, 1024, 1024, 1024, 2], false)
        .expect("static architecture")
}

/// MLP over enrollment ASV, test ASV and test CM embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline2Model {
    dims: EmbeddingDims,
    pub mlp: Mlp,
}

impl Baseline2Model {
    pub fn zeros(dims: EmbeddingDims) -> Self {
        Self {
            dims,
            mlp: Mlp::zeros(baseline2_spec(dims)),
        }
    }

    pub fn init<R: Rng + ?Sized>(dims: EmbeddingDims, rng: &mut R) -> Self {
        Self {
            dims,
            mlp: Mlp::glorot_uniform(baseline2_spec(dims), rng),
        }
    }

    pub fn from_parts(dims: EmbeddingDims, mlp: Mlp) -> Result<Self> {
        if mlp.spec() != &baseline2_spec(dims) {
            return Err(Error::Spec(
                "baseline2 network does not match its architecture".into(),
            ));
        }
        Ok(Self { dims, mlp })
    }

    pub fn dims(&self) -> EmbeddingDims {
        self.dims
    }

    fn input(&self, enroll_asv: &[f64], test_asv: &[f64], test_cm: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dims.asv, enroll_asv)?;
        check_len(self.dims.asv, test_asv)?;
        check_len(self.dims.cm, test_cm)?;
        Ok(concat(&[enroll_asv, test_asv, test_cm]))
    }

    /// Two logits (non-target, target).
    pub fn forward(
        &self,
        enroll_asv: &[f64],
        test_asv: &[f64],
        test_cm: &[f64],
    ) -> Result<Vec<f64>> {
        self.mlp.apply(&self.input(enroll_asv, test_asv, test_cm)?)
    }

    /// Target-class probability.
    pub fn score(&self, enroll_asv: &[f64], test_asv: &[f64], test_cm: &[f64]) -> Result<f64> {
        Ok(softmax(&self.forward(enroll_asv, test_asv, test_cm)?)?[1])
    }

    pub fn loss_and_grad(
        &self,
        enroll_asv: &[f64],
        test_asv: &[f64],
        test_cm: &[f64],
        l: &[f64],
        grads: &mut MlpParams,
    ) -> Result<f64> {
        let (out, tape) = self
            .mlp
            .forward(&self.input(enroll_asv, test_asv, test_cm)?)?;
        let loss = cce_loss(&out, l)?;
        self.mlp.backward_into(&tape, &cce_grad(&out, l)?, grads)?;
        Ok(loss)
    }
}

impl Parameters for Baseline2Model {
    fn tensors(&self) -> Vec<&[f64]> {
        self.mlp.params.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.mlp.params.tensors_mut()
    }
}
