use rand::Rng;

use super::{check_len, target_prob_grad, EmbeddingDims};
use crate::nn::{cce_grad, cce_loss, softmax, Mlp, MlpParams, MlpSpec, Parameters};
use crate::vector::{concat, cosine};
use crate::{Error, Result};

/// Output width of `u1` and `u2`.
pub const FUSION_DIM: usize = 160;

/// `u1` / `u2`: FC(d×128) ELU FC(128×128) ELU FC(128×64) ELU FC(64×160).
pub fn u_spec(dims: EmbeddingDims) -> MlpSpec {
    MlpSpec::feedforward(&[dims.joint(), 128, 128, 64, FUSION_DIM], false)
        .expect("static architecture")
}

/// `pj`: FC(320×128) ELU FC(128×64) ELU FC(64×2).
pub fn pj_spec() -> MlpSpec {
    MlpSpec::feedforward(&[2 * FUSION_DIM, 128, 64, 2], false).expect("static architecture")
}

/// `sf`: FC(2 or 3 ×16) ELU FC(16×16) ELU FC(16×2).
pub fn sf_spec(use_sssv_score: bool) -> MlpSpec {
    let input = if use_sssv_score { 3 } else { 2 };
    MlpSpec::feedforward(&[input, 16, 16, 2], false).expect("static architecture")
}

/// Embeddings of one enrollment/test pair plus the test utterance's CM score.
#[derive(Debug, Clone, Copy)]
pub struct MsfmInput<'a> {
    pub enroll_asv: &'a [f64],
    pub enroll_cm: &'a [f64],
    pub test_asv: &'a [f64],
    pub test_cm: &'a [f64],
    pub cm_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsfmOutput {
    /// Auxiliary network logits `s` (non-target, target).
    pub s: [f64; 2],
    /// Fusion logits `v` (non-target, target).
    pub v: [f64; 2],
    pub asv_score: f64,
    pub sssv_score: f64,
    pub sasv_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsfmLoss {
    pub sssv: f64,
    pub sf: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsfmModel {
    dims: EmbeddingDims,
    use_sssv_score: bool,
    pub u1: Mlp,
    pub u2: Mlp,
    pub pj: Mlp,
    pub sf: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsfmGrads {
    pub u1: MlpParams,
    pub u2: MlpParams,
    pub pj: MlpParams,
    pub sf: MlpParams,
}

fn arr2(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

impl MsfmModel {
    pub fn zeros(dims: EmbeddingDims, use_sssv_score: bool) -> Self {
        Self {
            dims,
            use_sssv_score,
            u1: Mlp::zeros(u_spec(dims)),
            u2: Mlp::zeros(u_spec(dims)),
            pj: Mlp::zeros(pj_spec()),
            sf: Mlp::zeros(sf_spec(use_sssv_score)),
        }
    }

    pub fn init<R: Rng + ?Sized>(dims: EmbeddingDims, use_sssv_score: bool, rng: &mut R) -> Self {
        Self {
            dims,
            use_sssv_score,
            u1: Mlp::glorot_uniform(u_spec(dims), rng),
            u2: Mlp::glorot_uniform(u_spec(dims), rng),
            pj: Mlp::glorot_uniform(pj_spec(), rng),
            sf: Mlp::glorot_uniform(sf_spec(use_sssv_score), rng),
        }
    }

    /// Assembles a model from blocks, checking every block's architecture.
    pub fn from_parts(
        dims: EmbeddingDims,
        use_sssv_score: bool,
        u1: Mlp,
        u2: Mlp,
        pj: Mlp,
        sf: Mlp,
    ) -> Result<Self> {
        let expected = [
            ("u1", u_spec(dims)),
            ("u2", u_spec(dims)),
            ("pj", pj_spec()),
            ("sf", sf_spec(use_sssv_score)),
        ];
        for ((name, spec), block) in expected.iter().zip([&u1, &u2, &pj, &sf]) {
            if block.spec() != spec {
                return Err(Error::Spec(format!(
                    "block {name} does not match its architecture"
                )));
            }
        }
        Ok(Self {
            dims,
            use_sssv_score,
            u1,
            u2,
            pj,
            sf,
        })
    }

    pub fn dims(&self) -> EmbeddingDims {
        self.dims
    }

    pub fn use_sssv_score(&self) -> bool {
        self.use_sssv_score
    }

    pub fn zero_grads(&self) -> MsfmGrads {
        MsfmGrads {
            u1: MlpParams::zeros(self.u1.spec()),
            u2: MlpParams::zeros(self.u2.spec()),
            pj: MlpParams::zeros(self.pj.spec()),
            sf: MlpParams::zeros(self.sf.spec()),
        }
    }

    fn check_inputs(&self, input: &MsfmInput) -> Result<()> {
        check_len(self.dims.asv, input.enroll_asv)?;
        check_len(self.dims.cm, input.enroll_cm)?;
        check_len(self.dims.asv, input.test_asv)?;
        check_len(self.dims.cm, input.test_cm)
    }

    /// Auxiliary network logits `s = pj(u1(enroll) ⊕ u2(test))`.
    pub fn sssv_forward(
        &self,
        enroll_asv: &[f64],
        enroll_cm: &[f64],
        test_asv: &[f64],
        test_cm: &[f64],
    ) -> Result<[f64; 2]> {
        let input = MsfmInput {
            enroll_asv,
            enroll_cm,
            test_asv,
            test_cm,
            cm_score: 0.0,
        };
        self.check_inputs(&input)?;
        let a1 = self.u1.apply(&concat(&[enroll_asv, enroll_cm]))?;
        let a2 = self.u2.apply(&concat(&[test_asv, test_cm]))?;
        Ok(arr2(&self.pj.apply(&concat(&[&a1, &a2]))?))
    }

    /// Fusion head. `sssv_score` must be given exactly when the model uses it.
    pub fn msfm_forward(
        &self,
        asv_score: f64,
        cm_score: f64,
        sssv_score: Option<f64>,
    ) -> Result<([f64; 2], f64)> {
        let input = match (self.use_sssv_score, sssv_score) {
            (true, Some(s)) => vec![asv_score, cm_score, s],
            (false, None) => vec![asv_score, cm_score],
            (true, None) => return Err(Error::shape(3, 2)),
            (false, Some(_)) => return Err(Error::shape(2, 3)),
        };
        let v = arr2(&self.sf.apply(&input)?);
        Ok((v, softmax(&v)?[1]))
    }

    pub fn forward(&self, input: &MsfmInput) -> Result<MsfmOutput> {
        let asv_score = cosine(input.enroll_asv, input.test_asv)?;
        let s = self.sssv_forward(
            input.enroll_asv,
            input.enroll_cm,
            input.test_asv,
            input.test_cm,
        )?;
        let sssv_score = softmax(&s)?[1];
        let (v, sasv_score) = self.msfm_forward(
            asv_score,
            input.cm_score,
            self.use_sssv_score.then_some(sssv_score),
        )?;
        Ok(MsfmOutput {
            s,
            v,
            asv_score,
            sssv_score,
            sasv_score,
        })
    }

    pub fn score(&self, input: &MsfmInput) -> Result<f64> {
        self.forward(input).map(|o| o.sasv_score)
    }

    /// `L_SSSV = CCE(s, t)`, `L_sf = CCE(v, l)`, `L_TOTAL = L_SSSV + L_sf`, and
    /// the gradient of `L_TOTAL` accumulated into `grads`.
    ///
    /// With the auxiliary score fused, `L_sf` also reaches `u1`, `u2` and `pj`
    /// through `softmax(s)[1]`.
    pub fn loss_and_grad(
        &self,
        input: &MsfmInput,
        t: &[f64],
        l: &[f64],
        grads: &mut MsfmGrads,
    ) -> Result<MsfmLoss> {
        self.loss_and_grad_weighted(input, t, l, [1.0, 1.0], grads)
    }

    /// Like [`Self::loss_and_grad`], but accumulates the gradient of
    /// `w[0] · L_SSSV + w[1] · L_sf`. The returned losses are unweighted.
    pub fn loss_and_grad_weighted(
        &self,
        input: &MsfmInput,
        t: &[f64],
        l: &[f64],
        w: [f64; 2],
        grads: &mut MsfmGrads,
    ) -> Result<MsfmLoss> {
        self.check_inputs(input)?;
        let asv_score = cosine(input.enroll_asv, input.test_asv)?;
        let (a1, tape1) = self
            .u1
            .forward(&concat(&[input.enroll_asv, input.enroll_cm]))?;
        let (a2, tape2) = self.u2.forward(&concat(&[input.test_asv, input.test_cm]))?;
        let (s, tape_pj) = self.pj.forward(&concat(&[&a1, &a2]))?;
        let p = softmax(&s)?;
        let sf_in = if self.use_sssv_score {
            vec![asv_score, input.cm_score, p[1]]
        } else {
            vec![asv_score, input.cm_score]
        };
        let (v, tape_sf) = self.sf.forward(&sf_in)?;

        let loss_sssv = cce_loss(&s, t)?;
        let loss_sf = cce_loss(&v, l)?;

        let dv: Vec<f64> = cce_grad(&v, l)?.iter().map(|g| w[1] * g).collect();
        let d_sf_in = self.sf.backward_into(&tape_sf, &dv, &mut grads.sf)?;
        let mut ds: Vec<f64> = cce_grad(&s, t)?.iter().map(|g| w[0] * g).collect();
        if self.use_sssv_score {
            let extra = target_prob_grad(&p, d_sf_in[2]);
            ds[0] += extra[0];
            ds[1] += extra[1];
        }
        let d_concat = self.pj.backward_into(&tape_pj, &ds, &mut grads.pj)?;
        let (d_a1, d_a2) = d_concat.split_at(FUSION_DIM);
        self.u1.backward_into(&tape1, d_a1, &mut grads.u1)?;
        self.u2.backward_into(&tape2, d_a2, &mut grads.u2)?;

        Ok(MsfmLoss {
            sssv: loss_sssv,
            sf: loss_sf,
            total: loss_sssv + loss_sf,
        })
    }
}

/// Both cross-entropy terms and their sum for one pair, with one-hot targets
/// `t` (same speaker) and `l` (SASV target).
pub fn msfm_loss(model: &MsfmModel, input: &MsfmInput, t: &[f64], l: &[f64]) -> Result<MsfmLoss> {
    let out = model.forward(input)?;
    let sssv = cce_loss(&out.s, t)?;
    let sf = cce_loss(&out.v, l)?;
    Ok(MsfmLoss {
        sssv,
        sf,
        total: sssv + sf,
    })
}

impl Parameters for MsfmModel {
    fn tensors(&self) -> Vec<&[f64]> {
        [&self.u1, &self.u2, &self.pj, &self.sf]
            .into_iter()
            .flat_map(|m| m.params.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.u1, &mut self.u2, &mut self.pj, &mut self.sf]
            .into_iter()
            .flat_map(|m| m.params.tensors_mut())
            .collect()
    }
}

impl Parameters for MsfmGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        [&self.u1, &self.u2, &self.pj, &self.sf]
            .into_iter()
            .flat_map(|m| m.tensors())
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        [&mut self.u1, &mut self.u2, &mut self.pj, &mut self.sf]
            .into_iter()
            .flat_map(|m| m.tensors_mut())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheck};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_dims() -> EmbeddingDims {
        EmbeddingDims { asv: 6, cm: 5 }
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn block_shapes_follow_architecture() {
        let m = MsfmModel::zeros(EmbeddingDims::default(), true);
        assert_eq!(m.u1.in_dim(), 352);
        assert_eq!(m.u1.out_dim(), 160);
        assert_eq!(m.pj.in_dim(), 320);
        assert_eq!(m.pj.out_dim(), 2);
        assert_eq!(m.sf.in_dim(), 3);
        assert_eq!(
            MsfmModel::zeros(EmbeddingDims::default(), false)
                .sf
                .in_dim(),
            2
        );
        assert!(MsfmModel::from_parts(
            EmbeddingDims::default(),
            false,
            m.u1.clone(),
            m.u2.clone(),
            m.pj.clone(),
            m.sf.clone()
        )
        .is_err());
    }

    #[test]
    fn zero_model_outputs() {
        let m = MsfmModel::zeros(EmbeddingDims::default(), true);
        let s = m
            .sssv_forward(&[0.3; 192], &[0.1; 160], &[-0.2; 192], &[0.5; 160])
            .unwrap();
        assert_eq!(s, [0.0, 0.0]);
        let (v, score) = m.msfm_forward(0.4, 0.9, Some(0.5)).unwrap();
        assert_eq!(v, [0.0, 0.0]);
        assert_eq!(score, 0.5);
        assert!(m
            .sssv_forward(&[0.3; 191], &[0.1; 160], &[0.2; 192], &[0.5; 160])
            .is_err());
    }

    #[test]
    fn arity_must_match_variant() {
        let with = MsfmModel::zeros(small_dims(), true);
        let without = MsfmModel::zeros(small_dims(), false);
        assert!(with.msfm_forward(0.1, 0.2, None).is_err());
        assert!(without.msfm_forward(0.1, 0.2, Some(0.3)).is_err());
        assert!(without.msfm_forward(0.1, 0.2, None).is_ok());
    }

    #[test]
    fn uniform_heads_give_two_ln2() {
        let m = MsfmModel::zeros(small_dims(), true);
        let e = [0.5; 6];
        let c = [0.1; 5];
        let input = MsfmInput {
            enroll_asv: &e,
            enroll_cm: &c,
            test_asv: &e,
            test_cm: &c,
            cm_score: 0.7,
        };
        let loss = msfm_loss(&m, &input, &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((loss.total - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(loss.total, loss.sssv + loss.sf);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for use_sssv in [true, false] {
            let mut rng = ChaCha8Rng::seed_from_u64(use_sssv as u64);
            let m = MsfmModel::init(small_dims(), use_sssv, &mut rng);
            let (ea, ec, ta, tc) = (
                random_vec(&mut rng, 6),
                random_vec(&mut rng, 5),
                random_vec(&mut rng, 6),
                random_vec(&mut rng, 5),
            );
            let input = MsfmInput {
                enroll_asv: &ea,
                enroll_cm: &ec,
                test_asv: &ta,
                test_cm: &tc,
                cm_score: 0.3,
            };
            let (t, l) = ([0.0, 1.0], [1.0, 0.0]);
            let mut grads = m.zero_grads();
            let loss = m.loss_and_grad(&input, &t, &l, &mut grads).unwrap();
            assert!((loss.total - msfm_loss(&m, &input, &t, &l).unwrap().total).abs() < 1e-12);
            let report = grad_check(
                &m,
                &grads,
                |m: &MsfmModel| msfm_loss(m, &input, &t, &l).unwrap().total,
                GradCheck {
                    max_per_tensor: Some(60),
                    ..GradCheck::default()
                },
            );
            assert!(report.max_rel_error < 1e-4, "{use_sssv}: {report:?}");
        }
    }

    #[test]
    fn without_sssv_score_the_auxiliary_branch_still_learns() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = MsfmModel::init(small_dims(), false, &mut rng);
        let v = random_vec(&mut rng, 11);
        let input = MsfmInput {
            enroll_asv: &v[..6],
            enroll_cm: &v[6..],
            test_asv: &v[..6],
            test_cm: &v[6..],
            cm_score: 0.3,
        };
        let mut grads = m.zero_grads();
        m.loss_and_grad(&input, &[0.0, 1.0], &[0.0, 1.0], &mut grads)
            .unwrap();
        let norm = |p: &MlpParams| {
            p.tensors()
                .iter()
                .flat_map(|t| t.iter())
                .map(|x| x * x)
                .sum::<f64>()
        };
        assert!(norm(&grads.u1) > 0.0);
        assert!(norm(&grads.pj) > 0.0);
        assert!(norm(&grads.sf) > 0.0);
    }
}
