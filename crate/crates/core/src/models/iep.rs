use rand::Rng;

use super::{check_len, EmbeddingDims};
use crate::nn::{Mlp, MlpParams, MlpSpec, Parameters, Tape};
use crate::vector::{concat, cosine, cosine_with_grad};
use crate::{Error, Result};

/// Size of the projected SASV embedding.
pub const IEP_DIM: usize = 128;

/// `f`: FC(d×256) ELU FC(256×256) ELU FC(256×128) ELU.
pub fn f_spec(dims: EmbeddingDims) -> MlpSpec {
    MlpSpec::feedforward(&[dims.joint(), 256, 256, IEP_DIM], true).expect("static architecture")
}

/// `g`: FC((128 + d)×128).
pub fn g_spec(dims: EmbeddingDims) -> MlpSpec {
    MlpSpec::feedforward(&[IEP_DIM + dims.joint(), IEP_DIM], false).expect("static architecture")
}

fn unit_length(v: &[f64]) -> Result<Vec<f64>> {
    let n = crate::vector::norm(v);
    if n == 0.0 {
        return Err(Error::ZeroNorm("projector input"));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Mean hinge `max(0, cos(a, n) - cos(a, p) + margin)` over triplets.
pub fn triplet_loss(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    margin: f64,
) -> Result<f64> {
    if anchors.len() != positives.len() || anchors.len() != negatives.len() {
        return Err(Error::shape(
            anchors.len(),
            positives.len().max(negatives.len()),
        ));
    }
    if anchors.is_empty() {
        return Err(Error::Empty("triplet batch"));
    }
    let mut total = 0.0;
    for ((a, p), n) in anchors.iter().zip(positives).zip(negatives) {
        total += (cosine_with_grad(a, n)?.0 - cosine_with_grad(a, p)?.0 + margin).max(0.0);
    }
    Ok(total / anchors.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IepModel {
    dims: EmbeddingDims,
    pub f: Mlp,
    pub g: Mlp,
    pub margin: f64,
    /// Scale `x` and `y` to unit length before projecting.
    pub length_norm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IepGrads {
    pub f: MlpParams,
    pub g: MlpParams,
}

/// Forward record for one projection.
struct Trace {
    f: Tape,
    g: Tape,
}

impl IepModel {
    pub fn zeros(dims: EmbeddingDims, margin: f64) -> Self {
        Self {
            dims,
            f: Mlp::zeros(f_spec(dims)),
            g: Mlp::zeros(g_spec(dims)),
            margin,
            length_norm: true,
        }
    }

    pub fn init<R: Rng + ?Sized>(dims: EmbeddingDims, margin: f64, rng: &mut R) -> Self {
        Self {
            dims,
            f: Mlp::glorot_uniform(f_spec(dims), rng),
            g: Mlp::glorot_uniform(g_spec(dims), rng),
            margin,
            length_norm: true,
        }
    }

    pub fn from_parts(dims: EmbeddingDims, margin: f64, f: Mlp, g: Mlp) -> Result<Self> {
        if f.spec() != &f_spec(dims) || g.spec() != &g_spec(dims) {
            return Err(Error::Spec(
                "projector blocks do not match their architecture".into(),
            ));
        }
        if !(0.0..=2.0).contains(&margin) {
            return Err(Error::Config("margin must lie in [0, 2]".into()));
        }
        Ok(Self {
            dims,
            f,
            g,
            margin,
            length_norm: true,
        })
    }

    pub fn dims(&self) -> EmbeddingDims {
        self.dims
    }

    pub fn zero_grads(&self) -> IepGrads {
        IepGrads {
            f: MlpParams::zeros(self.f.spec()),
            g: MlpParams::zeros(self.g.spec()),
        }
    }

    fn project_traced(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Trace)> {
        check_len(self.dims.asv, x)?;
        check_len(self.dims.cm, y)?;
        let (x, y) = if self.length_norm {
            (unit_length(x)?, unit_length(y)?)
        } else {
            (x.to_vec(), y.to_vec())
        };
        let (x, y) = (x.as_slice(), y.as_slice());
        let (fx, f_tape) = self.f.forward(&concat(&[x, y]))?;
        let (z, g_tape) = self.g.forward(&concat(&[&fx, x, y]))?;
        Ok((
            z,
            Trace {
                f: f_tape,
                g: g_tape,
            },
        ))
    }

    /// `z = g(f(x ⊕ y) ⊕ x ⊕ y)`, with `x` and `y` first scaled to unit
    /// length when `length_norm` is set.
    pub fn project(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.project_traced(x, y).map(|(z, _)| z)
    }

    fn backward(&self, trace: &Trace, dz: &[f64], grads: &mut IepGrads) -> Result<()> {
        let d_g_in = self.g.backward_into(&trace.g, dz, &mut grads.g)?;
        self.f
            .backward_into(&trace.f, &d_g_in[..IEP_DIM], &mut grads.f)?;
        Ok(())
    }

    /// Cosine similarity of the projected enrollment and test embeddings.
    pub fn score(
        &self,
        enroll_x: &[f64],
        enroll_y: &[f64],
        test_x: &[f64],
        test_y: &[f64],
    ) -> Result<f64> {
        let ze = self.project(enroll_x, enroll_y)?;
        let zt = self.project(test_x, test_y)?;
        cosine(&ze, &zt)
    }

    /// Triplet loss of a batch given raw `(asv, cm)` embeddings for anchor,
    /// positive and negative, with its gradient accumulated into `grads`.
    pub fn triplet_loss_and_grad(
        &self,
        batch: &[[(&[f64], &[f64]); 3]],
        grads: &mut IepGrads,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("triplet batch"));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for [(xa, ya), (xp, yp), (xn, yn)] in batch {
            let (za, ta) = self.project_traced(xa, ya)?;
            let (zp, tp) = self.project_traced(xp, yp)?;
            let (zn, tn) = self.project_traced(xn, yn)?;
            let (cos_an, d_an_a, d_an_n) = cosine_with_grad(&za, &zn)?;
            let (cos_ap, d_ap_a, d_ap_p) = cosine_with_grad(&za, &zp)?;
            let hinge = cos_an - cos_ap + self.margin;
            if hinge <= 0.0 {
                continue;
            }
            total += hinge;
            let da: Vec<f64> = d_an_a
                .iter()
                .zip(&d_ap_a)
                .map(|(n, p)| scale * (n - p))
                .collect();
            let dp: Vec<f64> = d_ap_p.iter().map(|v| -scale * v).collect();
            let dn: Vec<f64> = d_an_n.iter().map(|v| scale * v).collect();
            self.backward(&ta, &da, grads)?;
            self.backward(&tp, &dp, grads)?;
            self.backward(&tn, &dn, grads)?;
        }
        Ok(total * scale)
    }
}

impl Parameters for IepModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.f.params.tensors();
        t.extend(self.g.params.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.f.params.tensors_mut();
        t.extend(self.g.params.tensors_mut());
        t
    }
}

impl Parameters for IepGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.f.tensors();
        t.extend(self.g.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.f.tensors_mut();
        t.extend(self.g.tensors_mut());
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, GradCheck, Optimizer, OptimizerKind, TrainConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(angle: f64) -> Vec<f64> {
        vec![angle.cos(), angle.sin()]
    }

    #[test]
    fn triplet_loss_closed_forms() {
        let a = vec![unit(0.0)];
        // cos(A,P) = 1, cos(A,N) = -1
        let l = triplet_loss(&a, &[unit(0.0)], &[unit(std::f64::consts::PI)], 0.5).unwrap();
        assert!(l.abs() < 1e-12);
        // cos(A,P) = cos(A,N)
        let l = triplet_loss(&a, &[unit(0.7)], &[unit(-0.7)], 0.5).unwrap();
        assert!((l - 0.5).abs() < 1e-12);
        // cos(A,N) - cos(A,P) = 0.2: cos(A,P) = 0.3, cos(A,N) = 0.5
        let l = triplet_loss(&a, &[unit(0.3f64.acos())], &[unit(0.5f64.acos())], 0.5).unwrap();
        assert!((l - 0.7).abs() < 1e-12);
        assert!(triplet_loss(&a, &[vec![0.0, 0.0]], &[unit(1.0)], 0.5).is_err());
        assert!(triplet_loss(&[], &[], &[], 0.5).is_err());
    }

    #[test]
    fn projection_shape_and_zero_model() {
        let m = IepModel::zeros(EmbeddingDims::default(), 0.5);
        assert_eq!(m.g.in_dim(), 480);
        let z = m.project(&[0.2; 192], &[-0.1; 160]).unwrap();
        assert_eq!(z, vec![0.0; 128]);
        assert!(m.project(&[0.2; 160], &[0.1; 192]).is_err());
    }

    #[test]
    fn skip_path_carries_x_when_f_is_zeroed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = IepModel::init(EmbeddingDims::default(), 0.5, &mut rng);
        m.f.params.fill_zero();
        let y = vec![0.1; 160];
        let z1 = m.project(&[0.2; 192], &y).unwrap();
        let mut x2 = vec![0.2; 192];
        x2[5] += 1.0;
        let z2 = m.project(&x2, &y).unwrap();
        assert!(z1.iter().zip(&z2).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn length_norm_ignores_input_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = IepModel::init(EmbeddingDims::default(), 0.5, &mut rng);
        let x: Vec<f64> = (0..192).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..160).map(|i| (i as f64 * 0.11).cos()).collect();
        let x3: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let z = m.project(&x, &y).unwrap();
        let z3 = m.project(&x3, &y).unwrap();
        assert!(z.iter().zip(&z3).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(m.project(&[0.0; 192], &y).is_err());
        m.length_norm = false;
        let z = m.project(&x, &y).unwrap();
        let z3 = m.project(&x3, &y).unwrap();
        assert!(z.iter().zip(&z3).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let dims = EmbeddingDims { asv: 5, cm: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = IepModel::init(dims, 0.5, &mut rng);
        let mut v = || -> Vec<f64> { (0..9).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let emb: Vec<Vec<f64>> = (0..6).map(|_| v()).collect();
        let batch: Vec<[(&[f64], &[f64]); 3]> = vec![
            [
                (&emb[0][..5], &emb[0][5..]),
                (&emb[1][..5], &emb[1][5..]),
                (&emb[2][..5], &emb[2][5..]),
            ],
            [
                (&emb[3][..5], &emb[3][5..]),
                (&emb[4][..5], &emb[4][5..]),
                (&emb[5][..5], &emb[5][5..]),
            ],
        ];
        let mut grads = m.zero_grads();
        let loss = m.triplet_loss_and_grad(&batch, &mut grads).unwrap();
        assert!(loss > 0.0);
        let report = grad_check(
            &m,
            &grads,
            |m: &IepModel| {
                let mut g = m.zero_grads();
                m.triplet_loss_and_grad(&batch, &mut g).unwrap()
            },
            GradCheck {
                max_per_tensor: Some(60),
                ..GradCheck::default()
            },
        );
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn satisfied_margin_leaves_weights_unchanged() {
        let dims = EmbeddingDims { asv: 3, cm: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = IepModel::init(dims, 0.0, &mut rng);
        let x = [1.0, 0.5, -0.3];
        let y = [0.2, 0.1];
        let xn = [-1.0, 0.2, 0.9];
        let yn = [-0.4, 0.7];
        // anchor == positive so cos(A,P) = 1 >= cos(A,N)
        let batch = vec![[(&x[..], &y[..]), (&x[..], &y[..]), (&xn[..], &yn[..])]];
        let mut grads = m.zero_grads();
        let loss = m.triplet_loss_and_grad(&batch, &mut grads).unwrap();
        assert_eq!(loss, 0.0);
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let opt = Optimizer::new(&cfg);
        let mut updated = m.clone();
        let mut state = opt.init_state(&updated);
        opt.step(&mut updated, &grads, &mut state).unwrap();
        assert_eq!(updated, m);
    }

    #[test]
    fn score_is_scale_invariant_in_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = IepModel::init(EmbeddingDims { asv: 4, cm: 3 }, 0.5, &mut rng);
        let mut scaled = m.clone();
        // z is linear in g's parameters
        scaled.g.params.scale(3.5);
        let (x1, y1, x2, y2) = (
            [0.1, 0.2, 0.3, 0.4],
            [0.5, -0.1, 0.2],
            [0.3, -0.2, 0.1, 0.0],
            [0.2, 0.2, 0.2],
        );
        let a = m.score(&x1, &y1, &x2, &y2).unwrap();
        let b = scaled.score(&x1, &y1, &x2, &y2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
