use super::Parameters;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Training hyper-parameters shared by every trainable back-end.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Pairs (or triplets) freshly sampled for every epoch.
    pub samples_per_epoch: usize,
    /// Triplets per mini-batch for the embedding projector.
    pub triplets_per_batch: usize,
    /// Triplet margin.
    pub margin: f64,
    /// Length-normalize projector inputs.
    pub iep_length_norm: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerKind::default(),
            seed: 0,
            samples_per_epoch: 2000,
            triplets_per_batch: 32,
            margin: 0.5,
            iep_length_norm: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.samples_per_epoch == 0 {
            return Err(Error::Config(
                "epochs, batch_size and samples_per_epoch must be positive".into(),
            ));
        }
        if self.triplets_per_batch == 0 {
            return Err(Error::Config("triplets_per_batch must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.margin) {
            return Err(Error::Config("margin must lie in [0, 2]".into()));
        }
        if let OptimizerKind::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon <= 0.0 {
                return Err(Error::Config(
                    "adam needs beta in [0, 1) and epsilon > 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Per-model optimizer state (Adam moments; empty for SGD).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn step_count(&self) -> u64 {
        self.step
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
}

impl Optimizer {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            kind: config.optimizer,
            learning_rate: config.learning_rate,
        }
    }

    pub fn init_state<P: Parameters + ?Sized>(&self, params: &P) -> OptimizerState {
        let zeros = |p: &P| p.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        match self.kind {
            OptimizerKind::Sgd => OptimizerState {
                step: 0,
                first: Vec::new(),
                second: Vec::new(),
            },
            OptimizerKind::Adam { .. } => OptimizerState {
                step: 0,
                first: zeros(params),
                second: zeros(params),
            },
        }
    }

    /// Applies one update. `grads` must list tensors in the same order and with
    /// the same lengths as `params`. Nothing is modified when a gradient is
    /// non-finite.
    pub fn step<P, G>(&self, params: &mut P, grads: &G, state: &mut OptimizerState) -> Result<()>
    where
        P: Parameters + ?Sized,
        G: Parameters + ?Sized,
    {
        let gs = grads.tensors();
        let mut ps = params.tensors_mut();
        if gs.len() != ps.len() {
            return Err(Error::shape(ps.len(), gs.len()));
        }
        for (p, g) in ps.iter().zip(&gs) {
            if p.len() != g.len() {
                return Err(Error::shape(p.len(), g.len()));
            }
            if !crate::vector::all_finite(g) {
                return Err(Error::NonFinite("gradient"));
            }
        }
        state.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in ps.iter_mut().zip(&gs) {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= lr * gi;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if state.first.len() != ps.len() {
                    return Err(Error::Spec(
                        "optimizer state does not match parameters".into(),
                    ));
                }
                let t = state.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (k, (p, g)) in ps.iter_mut().zip(&gs).enumerate() {
                    let m = &mut state.first[k];
                    let v = &mut state.second[k];
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
