use rand::Rng;

use super::Parameters;
use crate::vector::{axpy, dot};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Affine map `W x + b` with `W` of shape `(out_dim, in_dim)`.
    FullyConnected { in_dim: usize, out_dim: usize },
    /// Exponential linear unit with `alpha = 1`.
    Elu,
}

/// Layer-by-layer architecture of a feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layers: Vec<LayerKind>,
}

impl MlpSpec {
    /// Validates that dimensions chain and that there is at least one
    /// fully-connected layer.
    pub fn new(layers: Vec<LayerKind>) -> Result<Self> {
        let mut current: Option<usize> = None;
        for (i, layer) in layers.iter().enumerate() {
            if let LayerKind::FullyConnected { in_dim, out_dim } = *layer {
                if in_dim == 0 || out_dim == 0 {
                    return Err(Error::Spec(format!("layer {i} has a zero dimension")));
                }
                if let Some(prev) = current {
                    if prev != in_dim {
                        return Err(Error::Spec(format!(
                            "layer {i} expects {in_dim} inputs but the previous layer yields {prev}"
                        )));
                    }
                }
                current = Some(out_dim);
            }
        }
        if current.is_none() {
            return Err(Error::Spec("no fully-connected layer".into()));
        }
        Ok(Self { layers })
    }

    /// `dims = [d0, d1, ..., dk]` gives `FC(d0×d1) ELU FC(d1×d2) ... FC(dk-1×dk)`,
    /// optionally followed by a trailing ELU.
    pub fn feedforward(dims: &[usize], trailing_elu: bool) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Spec("need at least input and output dims".into()));
        }
        let mut layers = Vec::with_capacity(2 * dims.len());
        for (i, w) in dims.windows(2).enumerate() {
            if i > 0 {
                layers.push(LayerKind::Elu);
            }
            layers.push(LayerKind::FullyConnected {
                in_dim: w[0],
                out_dim: w[1],
            });
        }
        if trailing_elu {
            layers.push(LayerKind::Elu);
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerKind] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.dense_shapes().next().map(|(i, _)| i).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.dense_shapes().last().map(|(_, o)| o).unwrap_or(0)
    }

    /// `(in_dim, out_dim)` of every fully-connected layer in order.
    pub fn dense_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layers.iter().filter_map(|l| match *l {
            LayerKind::FullyConnected { in_dim, out_dim } => Some((in_dim, out_dim)),
            LayerKind::Elu => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major, shape `(out_dim, in_dim)`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `±sqrt(6 / (in_dim + out_dim))`, zero bias.
    pub fn glorot_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// Elementwise ELU (`alpha = 1`). Rejects non-finite input.
pub fn elu(x: &[f64]) -> Result<Vec<f64>> {
    if !crate::vector::all_finite(x) {
        return Err(Error::NonFinite("elu input"));
    }
    Ok(x.iter().map(|&v| elu_scalar(v)).collect())
}

#[inline]
fn elu_scalar(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        v.exp_m1()
    }
}

/// `W · input + b` for one fully-connected layer.
pub fn dense_forward(params: &DenseParams, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != params.in_dim {
        return Err(Error::shape(params.in_dim, input.len()));
    }
    Ok(dense_apply(params, input))
}

fn dense_apply(params: &DenseParams, input: &[f64]) -> Vec<f64> {
    params
        .weight
        .chunks_exact(params.in_dim)
        .zip(&params.bias)
        .map(|(row, b)| dot(row, input) + b)
        .collect()
}

/// Weights and biases of every fully-connected layer of an [`MlpSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub dense: Vec<DenseParams>,
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            dense: spec
                .dense_shapes()
                .map(|(i, o)| DenseParams::zeros(i, o))
                .collect(),
        }
    }

    pub fn glorot_uniform<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        Self {
            dense: spec
                .dense_shapes()
                .map(|(i, o)| DenseParams::glorot_uniform(i, o, rng))
                .collect(),
        }
    }

    /// Checks shapes against `spec` and that every value is finite.
    pub fn validate(&self, spec: &MlpSpec) -> Result<()> {
        let shapes: Vec<_> = spec.dense_shapes().collect();
        if shapes.len() != self.dense.len() {
            return Err(Error::Spec(format!(
                "spec has {} fully-connected layers, params have {}",
                shapes.len(),
                self.dense.len()
            )));
        }
        for (k, ((i, o), p)) in shapes.iter().zip(&self.dense).enumerate() {
            if p.in_dim != *i || p.out_dim != *o || p.weight.len() != i * o || p.bias.len() != *o {
                return Err(Error::Spec(format!(
                    "parameter shape mismatch in dense layer {k}"
                )));
            }
        }
        if !self.all_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(())
    }
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.dense
            .iter()
            .flat_map(|d| [d.weight.as_slice(), d.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.dense
            .iter_mut()
            .flat_map(|d| [d.weight.as_mut_slice(), d.bias.as_mut_slice()])
            .collect()
    }
}

/// Inputs seen by each layer during a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Vec<f64>>,
}

/// A network: its architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    pub params: MlpParams,
}

impl Mlp {
    pub fn new(spec: MlpSpec, params: MlpParams) -> Result<Self> {
        params.validate(&spec)?;
        Ok(Self { spec, params })
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let params = MlpParams::zeros(&spec);
        Self { spec, params }
    }

    pub fn glorot_uniform<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = MlpParams::glorot_uniform(&spec, rng);
        Self { spec, params }
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn in_dim(&self) -> usize {
        self.spec.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.spec.out_dim()
    }

    /// Runs the layers in order, returning the output and the tape needed by
    /// [`Mlp::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let mut inputs = Vec::with_capacity(self.spec.layers.len());
        let mut current = input.to_vec();
        let mut dense = self.params.dense.iter();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let next = match layer {
                LayerKind::FullyConnected { in_dim, .. } => {
                    if current.len() != *in_dim {
                        return Err(Error::Shape {
                            layer: Some(i),
                            expected: *in_dim,
                            actual: current.len(),
                        });
                    }
                    let p = dense.next().expect("params validated against spec");
                    dense_apply(p, &current)
                }
                LayerKind::Elu => current.iter().map(|&v| elu_scalar(v)).collect(),
            };
            inputs.push(std::mem::replace(&mut current, next));
        }
        Ok((current, Tape { inputs }))
    }

    /// Output only.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input.
    pub fn backward_into(
        &self,
        tape: &Tape,
        output_grad: &[f64],
        grads: &mut MlpParams,
    ) -> Result<Vec<f64>> {
        if tape.inputs.len() != self.spec.layers.len() {
            return Err(Error::Spec(format!(
                "tape has {} entries, network has {} layers",
                tape.inputs.len(),
                self.spec.layers.len()
            )));
        }
        if output_grad.len() != self.out_dim() {
            return Err(Error::shape(self.out_dim(), output_grad.len()));
        }
        if grads.dense.len() != self.params.dense.len() {
            return Err(Error::Spec("gradient holder does not match network".into()));
        }
        let mut g = output_grad.to_vec();
        let mut k = self.params.dense.len();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            match layer {
                LayerKind::FullyConnected { in_dim, out_dim } => {
                    k -= 1;
                    let p = &self.params.dense[k];
                    let gp = &mut grads.dense[k];
                    if input.len() != *in_dim || g.len() != *out_dim {
                        return Err(Error::Shape {
                            layer: Some(i),
                            expected: *in_dim,
                            actual: input.len(),
                        });
                    }
                    let mut g_in = vec![0.0; *in_dim];
                    for (o, &go) in g.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        let row = o * in_dim..(o + 1) * in_dim;
                        axpy(go, input, &mut gp.weight[row.clone()]);
                        gp.bias[o] += go;
                        axpy(go, &p.weight[row], &mut g_in);
                    }
                    g = g_in;
                }
                LayerKind::Elu => {
                    if input.len() != g.len() {
                        return Err(Error::Shape {
                            layer: Some(i),
                            expected: g.len(),
                            actual: input.len(),
                        });
                    }
                    for (gi, &x) in g.iter_mut().zip(input) {
                        if x <= 0.0 {
                            *gi *= x.exp();
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    /// Fresh parameter gradients plus the input gradient.
    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<(MlpParams, Vec<f64>)> {
        let mut grads = MlpParams::zeros(&self.spec);
        let input_grad = self.backward_into(tape, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.params.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.params.tensors_mut()
    }
}
