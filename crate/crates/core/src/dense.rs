//! Fully-connected layer stacks shared by the autoencoders and the fusion
//! network: forward with cached outputs, hand-derived backward, per-parameter
//! optimizer state and checkpoint I/O.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndmath::{adam_step, io, Activation, AdamState, Matrix, OptimConfig, SeededRng};

/// `σ(X W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    /// 1 × out.
    pub bias: Matrix,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Matrix, activation: Activation) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weight.cols() {
            return Err(Error::shape("DenseLayer::new", weight.shape(), bias.shape()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weight, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        Self {
            weight: rng.glorot(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let pre = input.matmul(&self.weight)?.add_row_broadcast(&self.bias)?;
        Ok(self.activation.apply(&pre))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Runs the stack, returning `[input, out_1, …, out_L]`.
pub fn forward_stack(layers: &[DenseLayer], input: &Matrix) -> Result<Vec<Matrix>> {
    let mut outputs = Vec::with_capacity(layers.len() + 1);
    outputs.push(input.clone());
    for layer in layers {
        let next = layer.forward(outputs.last().unwrap())?;
        outputs.push(next);
    }
    Ok(outputs)
}

/// Backpropagates `grad_output` (w.r.t. the last output) through the stack.
///
/// `inject` adds extra upstream gradient at intermediate outputs, keyed by
/// output index (1-based like `outputs`). Returns the per-layer parameter
/// gradients and the gradient w.r.t. the stack input.
pub fn backward_stack(
    layers: &[DenseLayer],
    outputs: &[Matrix],
    grad_output: Matrix,
    inject: &[(usize, &Matrix)],
) -> Result<(Vec<LayerGrad>, Matrix)> {
    if outputs.len() != layers.len() + 1 {
        return Err(Error::Contract(format!(
            "forward cache has {} entries for {} layers",
            outputs.len(),
            layers.len()
        )));
    }
    let mut grads = Vec::with_capacity(layers.len());
    let mut upstream = grad_output;
    for l in (1..=layers.len()).rev() {
        for &(at, extra) in inject {
            if at == l {
                upstream.axpy(1.0, extra)?;
            }
        }
        let layer = &layers[l - 1];
        let pre_grad = layer.activation.grad_from_output(&outputs[l], &upstream)?;
        let weight = outputs[l - 1].matmul_tn(&pre_grad)?;
        let bias = pre_grad.column_sums();
        upstream = pre_grad.matmul_nt(&layer.weight)?;
        grads.push(LayerGrad { weight, bias });
    }
    grads.reverse();
    Ok((grads, upstream))
}

/// Optimizer state for every weight and bias of a stack.
#[derive(Debug, Clone, PartialEq)]
pub struct StackOptim {
    states: Vec<(AdamState, AdamState)>,
}

impl StackOptim {
    pub fn new(layers: &[DenseLayer], config: OptimConfig) -> Self {
        Self {
            states: layers
                .iter()
                .map(|l| {
                    (
                        AdamState::for_param(&l.weight, config),
                        AdamState::for_param(&l.bias, config),
                    )
                })
                .collect(),
        }
    }

    pub fn apply(&mut self, layers: &mut [DenseLayer], grads: &[LayerGrad]) -> Result<()> {
        if grads.len() != layers.len() || self.states.len() != layers.len() {
            return Err(Error::Contract("gradient/layer count mismatch".into()));
        }
        for ((layer, g), (sw, sb)) in layers.iter_mut().zip(grads).zip(&mut self.states) {
            adam_step(&mut layer.weight, &g.weight, sw)?;
            adam_step(&mut layer.bias, &g.bias, sb)?;
        }
        Ok(())
    }
}

/// Writes `layer<l>_weight.txt`, `layer<l>_bias.txt` and a `layers` index.
pub fn save_stack(layers: &[DenseLayer], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = String::new();
    for (l, layer) in layers.iter().enumerate() {
        io::write_matrix(dir.join(format!("layer{l}_weight.txt")), &layer.weight)?;
        io::write_matrix(dir.join(format!("layer{l}_bias.txt")), &layer.bias)?;
        index.push_str(&format!("layer.{l} = {}\n", layer.activation));
    }
    let path = dir.join("layers");
    fs::write(&path, index).map_err(|e| Error::io(&path, e))
}

pub fn load_stack(dir: &Path) -> Result<Vec<DenseLayer>> {
    let path = dir.join("layers");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut layers = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&path, n + 1, "expected `layer.<l> = <activation>`"))?;
        let expected = format!("layer.{}", layers.len());
        if key.trim() != expected {
            return Err(Error::parse(&path, n + 1, format!("expected `{expected}`")));
        }
        let activation: Activation = value
            .parse()
            .map_err(|e: Error| Error::parse(&path, n + 1, e.to_string()))?;
        let l = layers.len();
        let weight = io::read_matrix(dir.join(format!("layer{l}_weight.txt")))?;
        let bias = io::read_matrix(dir.join(format!("layer{l}_bias.txt")))?;
        layers.push(DenseLayer::new(weight, bias, activation)?);
    }
    Ok(layers)
}
