//! Per-view sparse autoencoders.
//!
//! Each view `X` (m × n_v) runs through `σ(O W + b)` layers; the bottleneck
//! output is the view's latent code and the last output its reconstruction.
//! The loss is `½‖O_L − X‖² + β Σ_u KL(ρ ‖ ρ̂_u)` where `ρ̂_u` is the mean
//! activation of bottleneck unit `u` over all samples.

use std::fs;
use std::path::Path;

use crate::dense::{self, DenseLayer, LayerGrad, StackOptim};
use crate::error::{Error, Result};
use crate::ndmath::{Activation, Matrix, OptimConfig, SeededRng};

/// Clamp applied to mean activations before the KL term.
pub const RHO_HAT_EPS: f64 = 1e-7;
pub const DEFAULT_RHO: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseAutoencoder {
    pub layers: Vec<DenseLayer>,
    /// Number of layers up to and including the bottleneck.
    pub latent_index: usize,
    pub rho: f64,
    pub beta: f64,
}

/// Cached outputs of one forward pass, `[X, O_1, …, O_L]`.
#[derive(Debug, Clone)]
pub struct AeForward {
    outputs: Vec<Matrix>,
    latent_index: usize,
}

impl AeForward {
    pub fn latent(&self) -> &Matrix {
        &self.outputs[self.latent_index]
    }

    pub fn reconstruction(&self) -> &Matrix {
        self.outputs.last().unwrap()
    }

    pub fn input(&self) -> &Matrix {
        &self.outputs[0]
    }

    pub fn into_latent(mut self) -> Matrix {
        self.outputs.swap_remove(self.latent_index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeGrads {
    pub layers: Vec<LayerGrad>,
}

impl SparseAutoencoder {
    pub fn new(layers: Vec<DenseLayer>, latent_index: usize, rho: f64, beta: f64) -> Result<Self> {
        let ae = Self {
            layers,
            latent_index,
            rho,
            beta,
        };
        ae.validate()?;
        Ok(ae)
    }

    /// Default shape: encoder `n_v → d` and decoder `d → n_v`, both sigmoid.
    pub fn init(input_dim: usize, latent_dim: usize, rho: f64, beta: f64, rng: &mut SeededRng) -> Result<Self> {
        Self::new(
            vec![
                DenseLayer::init(input_dim, latent_dim, Activation::Sigmoid, rng),
                DenseLayer::init(latent_dim, input_dim, Activation::Sigmoid, rng),
            ],
            1,
            rho,
            beta,
        )
    }

    fn validate(&self) -> Result<()> {
        let l = self.layers.len();
        if l == 0 || self.latent_index == 0 || self.latent_index > l {
            return Err(Error::config(format!(
                "latent index {} invalid for {l} layers",
                self.latent_index
            )));
        }
        for w in self.layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape(
                    "autoencoder layer chain",
                    w[0].weight.shape(),
                    w[1].weight.shape(),
                ));
            }
        }
        if self.layers[0].in_dim() != self.layers[l - 1].out_dim() {
            return Err(Error::config(format!(
                "autoencoder maps {} features back to {}",
                self.layers[0].in_dim(),
                self.layers[l - 1].out_dim()
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!("sparsity target rho = {} not in (0, 1)", self.rho)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("sparsity weight beta = {} must be >= 0", self.beta)));
        }
        if self.beta > 0.0 && self.bottleneck_activation() != Activation::Sigmoid {
            return Err(Error::config(
                "a sparsity penalty (beta > 0) needs a sigmoid bottleneck",
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[self.latent_index - 1].out_dim()
    }

    pub fn bottleneck_activation(&self) -> Activation {
        self.layers[self.latent_index - 1].activation
    }

    pub fn forward(&self, x: &Matrix) -> Result<AeForward> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("ae_forward", x.shape(), self.layers[0].weight.shape()));
        }
        Ok(AeForward {
            outputs: dense::forward_stack(&self.layers, x)?,
            latent_index: self.latent_index,
        })
    }

    fn loss_from(&self, fwd: &AeForward) -> Result<f64> {
        let recon = 0.5 * fwd.reconstruction().sub(fwd.input())?.frobenius_sq();
        if self.beta == 0.0 {
            return Ok(recon);
        }
        let rho_hat = mean_activation(fwd.latent());
        Ok(recon + self.beta * kl_sparsity(self.rho, &rho_hat)?)
    }

    pub fn loss(&self, x: &Matrix) -> Result<f64> {
        self.loss_from(&self.forward(x)?)
    }

    /// Loss and analytic gradients for every weight and bias, including the
    /// KL term's path through the bottleneck mean.
    pub fn gradients(&self, x: &Matrix) -> Result<(f64, AeGrads)> {
        let fwd = self.forward(x)?;
        let loss = self.loss_from(&fwd)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("autoencoder loss".into()));
        }
        let grad_out = fwd.reconstruction().sub(x)?;
        let kl_grad = (self.beta > 0.0).then(|| self.kl_latent_grad(fwd.latent()));
        let inject: Vec<(usize, &Matrix)> = kl_grad.iter().map(|g| (self.latent_index, g)).collect();
        let (layers, _) = dense::backward_stack(&self.layers, &fwd.outputs, grad_out, &inject)?;
        Ok((loss, AeGrads { layers }))
    }

    /// `β ∂KL/∂latent`: each sample contributes `1/m` of every unit mean.
    fn kl_latent_grad(&self, latent: &Matrix) -> Matrix {
        let m = latent.rows() as f64;
        let means = latent.column_sums().scale(1.0 / m);
        let per_unit: Vec<f64> = means
            .data()
            .iter()
            .map(|&mean| {
                if !(RHO_HAT_EPS..=1.0 - RHO_HAT_EPS).contains(&mean) {
                    // clamped: flat
                    return 0.0;
                }
                self.beta * (-self.rho / mean + (1.0 - self.rho) / (1.0 - mean)) / m
            })
            .collect();
        Matrix::from_fn(latent.rows(), latent.cols(), |_, j| per_unit[j])
    }

    /// One optimizer step on the autoencoder loss; returns the pre-step loss.
    pub fn backward_update(&mut self, x: &Matrix, optim: &mut StackOptim) -> Result<f64> {
        let (loss, grads) = self.gradients(x)?;
        optim.apply(&mut self.layers, &grads.layers)?;
        Ok(loss)
    }

    pub fn optimizer(&self, config: OptimConfig) -> StackOptim {
        StackOptim::new(&self.layers, config)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        dense::save_stack(&self.layers, dir)?;
        let path = dir.join("sparsity");
        let text = format!(
            "latent_index = {}\nrho = {}\nbeta = {}\n",
            self.latent_index, self.rho, self.beta
        );
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let layers = dense::load_stack(dir)?;
        let path = dir.join("sparsity");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let (mut latent_index, mut rho, mut beta) = (None, None, None);
        for (n, line) in text.lines().enumerate() {
            let Some((k, v)) = line.split_once('=') else { continue };
            let bad = |e: &dyn std::fmt::Display| Error::parse(&path, n + 1, e.to_string());
            match k.trim() {
                "latent_index" => latent_index = Some(v.trim().parse().map_err(|e| bad(&e))?),
                "rho" => rho = Some(v.trim().parse().map_err(|e| bad(&e))?),
                "beta" => beta = Some(v.trim().parse().map_err(|e| bad(&e))?),
                _ => {}
            }
        }
        let missing = || Error::parse(&path, 1, "missing latent_index, rho or beta");
        Self::new(
            layers,
            latent_index.ok_or_else(missing)?,
            rho.ok_or_else(missing)?,
            beta.ok_or_else(missing)?,
        )
    }
}

/// Column means of the latent code, clamped to `[ε, 1 − ε]`.
pub fn mean_activation(latent: &Matrix) -> Vec<f64> {
    let m = latent.rows().max(1) as f64;
    latent
        .column_sums()
        .data()
        .iter()
        .map(|s| (s / m).clamp(RHO_HAT_EPS, 1.0 - RHO_HAT_EPS))
        .collect()
}

/// `Σ_u ρ ln(ρ/ρ̂_u) + (1−ρ) ln((1−ρ)/(1−ρ̂_u))`.
pub fn kl_sparsity(rho: f64, rho_hat: &[f64]) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::config(format!("rho = {rho} not in (0, 1)")));
    }
    if let Some(bad) = rho_hat.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::config(format!("mean activation {bad} not in (0, 1)")));
    }
    Ok(rho_hat
        .iter()
        .map(|&r| rho * (rho / r).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - r)).ln())
        .sum())
}
