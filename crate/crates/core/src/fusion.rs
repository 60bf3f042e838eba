//! Feature fusion: a fully-connected network that maps a trainable shared
//! representation `H` onto every view's latent code.
//!
//! `G_0 = H`, `G_l = σ(G_{l-1} W_l + b_l)` and the loss is
//! `½ Σ_v ‖G_L − O_v‖²` over the view latents `O_v`. Weights/biases and `H`
//! are updated in separate steps against the same loss, with the latents
//! held fixed.

use std::path::Path;

use crate::dense::{self, DenseLayer, LayerGrad, StackOptim};
use crate::error::{Error, Result};
use crate::ndmath::{adam_step, io, Activation, AdamState, Matrix, OptimConfig, SeededRng};

pub const H_INIT_STD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionNet {
    pub layers: Vec<DenseLayer>,
    /// The learnable input `H` (m × d), also the GCN's node features.
    pub shared_h: Matrix,
}

#[derive(Debug, Clone)]
pub struct FusionForward {
    outputs: Vec<Matrix>,
}

impl FusionForward {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().unwrap()
    }
}

impl FusionNet {
    pub fn new(layers: Vec<DenseLayer>, shared_h: Matrix) -> Result<Self> {
        let net = Self { layers, shared_h };
        net.validate()?;
        Ok(net)
    }

    /// `d → d` ReLU then `d → d` identity, with `H ~ N(0, 0.01²)`.
    pub fn init(samples: usize, latent_dim: usize, rng: &mut SeededRng) -> Self {
        let layers = vec![
            DenseLayer::init(latent_dim, latent_dim, Activation::Relu, rng),
            DenseLayer::init(latent_dim, latent_dim, Activation::Identity, rng),
        ];
        let shared_h = rng.normal_matrix(samples, latent_dim, 0.0, H_INIT_STD);
        Self { layers, shared_h }
    }

    fn validate(&self) -> Result<()> {
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::config("fusion network needs at least one layer")),
        };
        for w in self.layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::shape("fusion layer chain", w[0].weight.shape(), w[1].weight.shape()));
            }
        }
        if first.in_dim() != self.shared_h.cols() || last.out_dim() != self.shared_h.cols() {
            return Err(Error::shape(
                "fusion network vs shared H",
                (first.in_dim(), last.out_dim()),
                self.shared_h.shape(),
            ));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.shared_h.cols()
    }

    pub fn forward(&self) -> Result<FusionForward> {
        Ok(FusionForward {
            outputs: dense::forward_stack(&self.layers, &self.shared_h)?,
        })
    }

    /// Loss plus gradients w.r.t. all layers and `H`.
    pub fn gradients(&self, latents: &[Matrix]) -> Result<(f64, Vec<LayerGrad>, Matrix)> {
        let fwd = self.forward()?;
        let loss = fusion_loss(fwd.output(), latents)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("fusion loss".into()));
        }
        let g = fusion_loss_grad(fwd.output(), latents)?;
        let (layers, h) = dense::backward_stack(&self.layers, &fwd.outputs, g, &[])?;
        Ok((loss, layers, h))
    }

    /// Step on the layer weights and biases only; `H` is left untouched.
    /// Returns the pre-step loss.
    pub fn update_fc_params(&mut self, latents: &[Matrix], optim: &mut StackOptim) -> Result<f64> {
        let (loss, grads, _) = self.gradients(latents)?;
        optim.apply(&mut self.layers, &grads)?;
        Ok(loss)
    }

    /// Step on `H` only. Returns the pre-step loss.
    pub fn update_shared_h(&mut self, latents: &[Matrix], state: &mut AdamState) -> Result<f64> {
        let (loss, _, grad_h) = self.gradients(latents)?;
        adam_step(&mut self.shared_h, &grad_h, state)?;
        Ok(loss)
    }

    pub fn fc_optimizer(&self, config: OptimConfig) -> StackOptim {
        StackOptim::new(&self.layers, config)
    }

    pub fn h_optimizer(&self, config: OptimConfig) -> AdamState {
        AdamState::for_param(&self.shared_h, config)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        dense::save_stack(&self.layers, dir)?;
        io::write_matrix(dir.join("shared_h.txt"), &self.shared_h)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let layers = dense::load_stack(dir)?;
        let shared_h = io::read_matrix(dir.join("shared_h.txt"))?;
        Self::new(layers, shared_h)
    }
}

fn check_latents(g: &Matrix, latents: &[Matrix]) -> Result<()> {
    if latents.is_empty() {
        return Err(Error::config("fusion loss needs at least one view latent"));
    }
    for o in latents {
        if o.shape() != g.shape() {
            return Err(Error::shape("fusion_loss", g.shape(), o.shape()));
        }
    }
    Ok(())
}

/// `½ Σ_v ‖g − O_v‖²`.
pub fn fusion_loss(g_final: &Matrix, latents: &[Matrix]) -> Result<f64> {
    check_latents(g_final, latents)?;
    latents
        .iter()
        .map(|o| Ok(0.5 * g_final.sub(o)?.frobenius_sq()))
        .sum()
}

/// `∂/∂g ½ Σ_v ‖g − O_v‖² = Σ_v (g − O_v)`.
pub fn fusion_loss_grad(g_final: &Matrix, latents: &[Matrix]) -> Result<Matrix> {
    check_latents(g_final, latents)?;
    let mut grad = Matrix::zeros(g_final.rows(), g_final.cols());
    for o in latents {
        grad.axpy(1.0, &g_final.sub(o)?)?;
    }
    Ok(grad)
}
