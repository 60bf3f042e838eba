use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    Adam,
    /// Plain gradient descent, `param -= lr * (grad + wd * param)`. Used for
    /// closed-form checks where Adam's normalization gets in the way.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub rule: UpdateRule,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to the gradient as `weight_decay * param`.
    pub weight_decay: f64,
}

impl OptimConfig {
    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        Self {
            rule: UpdateRule::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            rule: UpdateRule::Sgd,
            weight_decay: 0.0,
            ..Self::adam(lr, 0.0)
        }
    }
}

/// Per-parameter optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: OptimConfig,
    first_moment: Matrix,
    second_moment: Matrix,
    step: u64,
}

impl AdamState {
    pub fn new(shape: (usize, usize), config: OptimConfig) -> Self {
        Self {
            config,
            first_moment: Matrix::zeros(shape.0, shape.1),
            second_moment: Matrix::zeros(shape.0, shape.1),
            step: 0,
        }
    }

    pub fn for_param(param: &Matrix, config: OptimConfig) -> Self {
        Self::new(param.shape(), config)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.second_moment
    }
}

/// Applies one optimizer update to `param` in place.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::shape("adam_step", param.shape(), grad.shape()));
    }
    if param.shape() != state.first_moment.shape() {
        return Err(Error::shape(
            "adam_step (state)",
            param.shape(),
            state.first_moment.shape(),
        ));
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient passed to adam_step".into()));
    }
    let cfg = state.config;
    state.step += 1;
    match cfg.rule {
        UpdateRule::Sgd => {
            for (p, &g) in param.data_mut().iter_mut().zip(grad.data()) {
                let g = g + cfg.weight_decay * *p;
                *p -= cfg.lr * g;
            }
        }
        UpdateRule::Adam => {
            let t = state.step as i32;
            let bias1 = 1.0 - cfg.beta1.powi(t);
            let bias2 = 1.0 - cfg.beta2.powi(t);
            let m = state.first_moment.data_mut();
            let v = state.second_moment.data_mut();
            for (((p, &g), mi), vi) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let g = g + cfg.weight_decay * *p;
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }
    Ok(())
}
