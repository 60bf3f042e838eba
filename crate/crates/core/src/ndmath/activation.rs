use std::fmt;
use std::str::FromStr;

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
    /// Softmax over each row, computed with the row maximum subtracted.
    RowSoftmax,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a single row.
pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl Activation {
    pub fn apply(self, x: &Matrix) -> Matrix {
        match self {
            Activation::Relu => x.map(|v| v.max(0.0)),
            Activation::Sigmoid => x.map(sigmoid),
            Activation::Identity => x.clone(),
            Activation::RowSoftmax => {
                let mut out = x.clone();
                for i in 0..x.rows() {
                    let s = softmax_row(x.row(i));
                    out.row_mut(i).copy_from_slice(&s);
                }
                out
            }
        }
    }

    /// Contracts `upstream` with the derivative of the activation at the
    /// pre-activation `x`. For `RowSoftmax` this is the full per-row Jacobian.
    pub fn grad(self, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        if x.shape() != upstream.shape() {
            return Err(Error::shape("activation_grad", x.shape(), upstream.shape()));
        }
        match self {
            Activation::Identity => Ok(upstream.clone()),
            Activation::Relu => x.zip_map(upstream, |v, g| if v > 0.0 { g } else { 0.0 }),
            Activation::Sigmoid => x.zip_map(upstream, |v, g| {
                let s = sigmoid(v);
                g * s * (1.0 - s)
            }),
            Activation::RowSoftmax => {
                let mut out = upstream.clone();
                for i in 0..x.rows() {
                    let s = softmax_row(x.row(i));
                    let g = upstream.row(i);
                    let inner: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                    for ((o, &sj), &gj) in out.row_mut(i).iter_mut().zip(&s).zip(g) {
                        *o = sj * (gj - inner);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Same as [`Activation::grad`] but uses the already-computed output,
    /// which avoids re-evaluating the nonlinearity during backprop.
    pub(crate) fn grad_from_output(self, output: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        if output.shape() != upstream.shape() {
            return Err(Error::shape("activation_grad", output.shape(), upstream.shape()));
        }
        match self {
            Activation::Identity => Ok(upstream.clone()),
            Activation::Relu => output.zip_map(upstream, |y, g| if y > 0.0 { g } else { 0.0 }),
            Activation::Sigmoid => output.zip_map(upstream, |s, g| g * s * (1.0 - s)),
            Activation::RowSoftmax => {
                let mut out = upstream.clone();
                for i in 0..output.rows() {
                    let s = output.row(i);
                    let g = upstream.row(i);
                    let inner: f64 = s.iter().zip(g).map(|(a, b)| a * b).sum();
                    for ((o, &sj), &gj) in out.row_mut(i).iter_mut().zip(s).zip(g) {
                        *o = sj * (gj - inner);
                    }
                }
                Ok(out)
            }
        }
    }
}

pub fn apply_activation(x: &Matrix, a: Activation) -> Matrix {
    a.apply(x)
}

pub fn activation_grad(x: &Matrix, a: Activation, upstream: &Matrix) -> Result<Matrix> {
    a.grad(x, upstream)
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
            Activation::RowSoftmax => "softmax",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            "softmax" => Ok(Activation::RowSoftmax),
            other => Err(Error::config(format!("unknown activation `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_and_sigmoid_values() {
        let x = Matrix::from_rows(&[[-1.0, 2.0]]);
        assert_eq!(Activation::Relu.apply(&x), Matrix::from_rows(&[[0.0, 2.0]]));
        assert_eq!(
            Activation::Sigmoid.apply(&Matrix::zeros(1, 1)),
            Matrix::from_rows(&[[0.5]])
        );
    }

    #[test]
    fn softmax_of_zero_and_ln3() {
        let x = Matrix::from_rows(&[[0.0, 3f64.ln()]]);
        let s = Activation::RowSoftmax.apply(&x);
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gradients_of_simple_cases() {
        let up = Matrix::from_rows(&[[5.0, 5.0]]);
        let x = Matrix::from_rows(&[[-1.0, 2.0]]);
        assert_eq!(Activation::Identity.grad(&x, &up).unwrap(), up);
        assert_eq!(
            Activation::Relu.grad(&x, &up).unwrap(),
            Matrix::from_rows(&[[0.0, 5.0]])
        );
        let g = Activation::Sigmoid
            .grad(&Matrix::zeros(1, 1), &Matrix::ones(1, 1))
            .unwrap();
        assert_eq!(g.get(0, 0), 0.25);
        assert!(Activation::Relu.grad(&x, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn softmax_grad_matches_central_difference() {
        let x = Matrix::from_rows(&[[0.3, -1.2, 2.0], [0.0, 0.5, -0.5]]);
        let up = Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.3, 0.3, -1.0]]);
        let analytic = Activation::RowSoftmax.grad(&x, &up).unwrap();
        let h = 1e-6;
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                let f = |delta: f64| {
                    let mut xp = x.clone();
                    xp.set(i, j, xp.get(i, j) + delta);
                    Activation::RowSoftmax.apply(&xp).hadamard(&up).unwrap().sum()
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                assert!((fd - analytic.get(i, j)).abs() < 1e-8);
            }
        }
        let from_out = Activation::RowSoftmax
            .grad_from_output(&Activation::RowSoftmax.apply(&x), &up)
            .unwrap();
        assert!(from_out.max_abs_diff(&analytic).unwrap() < 1e-15);
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one_and_shift_invariant(
            vals in proptest::collection::vec(-50.0f64..50.0, 12),
            shift in -100.0f64..100.0,
        ) {
            let x = Matrix::new(3, 4, vals).unwrap();
            let s = Activation::RowSoftmax.apply(&x);
            for i in 0..3 {
                let total: f64 = s.row(i).iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
            let shifted = Activation::RowSoftmax.apply(&x.map(|v| v + shift));
            prop_assert!(s.max_abs_diff(&shifted).unwrap() < 1e-12);
        }

        #[test]
        fn activation_ranges(vals in proptest::collection::vec(-30.0f64..30.0, 8)) {
            let x = Matrix::new(2, 4, vals).unwrap();
            prop_assert!(Activation::Relu.apply(&x).data().iter().all(|&v| v >= 0.0));
            prop_assert!(Activation::Sigmoid.apply(&x).data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
