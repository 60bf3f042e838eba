//! Learnable GCN over an adaptively fused, shrinkage-refined graph.
//!
//! Forward pass, for view weights `π`, raw coefficients `S̄` and raw
//! thresholds `θ`:
//!
//! ```text
//! A_s = Σ_v π_v A_r^(v)
//! S   = sigmoid(½ (S̄ + S̄ᵀ))
//! Θ_ij = Θ_ji = sigmoid(θ_i)          for i <= j
//! A_ρ = A_s ⊙ ReLU(S − Θ)
//! Z   = softmax(A_ρ · ReLU(A_ρ · dropout(H) · W1) · W2)
//! ```
//!
//! The loss is cross-entropy over the labeled rows only. Every gradient below
//! is derived by hand; see the `lgcn` gradient-check tests.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::LabelInfo;
use crate::error::{Error, Result};
use crate::graph::GraphSet;
use crate::ndmath::{adam_step, io, sigmoid, softmax_row, Activation, AdamState, Matrix, OptimConfig, SeededRng};

/// Guard inside `ln(Z + ε)`.
pub const CE_EPS: f64 = 1e-12;
pub const S_BAR_INIT_STD: f64 = 0.01;
/// Mean of the initial `S̄` draw. `sigmoid(3) ≈ 0.95` sits well above the
/// initial threshold `sigmoid(0) = 0.5`, so every edge starts open. A zero
/// mean leaves `ReLU(S − Θ)` near zero, and the GCN output, which scales with
/// its square, carries almost no gradient.
pub const S_BAR_INIT_MEAN: f64 = 3.0;
pub const DEFAULT_DROPOUT: f64 = 0.3;

/// Which parts of the graph learning are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Uniform view weights, no shrinkage.
    WgcnFf,
    /// Learned view weights, no shrinkage.
    AwgcnFf,
    /// Learned view weights and learned shrinkage.
    #[default]
    LgcnFf,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::WgcnFf, Variant::AwgcnFf, Variant::LgcnFf];

    pub fn learns_view_weights(self) -> bool {
        !matches!(self, Variant::WgcnFf)
    }

    pub fn uses_shrinkage(self) -> bool {
        matches!(self, Variant::LgcnFf)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::WgcnFf => "WGCN_FF",
            Variant::AwgcnFf => "AWGCN_FF",
            Variant::LgcnFf => "LGCN_FF",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "WGCN_FF" => Ok(Variant::WgcnFf),
            "AWGCN_FF" => Ok(Variant::AwgcnFf),
            "LGCN_FF" => Ok(Variant::LgcnFf),
            other => Err(Error::config(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnableGcn {
    /// View weights, 1 × V, kept on the simplex between updates.
    pub pi: Matrix,
    /// Raw edge coefficients, m × m.
    pub s_bar: Matrix,
    /// Raw per-node thresholds, 1 × m.
    pub theta: Matrix,
    /// `[W1 (d × hidden), W2 (hidden × c)]`.
    pub weights: Vec<Matrix>,
    pub dropout_rate: f64,
    pub num_classes: usize,
    pub variant: Variant,
}

/// Sizes needed to build a [`LearnableGcn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnDims {
    pub samples: usize,
    pub views: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

/// Cached intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct GcnForward {
    /// Class probabilities, m × c; rows sum to one.
    pub z: Matrix,
    pub fused: Matrix,
    pub refined: Matrix,
    /// `ReLU(S − Θ)` and `S`; empty when shrinkage is bypassed.
    gate: Option<(Matrix, Matrix)>,
    input: Matrix,
    t1: Matrix,
    hidden: Matrix,
    u: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub pi: Matrix,
    pub s_bar: Matrix,
    pub theta: Matrix,
    pub weights: Vec<Matrix>,
}

/// Optimizer state for every learnable GCN parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnOptim {
    pi: AdamState,
    s_bar: AdamState,
    theta: AdamState,
    weights: Vec<AdamState>,
}

/// `Σ_v π_v A_v`.
pub fn fuse_graphs(pi: &[f64], graphs: &GraphSet) -> Result<Matrix> {
    let adj = &graphs.renorm_adjacencies;
    if pi.len() != adj.len() || adj.is_empty() {
        return Err(Error::shape("fuse_graphs", (1, pi.len()), (adj.len(), 1)));
    }
    let m = adj[0].rows();
    let mut out = Matrix::zeros(m, m);
    for (&w, a) in pi.iter().zip(adj) {
        out.axpy(w, a)?;
    }
    Ok(out)
}

/// Softmax of the raw view weights.
pub fn renormalize_pi(pi: &[f64]) -> Vec<f64> {
    softmax_row(pi)
}

/// `sigmoid(½ (S̄ + S̄ᵀ))`.
pub fn coefficient_matrix(s_bar: &Matrix) -> Matrix {
    let m = s_bar.rows();
    let mut s = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = sigmoid(0.5 * (s_bar.get(i, j) + s_bar.get(j, i)));
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    s
}

/// `Θ_ij = Θ_ji = sigmoid(θ_i)` for `i <= j`, i.e. `sigmoid(θ_min(i,j))`.
pub fn threshold_matrix(theta: &[f64]) -> Matrix {
    let m = theta.len();
    let t: Vec<f64> = theta.iter().map(|&x| sigmoid(x)).collect();
    Matrix::from_fn(m, m, |i, j| t[i.min(j)])
}

/// Differentiable shrinkage: `A_s ⊙ ReLU(S − Θ)`.
pub fn dsa(a_s: &Matrix, s_bar: &Matrix, theta: &[f64]) -> Result<Matrix> {
    let m = a_s.rows();
    if !a_s.is_square() || s_bar.shape() != (m, m) || theta.len() != m {
        return Err(Error::shape("dsa", a_s.shape(), s_bar.shape()));
    }
    if !a_s.is_symmetric(0.0) {
        return Err(Error::Contract("dsa input graph must be symmetric".into()));
    }
    let gate = coefficient_matrix(s_bar).sub(&threshold_matrix(theta))?.map(|v| v.max(0.0));
    a_s.hadamard(&gate)
}

/// `−Σ_{i∈Ω} Σ_j Y_ij ln(Z_ij + ε)`.
pub fn masked_cross_entropy(z: &Matrix, info: &LabelInfo) -> Result<f64> {
    if info.omega.is_empty() {
        return Err(Error::config("cross-entropy needs a non-empty labeled set"));
    }
    if info.onehot.cols() != z.cols() {
        return Err(Error::shape("masked_cross_entropy", z.shape(), info.onehot.shape()));
    }
    let mut loss = 0.0;
    for (r, &i) in info.omega.iter().enumerate() {
        if i >= z.rows() {
            return Err(Error::config(format!("labeled index {i} out of range")));
        }
        for (&y, &p) in info.onehot.row(r).iter().zip(z.row(i)) {
            if y != 0.0 {
                loss -= y * (p + CE_EPS).ln();
            }
        }
    }
    Ok(loss)
}

/// Gradient of [`masked_cross_entropy`] w.r.t. the pre-softmax logits.
/// Equals `Z − Y` on labeled rows up to the `ε` guard, zero elsewhere.
pub fn cross_entropy_logit_grad(z: &Matrix, info: &LabelInfo) -> Matrix {
    let mut g = Matrix::zeros(z.rows(), z.cols());
    for (r, &i) in info.omega.iter().enumerate() {
        let zi = z.row(i);
        let yrow = info.onehot.row(r);
        // dL/dZ_ij = −Y_ij / (Z_ij + ε); contract with the softmax Jacobian.
        let dz: Vec<f64> = yrow.iter().zip(zi).map(|(&y, &p)| -y / (p + CE_EPS)).collect();
        let inner: f64 = dz.iter().zip(zi).map(|(a, b)| a * b).sum();
        for ((o, &p), &d) in g.row_mut(i).iter_mut().zip(zi).zip(&dz) {
            *o = p * (d - inner);
        }
    }
    g
}

impl LearnableGcn {
    /// `π = 1/V`, `S̄ ~ N(s_bar_mean, 0.01²)`, `θ = 0`, Glorot GCN weights.
    pub fn init(dims: GcnDims, variant: Variant, s_bar_mean: f64, rng: &mut SeededRng) -> Result<Self> {
        let GcnDims {
            samples,
            views,
            input_dim,
            hidden_dim,
            num_classes,
        } = dims;
        if samples == 0 || views == 0 || input_dim == 0 || hidden_dim == 0 || num_classes == 0 {
            return Err(Error::config("GCN dimensions must be positive"));
        }
        if !s_bar_mean.is_finite() {
            return Err(Error::config("initial S̄ mean must be finite"));
        }
        let weights = vec![rng.glorot(input_dim, hidden_dim), rng.glorot(hidden_dim, num_classes)];
        let s_bar = rng.normal_matrix(samples, samples, s_bar_mean, S_BAR_INIT_STD);
        Ok(Self {
            pi: Matrix::filled(1, views, 1.0 / views as f64),
            s_bar,
            theta: Matrix::zeros(1, samples),
            weights,
            dropout_rate: DEFAULT_DROPOUT,
            num_classes,
            variant,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.s_bar.rows()
    }

    /// The fused graph `A_s` and the graph actually convolved with (`A_ρ`, or
    /// `A_s` itself when shrinkage is bypassed).
    pub fn graphs(&self, graphs: &GraphSet) -> Result<(Matrix, Matrix)> {
        let fused = fuse_graphs(self.pi.data(), graphs)?;
        let refined = if self.variant.uses_shrinkage() {
            dsa(&fused, &self.s_bar, self.theta.data())?
        } else {
            fused.clone()
        };
        Ok((fused, refined))
    }

    /// Full-batch forward pass. Dropout on `h` is applied only when `dropout`
    /// supplies a generator.
    pub fn forward(&self, graphs: &GraphSet, h: &Matrix, dropout: Option<&mut SeededRng>) -> Result<GcnForward> {
        let m = self.num_nodes();
        if h.rows() != m || graphs.num_nodes() != m {
            return Err(Error::shape("gcn_forward", (m, m), h.shape()));
        }
        let fused = fuse_graphs(self.pi.data(), graphs)?;
        let (refined, gate) = if self.variant.uses_shrinkage() {
            let s = coefficient_matrix(&self.s_bar);
            let gate = s.sub(&threshold_matrix(self.theta.data()))?.map(|v| v.max(0.0));
            (fused.hadamard(&gate)?, Some((gate, s)))
        } else {
            (fused.clone(), None)
        };

        let input = match dropout {
            Some(rng) if self.dropout_rate > 0.0 => {
                let keep = 1.0 - self.dropout_rate;
                let mut out = h.clone();
                for v in out.data_mut() {
                    *v = if rng.unit() < keep { *v / keep } else { 0.0 };
                }
                out
            }
            _ => h.clone(),
        };
        let t1 = input.matmul(&self.weights[0])?;
        let hidden = refined.matmul(&t1)?.map(|v| v.max(0.0));
        let u = hidden.matmul(&self.weights[1])?;
        let logits = refined.matmul(&u)?;
        let z = Activation::RowSoftmax.apply(&logits);
        Ok(GcnForward {
            z,
            fused,
            refined,
            gate,
            input,
            t1,
            hidden,
            u,
        })
    }

    /// Gradients of the masked cross-entropy for a cached forward pass.
    pub fn backward(&self, graphs: &GraphSet, fwd: &GcnForward, info: &LabelInfo) -> Result<GcnGrads> {
        let g_logits = cross_entropy_logit_grad(&fwd.z, info);
        let a = &fwd.refined;

        // logits = A_ρ U, U = hidden W2
        let g_u = a.matmul_tn(&g_logits)?;
        let mut g_refined = g_logits.matmul_nt(&fwd.u)?;
        let g_w2 = fwd.hidden.matmul_tn(&g_u)?;
        let g_hidden = g_u.matmul_nt(&self.weights[1])?;

        // hidden = ReLU(A_ρ T1), T1 = input W1
        let g_p1 = fwd.hidden.zip_map(&g_hidden, |y, g| if y > 0.0 { g } else { 0.0 })?;
        let g_t1 = a.matmul_tn(&g_p1)?;
        g_refined.axpy(1.0, &g_p1.matmul_nt(&fwd.t1)?)?;
        let g_w1 = fwd.input.matmul_tn(&g_t1)?;

        let m = self.num_nodes();
        let (g_fused, g_s_bar, g_theta) = match &fwd.gate {
            None => (g_refined, Matrix::zeros(m, m), Matrix::zeros(1, m)),
            Some((gate, s)) => {
                let g_fused = g_refined.hadamard(gate)?;
                // ∂/∂S on live entries; ∂/∂Θ is its negation.
                let mut g_s = Matrix::zeros(m, m);
                for idx in 0..m * m {
                    if gate.data()[idx] > 0.0 {
                        g_s.data_mut()[idx] = g_refined.data()[idx] * fwd.fused.data()[idx];
                    }
                }
                // through S = sigmoid(P), P = ½ (S̄ + S̄ᵀ)
                let g_p = g_s.zip_map(s, |g, sv| g * sv * (1.0 - sv))?;
                let mut g_s_bar = Matrix::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        g_s_bar.set(i, j, 0.5 * (g_p.get(i, j) + g_p.get(j, i)));
                    }
                }
                // Θ_ij depends on θ_min(i,j).
                let g_theta: Vec<f64> = (0..m)
                    .map(|i| {
                        let mut acc = -g_s.get(i, i);
                        for j in (i + 1)..m {
                            acc -= g_s.get(i, j) + g_s.get(j, i);
                        }
                        let t = sigmoid(self.theta.data()[i]);
                        acc * t * (1.0 - t)
                    })
                    .collect();
                (g_fused, g_s_bar, Matrix::row_vector(g_theta))
            }
        };

        let g_pi = if self.variant.learns_view_weights() {
            Matrix::row_vector(
                graphs
                    .renorm_adjacencies
                    .iter()
                    .map(|a_v| crate::ndmath::dot(g_fused.data(), a_v.data()))
                    .collect(),
            )
        } else {
            Matrix::zeros(1, self.pi.cols())
        };

        Ok(GcnGrads {
            pi: g_pi,
            s_bar: g_s_bar,
            theta: g_theta,
            weights: vec![g_w1, g_w2],
        })
    }

    pub fn optimizer(&self, config: OptimConfig) -> GcnOptim {
        GcnOptim {
            pi: AdamState::for_param(&self.pi, config),
            s_bar: AdamState::for_param(&self.s_bar, config),
            theta: AdamState::for_param(&self.theta, config),
            weights: self.weights.iter().map(|w| AdamState::for_param(w, config)).collect(),
        }
    }

    /// One training step: forward (with dropout when `dropout` is given),
    /// backward, optimizer update of every active parameter group, then the
    /// softmax re-projection of `π`. Returns the pre-step loss.
    pub fn backward_update(
        &mut self,
        graphs: &GraphSet,
        h: &Matrix,
        info: &LabelInfo,
        optim: &mut GcnOptim,
        dropout: Option<&mut SeededRng>,
    ) -> Result<f64> {
        let fwd = self.forward(graphs, h, dropout)?;
        let loss = masked_cross_entropy(&fwd.z, info)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("GCN loss".into()));
        }
        let grads = self.backward(graphs, &fwd, info)?;
        for ((w, g), st) in self.weights.iter_mut().zip(&grads.weights).zip(&mut optim.weights) {
            adam_step(w, g, st)?;
        }
        if self.variant.uses_shrinkage() {
            adam_step(&mut self.s_bar, &grads.s_bar, &mut optim.s_bar)?;
            adam_step(&mut self.theta, &grads.theta, &mut optim.theta)?;
        }
        if self.variant.learns_view_weights() {
            adam_step(&mut self.pi, &grads.pi, &mut optim.pi)?;
            self.pi = Matrix::row_vector(renormalize_pi(self.pi.data()));
        }
        Ok(loss)
    }

    /// Class predictions from a dropout-free pass; ties go to the lowest class.
    pub fn predict(&self, graphs: &GraphSet, h: &Matrix) -> Result<Vec<usize>> {
        let fwd = self.forward(graphs, h, None)?;
        Ok((0..fwd.z.rows()).map(|i| fwd.z.row_argmax(i)).collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_matrix(dir.join("pi.txt"), &self.pi)?;
        io::write_matrix(dir.join("s_bar.txt"), &self.s_bar)?;
        io::write_matrix(dir.join("theta.txt"), &self.theta)?;
        for (l, w) in self.weights.iter().enumerate() {
            io::write_matrix(dir.join(format!("weight{l}.txt")), w)?;
        }
        let path = dir.join("gcn");
        let text = format!(
            "variant = {}\ndropout = {}\nclasses = {}\nlayers = {}\n",
            self.variant,
            self.dropout_rate,
            self.num_classes,
            self.weights.len()
        );
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("gcn");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut variant = Variant::default();
        let (mut dropout, mut classes, mut layers) = (DEFAULT_DROPOUT, None, 2usize);
        for (n, line) in text.lines().enumerate() {
            let Some((k, v)) = line.split_once('=') else { continue };
            let v = v.trim();
            let bad = |e: &dyn fmt::Display| Error::parse(&path, n + 1, e.to_string());
            match k.trim() {
                "variant" => variant = v.parse().map_err(|e| bad(&e))?,
                "dropout" => dropout = v.parse().map_err(|e| bad(&e))?,
                "classes" => classes = Some(v.parse().map_err(|e| bad(&e))?),
                "layers" => layers = v.parse().map_err(|e| bad(&e))?,
                _ => {}
            }
        }
        let weights = (0..layers)
            .map(|l| io::read_matrix(dir.join(format!("weight{l}.txt"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pi: io::read_matrix(dir.join("pi.txt"))?,
            s_bar: io::read_matrix(dir.join("s_bar.txt"))?,
            theta: io::read_matrix(dir.join("theta.txt"))?,
            weights,
            dropout_rate: dropout,
            num_classes: classes.ok_or_else(|| Error::parse(&path, 1, "missing `classes`"))?,
            variant,
        })
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::data::MultiViewDataset;
    use crate::graph::{build_graphset, Metric};
    use crate::ndmath::finite_diff_check;
    use proptest::prelude::*;

    fn dims(samples: usize, views: usize, input_dim: usize, hidden_dim: usize, num_classes: usize) -> GcnDims {
        GcnDims { samples, views, input_dim, hidden_dim, num_classes }
    }

    fn info_for(labels: &[usize], omega: Vec<usize>, c: usize) -> LabelInfo {
        let ds = MultiViewDataset::new("t", vec![Matrix::zeros(labels.len(), 1)], labels.to_vec(), c).unwrap();
        LabelInfo::from_indices(&ds, omega, 0.5).unwrap()
    }

    /// m = 5, V = 2, c = 2 instance with live and dead shrinkage entries.
    fn instance(seed: u64, variant: Variant) -> (LearnableGcn, GraphSet, Matrix, LabelInfo) {
        let mut rng = SeededRng::from_u64(seed);
        let views = vec![rng.normal_matrix(5, 3, 0.0, 1.0), rng.normal_matrix(5, 2, 0.0, 1.0)];
        let labels = vec![0, 1, 0, 1, 1];
        let ds = MultiViewDataset::new("g", views, labels.clone(), 2).unwrap();
        let graphs = build_graphset(&ds, 2, Metric::Euclidean).unwrap();
        let mut gcn = LearnableGcn::init(dims(5, 2, 3, 4, 2), variant, S_BAR_INIT_MEAN, &mut rng).unwrap();
        gcn.dropout_rate = 0.0;
        gcn.s_bar = rng.normal_matrix(5, 5, 0.5, 1.0);
        gcn.theta = rng.normal_matrix(1, 5, -0.3, 0.5);
        gcn.pi = Matrix::row_vector(vec![0.35, 0.65]);
        let h = rng.normal_matrix(5, 3, 0.0, 1.0);
        let info = info_for(&labels, vec![0, 1, 4], 2);
        (gcn, graphs, h, info)
    }

    fn loss_of(gcn: &LearnableGcn, graphs: &GraphSet, h: &Matrix, info: &LabelInfo) -> f64 {
        masked_cross_entropy(&gcn.forward(graphs, h, None).unwrap().z, info).unwrap()
    }

    #[test]
    fn fuse_graphs_examples() {
        let a1 = Matrix::identity(2);
        let a2 = Matrix::filled(2, 2, 0.5);
        let gs = GraphSet { renorm_adjacencies: vec![a1.clone(), a2.clone()], k: None, metric: None };
        assert_eq!(fuse_graphs(&[1.0, 0.0], &gs).unwrap(), a1);
        let fused = fuse_graphs(&[0.25, 0.75], &gs).unwrap();
        assert_eq!(fused, Matrix::from_rows(&[[0.625, 0.375], [0.375, 0.625]]));
        let same = GraphSet { renorm_adjacencies: vec![a2.clone(), a2.clone(), a2.clone()], k: None, metric: None };
        assert!(fuse_graphs(&[0.2, 0.3, 0.5], &same).unwrap().max_abs_diff(&a2).unwrap() < 1e-15);
        assert!(fuse_graphs(&[1.0], &gs).is_err());
    }

    #[test]
    fn renormalize_pi_examples() {
        let u = renormalize_pi(&[0.7; 4]);
        assert!(u.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let p = renormalize_pi(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let shifted = renormalize_pi(&[5.0, 5.0 + 3f64.ln()]);
        assert!((shifted[1] - p[1]).abs() < 1e-15);
    }

    #[test]
    fn dsa_examples() {
        let a = Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]);
        // S ≡ 0.5 = Θ everywhere: full shutoff.
        assert_eq!(dsa(&a, &Matrix::zeros(2, 2), &[0.0, 0.0]).unwrap(), Matrix::zeros(2, 2));
        // S = 0.8 off-diagonal, Θ = 0.3.
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let s_bar = Matrix::from_rows(&[[0.0, logit(0.8)], [logit(0.8), 0.0]]);
        let out = dsa(&a, &s_bar, &[logit(0.3), logit(0.3)]).unwrap();
        assert!((out.get(0, 1) - 0.25).abs() < 1e-15);
        assert!((out.get(1, 0) - 0.25).abs() < 1e-15);
        assert_eq!(out.get(0, 0), 0.0);
        let asym = Matrix::from_rows(&[[0.0, 0.5], [0.4, 0.0]]);
        assert!(matches!(dsa(&asym, &s_bar, &[0.0, 0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn threshold_rule_uses_lower_index() {
        let t = threshold_matrix(&[0.0, 1.0, -1.0]);
        assert_eq!(t.get(0, 2), 0.5);
        assert_eq!(t.get(2, 0), 0.5);
        assert_eq!(t.get(1, 2), sigmoid(1.0));
        assert_eq!(t.get(2, 2), sigmoid(-1.0));
        assert_eq!(threshold_matrix(&[0.0; 4]), Matrix::filled(4, 4, 0.5));
    }

    #[test]
    fn single_node_single_class() {
        let gs = GraphSet { renorm_adjacencies: vec![Matrix::from_rows(&[[0.7]])], k: None, metric: None };
        let gcn = LearnableGcn {
            pi: Matrix::ones(1, 1),
            s_bar: Matrix::zeros(1, 1),
            theta: Matrix::zeros(1, 1),
            weights: vec![Matrix::ones(1, 1), Matrix::ones(1, 1)],
            dropout_rate: 0.0,
            num_classes: 1,
            variant: Variant::AwgcnFf,
        };
        let z = gcn.forward(&gs, &Matrix::ones(1, 1), None).unwrap().z;
        assert_eq!(z, Matrix::ones(1, 1));
    }

    #[test]
    fn zero_logits_are_uniform() {
        let (mut gcn, graphs, h, _) = instance(0, Variant::LgcnFf);
        gcn.weights[1] = Matrix::zeros(4, 2);
        let z = gcn.forward(&graphs, &h, None).unwrap().z;
        assert!(z.data().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let (gcn, graphs, h, _) = instance(7, Variant::LgcnFf);
        let z = gcn.forward(&graphs, &h, None).unwrap().z;
        let m = 5;
        // naive loops over every formula
        let pi = gcn.pi.data();
        let mut a = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let a_s = pi[0] * graphs.renorm_adjacencies[0].get(i, j) + pi[1] * graphs.renorm_adjacencies[1].get(i, j);
                let s = 1.0 / (1.0 + (-(gcn.s_bar.get(i, j) + gcn.s_bar.get(j, i)) / 2.0).exp());
                let th = 1.0 / (1.0 + (-gcn.theta.get(0, i.min(j))).exp());
                a[i][j] = a_s * (s - th).max(0.0);
            }
        }
        let prod = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let (r, k, c) = (x.len(), y.len(), y[0].len());
            (0..r).map(|i| (0..c).map(|j| (0..k).map(|p| x[i][p] * y[p][j]).sum()).collect()).collect()
        };
        let to_vec = |mm: &Matrix| (0..mm.rows()).map(|i| mm.row(i).to_vec()).collect::<Vec<_>>();
        let ah = prod(&a, &to_vec(&h));
        let hidden: Vec<Vec<f64>> = prod(&ah, &to_vec(&gcn.weights[0]))
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        let logits = prod(&prod(&a, &hidden), &to_vec(&gcn.weights[1]));
        for i in 0..m {
            let e: Vec<f64> = logits[i].iter().map(|v| v.exp()).collect();
            let total: f64 = e.iter().sum();
            for j in 0..2 {
                assert!((z.get(i, j) - e[j] / total).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let info = info_for(&[0, 1, 1], vec![0, 2], 2);
        let z = Matrix::from_rows(&[[1.0, 0.0], [0.3, 0.7], [0.0, 1.0]]);
        assert!(masked_cross_entropy(&z, &info).unwrap() < 1e-11);

        let single = info_for(&[2, 0, 1], vec![0], 3);
        let uniform = Matrix::filled(3, 3, 1.0 / 3.0);
        assert!((masked_cross_entropy(&uniform, &single).unwrap() - 3f64.ln()).abs() < 1e-10);

        let mut perturbed = z.clone();
        perturbed.row_mut(1).copy_from_slice(&[0.9, 0.1]);
        assert_eq!(
            masked_cross_entropy(&z, &info).unwrap().to_bits(),
            masked_cross_entropy(&perturbed, &info).unwrap().to_bits()
        );
        let empty = LabelInfo { omega: vec![], onehot: Matrix::zeros(0, 2), label_ratio: 0.1 };
        assert!(masked_cross_entropy(&z, &empty).is_err());
    }

    #[test]
    fn logit_grad_is_z_minus_y_on_labeled_rows() {
        let (gcn, graphs, h, info) = instance(3, Variant::LgcnFf);
        let z = gcn.forward(&graphs, &h, None).unwrap().z;
        let g = cross_entropy_logit_grad(&z, &info);
        for i in 0..5 {
            match info.omega.iter().position(|&o| o == i) {
                Some(r) => {
                    for j in 0..2 {
                        let expected = z.get(i, j) - info.onehot.get(r, j);
                        assert!((g.get(i, j) - expected).abs() < 1e-11);
                    }
                }
                None => assert!(g.row(i).iter().all(|&v| v == 0.0)),
            }
        }
    }

    fn gradcheck_all(variant: Variant, seed: u64) -> Vec<(&'static str, f64)> {
        let (gcn, graphs, h, info) = instance(seed, variant);
        let fwd = gcn.forward(&graphs, &h, None).unwrap();
        let grads = gcn.backward(&graphs, &fwd, &info).unwrap();
        let check = |set: fn(&mut LearnableGcn, &Matrix), analytic: &Matrix, at: &Matrix| {
            let objective = |p: &Matrix| {
                let mut g = gcn.clone();
                set(&mut g, p);
                loss_of(&g, &graphs, &h, &info)
            };
            finite_diff_check(objective, analytic, at, 1e-6).unwrap()
        };
        let mut out = vec![
            ("W1", check(|g, p| g.weights[0] = p.clone(), &grads.weights[0], &gcn.weights[0])),
            ("W2", check(|g, p| g.weights[1] = p.clone(), &grads.weights[1], &gcn.weights[1])),
        ];
        if variant.learns_view_weights() {
            out.push(("pi", check(|g, p| g.pi = p.clone(), &grads.pi, &gcn.pi)));
        }
        if variant.uses_shrinkage() {
            out.push(("s_bar", check(|g, p| g.s_bar = p.clone(), &grads.s_bar, &gcn.s_bar)));
            out.push(("theta", check(|g, p| g.theta = p.clone(), &grads.theta, &gcn.theta)));
        }
        out
    }

    #[test]
    fn gradients_pass_finite_difference_check() {
        for variant in Variant::ALL {
            for seed in 0..3 {
                for (name, err) in gradcheck_all(variant, seed) {
                    assert!(err < 1e-5, "{variant} seed {seed} {name}: {err}");
                }
            }
        }
    }

    #[test]
    fn dead_thresholds_get_zero_gradient() {
        let (mut gcn, graphs, h, info) = instance(1, Variant::LgcnFf);
        // θ_0 huge: every entry in row/column 0 is shut off.
        gcn.theta.data_mut()[0] = 20.0;
        let fwd = gcn.forward(&graphs, &h, None).unwrap();
        let grads = gcn.backward(&graphs, &fwd, &info).unwrap();
        assert_eq!(grads.theta.get(0, 0), 0.0);
    }

    #[test]
    fn update_keeps_pi_on_simplex_and_bypasses_respect_variant() {
        for variant in Variant::ALL {
            let (mut gcn, graphs, h, info) = instance(2, variant);
            let before = gcn.clone();
            let mut opt = gcn.optimizer(OptimConfig::adam(0.01, 0.01));
            for _ in 0..3 {
                gcn.backward_update(&graphs, &h, &info, &mut opt, None).unwrap();
                assert!((gcn.pi.sum() - 1.0).abs() < 1e-12);
                assert!(gcn.pi.data().iter().all(|&p| p > 0.0));
            }
            assert_ne!(gcn.weights, before.weights);
            if !variant.uses_shrinkage() {
                assert_eq!(gcn.s_bar, before.s_bar);
                assert_eq!(gcn.theta, before.theta);
            }
            if !variant.learns_view_weights() {
                assert_eq!(gcn.pi, before.pi);
            }
        }
    }

    #[test]
    fn init_contract() {
        let mut r1 = SeededRng::from_u64(4);
        let mut r2 = SeededRng::from_u64(4);
        let g1 = LearnableGcn::init(dims(6, 3, 4, 5, 2), Variant::LgcnFf, S_BAR_INIT_MEAN, &mut r1).unwrap();
        let g2 = LearnableGcn::init(dims(6, 3, 4, 5, 2), Variant::LgcnFf, S_BAR_INIT_MEAN, &mut r2).unwrap();
        assert_eq!(g1, g2);
        assert!(g1.pi.data().iter().all(|&p| p == 1.0 / 3.0));
        assert_eq!(threshold_matrix(g1.theta.data()), Matrix::filled(6, 6, 0.5));
        // every coefficient starts above its threshold
        let gate = coefficient_matrix(&g1.s_bar).sub(&threshold_matrix(g1.theta.data())).unwrap();
        assert!(gate.data().iter().all(|&g| g > 0.4));
        assert!(LearnableGcn::init(dims(0, 3, 4, 5, 2), Variant::LgcnFf, 0.0, &mut r1).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let (gcn, ..) = instance(5, Variant::AwgcnFf);
        let tmp = tempfile::tempdir().unwrap();
        gcn.save(tmp.path()).unwrap();
        assert_eq!(LearnableGcn::load(tmp.path()).unwrap(), gcn);
    }

    proptest! {
        #[test]
        fn dsa_symmetric_shrinking_and_pattern_preserving(seed in 0u64..300) {
            let mut rng = SeededRng::from_u64(seed);
            let m = 6;
            let raw = rng.uniform_matrix(m, m, -1.0, 1.0).map(|v| v.max(0.0));
            let a_s = raw.add(&raw.transpose()).unwrap();
            let s_bar = rng.normal_matrix(m, m, 0.0, 2.0);
            let theta: Vec<f64> = (0..m).map(|_| rng.normal(0.0, 1.0)).collect();
            let out = dsa(&a_s, &s_bar, &theta).unwrap();
            prop_assert!(out.is_symmetric(0.0));
            for (o, a) in out.data().iter().zip(a_s.data()) {
                prop_assert!(o.abs() <= a.abs());
                if *a == 0.0 {
                    prop_assert_eq!(*o, 0.0);
                }
            }
        }

        #[test]
        fn embedding_rows_are_distributions(seed in 0u64..100) {
            let (gcn, graphs, h, _) = instance(seed, Variant::LgcnFf);
            let z1 = gcn.forward(&graphs, &h, None).unwrap().z;
            let z2 = gcn.forward(&graphs, &h, None).unwrap().z;
            prop_assert_eq!(&z1, &z2);
            for i in 0..z1.rows() {
                prop_assert!((z1.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(z1.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }
}
