//! Four-step alternating training: per-view autoencoders, fusion weights,
//! shared representation, then the GCN. Each step holds every other
//! parameter group fixed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{split_labels, LabelInfo, MultiViewDataset};
use crate::dense::StackOptim;
use crate::error::{Error, Result};
use crate::fusion::FusionNet;
use crate::graph::{build_graphset, GraphSet, Metric, DEFAULT_K};
use crate::lgcn::{masked_cross_entropy, GcnDims, GcnOptim, LearnableGcn, Variant, S_BAR_INIT_MEAN};
use crate::ndmath::{AdamState, Matrix, OptimConfig, SeededRng};
use crate::sparse_ae::{SparseAutoencoder, DEFAULT_RHO};

const STREAM_AE: u64 = 100;
const STREAM_FUSION: u64 = 2;
const STREAM_GCN: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_iters: usize,
    pub lr_ae: f64,
    /// Rate for the fusion weights, `H` and every GCN parameter.
    pub lr_other: f64,
    pub weight_decay: f64,
    pub beta: f64,
    pub rho: f64,
    pub dropout: f64,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub k: usize,
    pub metric: Metric,
    pub patience: usize,
    pub seed: u64,
    pub label_ratio: f64,
    pub variant: Variant,
    /// Mean of the initial raw edge coefficients.
    pub s_bar_init_mean: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            lr_ae: 0.001,
            lr_other: 0.01,
            weight_decay: 0.01,
            beta: 1.0,
            rho: DEFAULT_RHO,
            dropout: 0.3,
            latent_dim: 64,
            hidden_dim: 64,
            k: DEFAULT_K,
            metric: Metric::Euclidean,
            patience: 50,
            seed: 0,
            label_ratio: 0.1,
            variant: Variant::LgcnFf,
            s_bar_init_mean: S_BAR_INIT_MEAN,
        }
    }
}

impl TrainConfig {
    /// Larger widths for real feature sets.
    pub fn for_real_data() -> Self {
        Self {
            latent_dim: 512,
            hidden_dim: 128,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        if !(rate_ok(self.lr_ae) && rate_ok(self.lr_other) && rate_ok(self.weight_decay)) {
            return Err(Error::config("learning rates and weight decay must be finite and >= 0"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if self.latent_dim == 0 || self.hidden_dim == 0 || self.k == 0 {
            return Err(Error::config("latent_dim, hidden_dim and k must be positive"));
        }
        if !(self.label_ratio > 0.0 && self.label_ratio < 1.0) {
            return Err(Error::config(format!("label ratio {} not in (0, 1)", self.label_ratio)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config(format!("beta {} must be >= 0", self.beta)));
        }
        Ok(())
    }

    /// `key = value` lines, one per field.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "variant = {}", self.variant);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "max_iters = {}", self.max_iters);
        let _ = writeln!(s, "lr_ae = {}", self.lr_ae);
        let _ = writeln!(s, "lr_other = {}", self.lr_other);
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "dropout = {}", self.dropout);
        let _ = writeln!(s, "latent_dim = {}", self.latent_dim);
        let _ = writeln!(s, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "metric = {}", self.metric);
        let _ = writeln!(s, "patience = {}", self.patience);
        let _ = writeln!(s, "label_ratio = {}", self.label_ratio);
        let _ = writeln!(s, "s_bar_init_mean = {}", self.s_bar_init_mean);
        s
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn p<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        match key {
            "variant" => self.variant = p(value)?,
            "seed" => self.seed = p(value)?,
            "max_iters" => self.max_iters = p(value)?,
            "lr_ae" => self.lr_ae = p(value)?,
            "lr_other" => self.lr_other = p(value)?,
            "weight_decay" => self.weight_decay = p(value)?,
            "beta" => self.beta = p(value)?,
            "rho" => self.rho = p(value)?,
            "dropout" => self.dropout = p(value)?,
            "latent_dim" => self.latent_dim = p(value)?,
            "hidden_dim" => self.hidden_dim = p(value)?,
            "k" => self.k = p(value)?,
            "metric" => self.metric = p(value)?,
            "patience" => self.patience = p(value)?,
            "label_ratio" => self.label_ratio = p(value)?,
            "s_bar_init_mean" => self.s_bar_init_mean = p(value)?,
            _ => {}
        }
        Ok(())
    }
}

/// Losses and accuracies after one completed iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Sum of the per-view autoencoder losses entering step 1.
    pub sa_loss: f64,
    /// Fusion loss entering step 2.
    pub fc_loss: f64,
    /// Dropout-free GCN loss after step 4.
    pub lgcn_loss: f64,
    pub labeled_accuracy: f64,
    pub heldout_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<IterationRecord>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn min_lgcn_loss(&self) -> Option<f64> {
        self.records.iter().map(|r| r.lgcn_loss).min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,sa_loss,fc_loss,lgcn_loss,labeled_accuracy,heldout_accuracy\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.iteration, r.sa_loss, r.fc_loss, r.lgcn_loss, r.labeled_accuracy, r.heldout_accuracy
            );
        }
        s
    }
}

/// Fraction of `indices` whose prediction matches the label; 0 when empty.
pub fn accuracy(predictions: &[usize], labels: &[usize], indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let hits = indices.iter().filter(|&&i| predictions[i] == labels[i]).count();
    hits as f64 / indices.len() as f64
}

/// Dropout-free evaluation of the current model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub lgcn_loss: f64,
    pub predictions: Vec<usize>,
    pub labeled_accuracy: f64,
    pub heldout_accuracy: f64,
}

/// Every trainable component of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub autoencoders: Vec<SparseAutoencoder>,
    pub fusion: FusionNet,
    pub gcn: LearnableGcn,
}

impl Model {
    pub fn init(config: &TrainConfig, dataset: &MultiViewDataset) -> Result<Self> {
        config.validate()?;
        let root = SeededRng::from_u64(config.seed);
        let m = dataset.num_samples();
        let autoencoders = dataset
            .view_dims()
            .iter()
            .enumerate()
            .map(|(v, &n)| {
                let mut rng = root.fork(STREAM_AE + v as u64);
                SparseAutoencoder::init(n, config.latent_dim, config.rho, config.beta, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let fusion = FusionNet::init(m, config.latent_dim, &mut root.fork(STREAM_FUSION));
        let dims = GcnDims {
            samples: m,
            views: dataset.num_views(),
            input_dim: config.latent_dim,
            hidden_dim: config.hidden_dim,
            num_classes: dataset.num_classes,
        };
        let mut gcn = LearnableGcn::init(dims, config.variant, config.s_bar_init_mean, &mut root.fork(STREAM_GCN))?;
        gcn.dropout_rate = config.dropout;
        Ok(Self {
            autoencoders,
            fusion,
            gcn,
        })
    }

    pub fn latents(&self, dataset: &MultiViewDataset) -> Result<Vec<Matrix>> {
        self.autoencoders
            .iter()
            .zip(&dataset.views)
            .map(|(ae, x)| Ok(ae.forward(x)?.into_latent()))
            .collect()
    }

    /// Class probabilities `Z` from a dropout-free pass.
    pub fn embedding(&self, graphs: &GraphSet) -> Result<Matrix> {
        Ok(self.gcn.forward(graphs, &self.fusion.shared_h, None)?.z)
    }

    /// Argmax of each row of `Z`; ties go to the lowest class index.
    pub fn predict(&self, graphs: &GraphSet) -> Result<Vec<usize>> {
        self.gcn.predict(graphs, &self.fusion.shared_h)
    }

    pub fn evaluate(&self, dataset: &MultiViewDataset, graphs: &GraphSet, info: &LabelInfo) -> Result<Evaluation> {
        let z = self.embedding(graphs)?;
        let lgcn_loss = masked_cross_entropy(&z, info)?;
        let predictions: Vec<usize> = (0..z.rows()).map(|i| z.row_argmax(i)).collect();
        let heldout = info.unlabeled(dataset.num_samples());
        Ok(Evaluation {
            lgcn_loss,
            labeled_accuracy: accuracy(&predictions, &dataset.labels, &info.omega),
            heldout_accuracy: accuracy(&predictions, &dataset.labels, &heldout),
            predictions,
        })
    }

    /// Number of stored parameters across all components.
    pub fn parameter_count(&self) -> usize {
        let stack = |ls: &[crate::dense::DenseLayer]| ls.iter().map(|l| l.weight.len() + l.bias.len()).sum::<usize>();
        self.autoencoders.iter().map(|a| stack(&a.layers)).sum::<usize>()
            + stack(&self.fusion.layers)
            + self.fusion.shared_h.len()
            + self.gcn.pi.len()
            + self.gcn.s_bar.len()
            + self.gcn.theta.len()
            + self.gcn.weights.iter().map(Matrix::len).sum::<usize>()
    }
}

/// A model plus the optimizer state and dropout stream that drive it.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Model,
    pub iteration: usize,
    ae_optims: Vec<StackOptim>,
    fc_optim: StackOptim,
    h_optim: AdamState,
    gcn_optim: GcnOptim,
    dropout_rng: SeededRng,
}

fn check_finite(loss: f64, step: &str) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("{step} loss is {loss}")))
    }
}

fn name_step<T>(r: Result<T>, step: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("{step}: {msg}")),
        other => other,
    })
}

impl TrainState {
    pub fn new(config: &TrainConfig, model: Model) -> Self {
        let ae_cfg = OptimConfig::adam(config.lr_ae, config.weight_decay);
        let other = OptimConfig::adam(config.lr_other, config.weight_decay);
        Self {
            ae_optims: model.autoencoders.iter().map(|a| a.optimizer(ae_cfg)).collect(),
            fc_optim: model.fusion.fc_optimizer(other),
            h_optim: model.fusion.h_optimizer(other),
            gcn_optim: model.gcn.optimizer(other),
            dropout_rng: SeededRng::from_u64(config.seed).fork(STREAM_DROPOUT),
            model,
            iteration: 0,
        }
    }

    pub fn init(config: &TrainConfig, dataset: &MultiViewDataset) -> Result<Self> {
        Ok(Self::new(config, Model::init(config, dataset)?))
    }

    /// Step 1: one update of every view's autoencoder. Views run in parallel.
    /// Returns the summed pre-step loss.
    pub fn step_autoencoders(&mut self, dataset: &MultiViewDataset) -> Result<f64> {
        const STEP: &str = "step 1 (autoencoders)";
        let losses = self
            .model
            .autoencoders
            .par_iter_mut()
            .zip(self.ae_optims.par_iter_mut())
            .zip(dataset.views.par_iter())
            .map(|((ae, opt), x)| ae.backward_update(x, opt))
            .collect::<Result<Vec<f64>>>();
        check_finite(name_step(losses, STEP)?.iter().sum(), STEP)
    }

    /// Step 2: fusion weights and biases.
    pub fn step_fusion_weights(&mut self, latents: &[Matrix]) -> Result<f64> {
        const STEP: &str = "step 2 (fusion weights)";
        let loss = name_step(self.model.fusion.update_fc_params(latents, &mut self.fc_optim), STEP)?;
        check_finite(loss, STEP)
    }

    /// Step 3: the shared representation `H`.
    pub fn step_shared_h(&mut self, latents: &[Matrix]) -> Result<f64> {
        const STEP: &str = "step 3 (shared representation)";
        let loss = name_step(self.model.fusion.update_shared_h(latents, &mut self.h_optim), STEP)?;
        check_finite(loss, STEP)
    }

    /// Step 4: GCN weights, view weights and shrinkage parameters, with
    /// dropout on `H`.
    pub fn step_gcn(&mut self, graphs: &GraphSet, info: &LabelInfo) -> Result<f64> {
        const STEP: &str = "step 4 (GCN)";
        let h = &self.model.fusion.shared_h;
        let loss = name_step(
            self.model
                .gcn
                .backward_update(graphs, h, info, &mut self.gcn_optim, Some(&mut self.dropout_rng)),
            STEP,
        )?;
        check_finite(loss, STEP)
    }

    /// One full iteration of the four steps, followed by a dropout-free
    /// evaluation.
    pub fn train_iteration(
        &mut self,
        dataset: &MultiViewDataset,
        graphs: &GraphSet,
        info: &LabelInfo,
    ) -> Result<IterationRecord> {
        let sa_loss = self.step_autoencoders(dataset)?;
        let latents = self.model.latents(dataset)?;
        let fc_loss = self.step_fusion_weights(&latents)?;
        self.step_shared_h(&latents)?;
        self.step_gcn(graphs, info)?;
        self.iteration += 1;
        let eval = self.model.evaluate(dataset, graphs, info)?;
        check_finite(eval.lgcn_loss, "evaluation")?;
        Ok(IterationRecord {
            iteration: self.iteration,
            sa_loss,
            fc_loss,
            lgcn_loss: eval.lgcn_loss,
            labeled_accuracy: eval.labeled_accuracy,
            heldout_accuracy: eval.heldout_accuracy,
        })
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone)]
pub struct Fitted {
    pub config: TrainConfig,
    /// Model at the iteration with the lowest GCN loss (the initial model
    /// when no iteration ran).
    pub model: Model,
    /// Iteration the model was taken from; 0 for the initial model.
    pub best_iteration: usize,
    pub trace: TrainTrace,
    pub graphs: GraphSet,
    pub labels: LabelInfo,
    pub seconds: f64,
}

impl Fitted {
    pub fn predict(&self) -> Result<Vec<usize>> {
        self.model.predict(&self.graphs)
    }

    /// Accuracy over every sample outside the labeled set.
    pub fn heldout_accuracy(&self, dataset: &MultiViewDataset) -> Result<f64> {
        let pred = self.predict()?;
        Ok(accuracy(&pred, &dataset.labels, &self.labels.unlabeled(dataset.num_samples())))
    }

    pub fn best_record(&self) -> Option<&IterationRecord> {
        self.trace.records.iter().find(|r| r.iteration == self.best_iteration)
    }

    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let meta = CheckpointMeta {
            config: self.config.clone(),
            iteration: self.best_iteration,
            record: self.best_record().copied(),
            omega: self.labels.omega.clone(),
        };
        save_checkpoint(&self.model, &meta, dir.as_ref())?;
        Ok(dir.as_ref().to_path_buf())
    }
}

/// Builds the per-view graphs and the seeded label split, then trains.
pub fn fit(config: &TrainConfig, dataset: &MultiViewDataset) -> Result<Fitted> {
    config.validate()?;
    let graphs = build_graphset(dataset, config.k, config.metric)?;
    let info = split_labels(dataset, config.label_ratio, config.seed)?;
    fit_with(config, dataset, graphs, info)
}

/// Trains on caller-supplied graphs and label split.
pub fn fit_with(config: &TrainConfig, dataset: &MultiViewDataset, graphs: GraphSet, info: LabelInfo) -> Result<Fitted> {
    let start = Instant::now();
    if graphs.num_views() != dataset.num_views() || graphs.num_nodes() != dataset.num_samples() {
        return Err(Error::config(format!(
            "graph set has {} views over {} nodes, dataset has {} views over {} samples",
            graphs.num_views(),
            graphs.num_nodes(),
            dataset.num_views(),
            dataset.num_samples()
        )));
    }
    let mut state = TrainState::init(config, dataset)?;
    let mut trace = TrainTrace::default();
    let mut best: Option<(f64, usize, Model)> = None;
    while state.iteration < config.max_iters {
        let record = state.train_iteration(dataset, &graphs, &info)?;
        log::debug!(
            "iter {} sa {:.6e} fc {:.6e} lgcn {:.6e} acc {:.4}/{:.4}",
            record.iteration,
            record.sa_loss,
            record.fc_loss,
            record.lgcn_loss,
            record.labeled_accuracy,
            record.heldout_accuracy
        );
        trace.records.push(record);
        match &best {
            Some((loss, _, _)) if record.lgcn_loss >= *loss => {}
            _ => best = Some((record.lgcn_loss, record.iteration, state.model.clone())),
        }
        let since_best = best.as_ref().map_or(0, |(_, it, _)| state.iteration - it);
        if since_best >= config.patience {
            log::info!("early stop at iteration {}", state.iteration);
            break;
        }
    }
    let (model, best_iteration) = match best {
        Some((_, it, model)) => (model, it),
        None => (state.model, 0),
    };
    Ok(Fitted {
        config: config.clone(),
        model,
        best_iteration,
        trace,
        graphs,
        labels: info,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Metadata stored next to the parameter files of a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub config: TrainConfig,
    pub iteration: usize,
    pub record: Option<IterationRecord>,
    /// Labeled indices used for training.
    pub omega: Vec<usize>,
}

/// Writes `ae_v<i>/`, `fusion/`, `lgcn/` and a `meta` key-value file.
pub fn save_checkpoint(model: &Model, meta: &CheckpointMeta, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (v, ae) in model.autoencoders.iter().enumerate() {
        ae.save(&dir.join(format!("ae_v{v}")))?;
    }
    model.fusion.save(&dir.join("fusion"))?;
    model.gcn.save(&dir.join("lgcn"))?;

    let mut text = format!("iteration = {}\nviews = {}\n", meta.iteration, model.autoencoders.len());
    if let Some(r) = meta.record {
        let _ = writeln!(text, "sa_loss = {}", r.sa_loss);
        let _ = writeln!(text, "fc_loss = {}", r.fc_loss);
        let _ = writeln!(text, "lgcn_loss = {}", r.lgcn_loss);
        let _ = writeln!(text, "labeled_accuracy = {}", r.labeled_accuracy);
        let _ = writeln!(text, "heldout_accuracy = {}", r.heldout_accuracy);
    }
    let omega: Vec<String> = meta.omega.iter().map(usize::to_string).collect();
    let _ = writeln!(text, "omega = {}", omega.join(","));
    text.push_str(&meta.config.echo());
    let path = dir.join("meta");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(Model, CheckpointMeta)> {
    let dir = dir.as_ref();
    let path = dir.join("meta");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut config = TrainConfig::default();
    let (mut iteration, mut views, mut omega) = (0usize, None, Vec::new());
    let mut r = IterationRecord {
        iteration: 0,
        sa_loss: f64::NAN,
        fc_loss: f64::NAN,
        lgcn_loss: f64::NAN,
        labeled_accuracy: f64::NAN,
        heldout_accuracy: f64::NAN,
    };
    let mut has_record = false;
    for (n, line) in text.lines().enumerate() {
        let Some((key, value)) = line.split_once('=') else { continue };
        let (key, value) = (key.trim(), value.trim());
        let bad = |msg: String| Error::parse(&path, n + 1, format!("`{key}`: {msg}"));
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
        match key {
            "iteration" => iteration = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "views" => views = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "omega" => {
                omega = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim().parse::<usize>().map_err(|e| bad(e.to_string())))
                    .collect::<Result<_>>()?
            }
            "sa_loss" => (r.sa_loss, has_record) = (num(value)?, true),
            "fc_loss" => r.fc_loss = num(value)?,
            "lgcn_loss" => r.lgcn_loss = num(value)?,
            "labeled_accuracy" => r.labeled_accuracy = num(value)?,
            "heldout_accuracy" => r.heldout_accuracy = num(value)?,
            _ => config.set(key, value).map_err(bad)?,
        }
    }
    let views = views.ok_or_else(|| Error::parse(&path, 1, "missing `views`"))?;
    let autoencoders = (0..views)
        .map(|v| SparseAutoencoder::load(&dir.join(format!("ae_v{v}"))))
        .collect::<Result<Vec<_>>>()?;
    let model = Model {
        autoencoders,
        fusion: FusionNet::load(&dir.join("fusion"))?,
        gcn: LearnableGcn::load(&dir.join("lgcn"))?,
    };
    r.iteration = iteration;
    Ok((
        model,
        CheckpointMeta {
            config,
            iteration,
            record: has_record.then_some(r),
            omega,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};

    fn small() -> (MultiViewDataset, TrainConfig) {
        let ds = gen_synthetic(&SyntheticConfig {
            samples: 40,
            classes: 2,
            dims: vec![5, 4],
            noise: vec![0.3, 0.6],
            seed: 3,
        })
        .unwrap();
        let cfg = TrainConfig {
            latent_dim: 6,
            hidden_dim: 5,
            k: 4,
            label_ratio: 0.2,
            max_iters: 20,
            ..TrainConfig::default()
        };
        (ds, cfg)
    }

    fn setup(cfg: &TrainConfig, ds: &MultiViewDataset) -> (TrainState, GraphSet, LabelInfo) {
        let graphs = build_graphset(ds, cfg.k, cfg.metric).unwrap();
        let info = split_labels(ds, cfg.label_ratio, cfg.seed).unwrap();
        (TrainState::init(cfg, ds).unwrap(), graphs, info)
    }

    #[test]
    fn one_iteration_moves_every_group() {
        let (ds, cfg) = small();
        let (mut state, graphs, info) = setup(&cfg, &ds);
        let before = state.model.clone();
        state.train_iteration(&ds, &graphs, &info).unwrap();
        let after = &state.model;
        for (a, b) in before.autoencoders.iter().zip(&after.autoencoders) {
            assert_ne!(a.layers, b.layers);
        }
        assert_ne!(before.fusion.layers, after.fusion.layers);
        assert_ne!(before.fusion.shared_h, after.fusion.shared_h);
        assert_ne!(before.gcn.weights, after.gcn.weights);
        assert_ne!(before.gcn.pi, after.gcn.pi);
        assert_ne!(before.gcn.s_bar, after.gcn.s_bar);
        assert_ne!(before.gcn.theta, after.gcn.theta);
    }

    #[test]
    fn steps_touch_only_their_own_group() {
        let (ds, cfg) = small();
        let (mut state, graphs, info) = setup(&cfg, &ds);

        let m0 = state.model.clone();
        state.step_autoencoders(&ds).unwrap();
        assert_ne!(state.model.autoencoders, m0.autoencoders);
        assert_eq!((&state.model.fusion, &state.model.gcn), (&m0.fusion, &m0.gcn));

        let latents = state.model.latents(&ds).unwrap();
        let m1 = state.model.clone();
        state.step_fusion_weights(&latents).unwrap();
        assert_ne!(state.model.fusion.layers, m1.fusion.layers);
        assert_eq!(state.model.fusion.shared_h, m1.fusion.shared_h);
        assert_eq!((&state.model.autoencoders, &state.model.gcn), (&m1.autoencoders, &m1.gcn));

        let m2 = state.model.clone();
        state.step_shared_h(&latents).unwrap();
        assert_ne!(state.model.fusion.shared_h, m2.fusion.shared_h);
        assert_eq!(state.model.fusion.layers, m2.fusion.layers);
        assert_eq!((&state.model.autoencoders, &state.model.gcn), (&m2.autoencoders, &m2.gcn));

        let m3 = state.model.clone();
        state.step_gcn(&graphs, &info).unwrap();
        assert_ne!(state.model.gcn, m3.gcn);
        assert_eq!((&state.model.autoencoders, &state.model.fusion), (&m3.autoencoders, &m3.fusion));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let (ds, cfg) = small();
        let a = fit(&cfg, &ds).unwrap();
        let b = fit(&cfg, &ds).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
        assert_eq!(a.predict().unwrap(), b.predict().unwrap());
    }

    fn frozen(cfg: TrainConfig) -> TrainConfig {
        TrainConfig {
            lr_ae: 0.0,
            lr_other: 0.0,
            ..cfg
        }
    }

    #[test]
    fn zero_rates_change_nothing() {
        let (ds, cfg) = small();
        let cfg = frozen(cfg);
        let (mut state, graphs, info) = setup(&cfg, &ds);
        let before = state.model.clone();
        let r1 = state.train_iteration(&ds, &graphs, &info).unwrap();
        let r2 = state.train_iteration(&ds, &graphs, &info).unwrap();
        assert_eq!(state.model, before);
        assert_eq!((r1.sa_loss, r1.fc_loss, r1.lgcn_loss), (r2.sa_loss, r2.fc_loss, r2.lgcn_loss));
    }

    #[test]
    fn patience_one_with_zero_rates_stops_at_two() {
        let (ds, cfg) = small();
        let cfg = TrainConfig {
            patience: 1,
            ..frozen(cfg)
        };
        let fitted = fit(&cfg, &ds).unwrap();
        assert_eq!(fitted.trace.len(), 2);
        assert_eq!(fitted.best_iteration, 1);
    }

    #[test]
    fn zero_iterations_return_initial_model() {
        let (ds, cfg) = small();
        let cfg = TrainConfig { max_iters: 0, ..cfg };
        let fitted = fit(&cfg, &ds).unwrap();
        assert!(fitted.trace.is_empty());
        assert_eq!(fitted.best_iteration, 0);
        assert_eq!(fitted.model, Model::init(&cfg, &ds).unwrap());
    }

    #[test]
    fn returned_model_has_trace_minimum() {
        let (ds, cfg) = small();
        let fitted = fit(&cfg, &ds).unwrap();
        let best = fitted.best_record().unwrap().lgcn_loss;
        assert_eq!(best, fitted.trace.min_lgcn_loss().unwrap());
        let eval = fitted.model.evaluate(&ds, &fitted.graphs, &fitted.labels).unwrap();
        assert_eq!(eval.lgcn_loss, best);
    }

    #[test]
    fn parameter_storage_is_constant() {
        let (ds, cfg) = small();
        let (mut state, graphs, info) = setup(&cfg, &ds);
        let count = state.model.parameter_count();
        let m = ds.num_samples();
        let views: usize = ds.view_dims().iter().sum();
        // dominated by m² (S̄) plus m·Σn_v-sized terms
        assert!(count < 2 * (m * m + m * views) + 10_000);
        for _ in 0..100 {
            state.train_iteration(&ds, &graphs, &info).unwrap();
            assert_eq!(state.model.parameter_count(), count);
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { patience: 0, ..TrainConfig::default() },
            TrainConfig { lr_ae: -1.0, ..TrainConfig::default() },
            TrainConfig { dropout: 1.0, ..TrainConfig::default() },
            TrainConfig { label_ratio: 0.0, ..TrainConfig::default() },
            TrainConfig { latent_dim: 0, ..TrainConfig::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        let d = TrainConfig::default();
        assert_eq!((d.max_iters, d.lr_ae, d.lr_other, d.weight_decay, d.beta), (500, 0.001, 0.01, 0.01, 1.0));
        assert_eq!((d.dropout, d.patience), (0.3, 50));
    }

    #[test]
    fn non_finite_input_names_the_step() {
        let (mut ds, cfg) = small();
        let (mut state, _, _) = setup(&cfg, &ds);
        ds.views[0].set(0, 0, f64::INFINITY);
        let err = state.step_autoencoders(&ds).unwrap_err().to_string();
        assert!(err.contains("step 1"), "{err}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let (ds, cfg) = small();
        let cfg = TrainConfig { max_iters: 3, ..cfg };
        let fitted = fit(&cfg, &ds).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        fitted.save_checkpoint(tmp.path()).unwrap();
        for sub in ["ae_v0", "ae_v1", "fusion", "lgcn", "meta"] {
            assert!(tmp.path().join(sub).exists(), "{sub}");
        }
        let (model, meta) = load_checkpoint(tmp.path()).unwrap();
        assert_eq!(model, fitted.model);
        assert_eq!(meta.config, cfg);
        assert_eq!(meta.omega, fitted.labels.omega);
        assert_eq!(meta.record, fitted.best_record().copied());
    }

    #[test]
    fn accuracy_counts_hits() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0], &[0, 1, 2]), 2.0 / 3.0);
        assert_eq!(accuracy(&[0], &[0], &[]), 0.0);
    }
}
