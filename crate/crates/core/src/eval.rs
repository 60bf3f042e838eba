//! Multi-seed experiments (variant ablation, β sweep), the gradient-check
//! harness and the report formats they emit.

use std::fmt::{self, Write as _};
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{split_labels, LabelInfo, MultiViewDataset};
use crate::dense::LayerGrad;
use crate::error::{Error, Result};
use crate::fusion::{fusion_loss, FusionNet};
use crate::graph::{build_graphset, GraphSet, Metric};
use crate::lgcn::{masked_cross_entropy, GcnDims, LearnableGcn};
use crate::ndmath::{finite_diff_check, Matrix, SeededRng};
use crate::sparse_ae::{SparseAutoencoder, DEFAULT_RHO};
use crate::trainer::{fit_with, Fitted, TrainConfig};

pub use crate::lgcn::Variant as AblationVariant;

/// Header of every `summary.csv`.
pub const SUMMARY_HEADER: &str = "variant,seed,accuracy,iters,seconds";

/// One training run inside an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: AblationVariant,
    pub seed: u64,
    pub beta: f64,
    /// Accuracy over the samples outside the labeled set.
    pub accuracy: f64,
    /// Iterations actually run.
    pub iters: usize,
    pub seconds: f64,
}

impl RunResult {
    fn from_fit(fitted: &Fitted, dataset: &MultiViewDataset) -> Result<Self> {
        Ok(Self {
            variant: fitted.config.variant,
            seed: fitted.config.seed,
            beta: fitted.config.beta,
            accuracy: fitted.heldout_accuracy(dataset)?,
            iters: fitted.trace.len(),
            seconds: fitted.seconds,
        })
    }
}

/// Mean and spread of one configuration over several seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub name: String,
    pub runs: Vec<RunResult>,
    pub mean: f64,
    /// Population standard deviation; 0 for a single seed.
    pub std: f64,
    /// Configuration shared by every run (seed, variant and β as for the first run).
    pub config: TrainConfig,
    pub seconds: f64,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, runs: Vec<RunResult>, config: TrainConfig) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::config("a report needs at least one run"));
        }
        let n = runs.len() as f64;
        let mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            name: name.into(),
            seconds: runs.iter().map(|r| r.seconds).sum(),
            mean,
            std: var.sqrt(),
            runs,
            config,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    /// `key = value` block.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "report = {}", self.name);
        let seeds: Vec<String> = self.seeds().iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        for r in &self.runs {
            let _ = writeln!(s, "accuracy.seed{} = {}", r.seed, r.accuracy);
        }
        let _ = writeln!(s, "mean = {}", self.mean);
        let _ = writeln!(s, "std = {}", self.std);
        let _ = writeln!(s, "seconds = {}", self.seconds);
        for line in self.config.echo().lines() {
            let _ = writeln!(s, "config.{line}");
        }
        s
    }
}

/// `summary.csv` body: one row per (variant, seed).
pub fn summary_csv(reports: &[MetricReport]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in reports.iter().flat_map(|rep| &rep.runs) {
        let _ = writeln!(s, "{},{},{},{},{}", r.variant, r.seed, r.accuracy, r.iters, r.seconds);
    }
    s
}

/// `beta,seed,accuracy,iters,seconds` rows for a β sweep.
pub fn beta_csv(reports: &[MetricReport]) -> String {
    let mut s = String::from("beta,seed,accuracy,iters,seconds\n");
    for r in reports.iter().flat_map(|rep| &rep.runs) {
        let _ = writeln!(s, "{},{},{},{},{}", r.beta, r.seed, r.accuracy, r.iters, r.seconds);
    }
    s
}

/// Callback receiving every fitted model, e.g. to write checkpoints.
pub type FitHook<'a> = &'a (dyn Fn(&Fitted) -> Result<()> + Sync);

fn run_grid(
    base: &TrainConfig,
    dataset: &MultiViewDataset,
    graphs: &GraphSet,
    seeds: &[u64],
    configs: &[TrainConfig],
    hook: Option<FitHook<'_>>,
) -> Result<Vec<Vec<RunResult>>> {
    if seeds.is_empty() {
        return Err(Error::config("need at least one seed"));
    }
    // splits depend on the seed only, so every config sees the same labels
    let splits: Vec<LabelInfo> = seeds
        .iter()
        .map(|&s| split_labels(dataset, base.label_ratio, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|c| (0..seeds.len()).map(move |s| (c, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(c, s)| {
            let config = TrainConfig {
                seed: seeds[s],
                ..configs[c].clone()
            };
            let fitted = fit_with(&config, dataset, graphs.clone(), splits[s].clone())?;
            log::info!(
                "{} seed {} beta {}: iters {}",
                config.variant,
                config.seed,
                config.beta,
                fitted.trace.len()
            );
            if let Some(hook) = hook {
                hook(&fitted)?;
            }
            RunResult::from_fit(&fitted, dataset)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grouped = vec![Vec::with_capacity(seeds.len()); configs.len()];
    for (&(c, _), r) in jobs.iter().zip(results) {
        grouped[c].push(r);
    }
    Ok(grouped)
}

/// Trains all three variants on every seed, with one shared label split per
/// seed, and reports each variant's accuracy.
pub fn run_ablation(
    config: &TrainConfig,
    dataset: &MultiViewDataset,
    seeds: &[u64],
    hook: Option<FitHook<'_>>,
) -> Result<Vec<MetricReport>> {
    config.validate()?;
    let start = Instant::now();
    let graphs = build_graphset(dataset, config.k, config.metric)?;
    let configs: Vec<TrainConfig> = AblationVariant::ALL
        .iter()
        .map(|&variant| TrainConfig {
            variant,
            ..config.clone()
        })
        .collect();
    let grouped = run_grid(config, dataset, &graphs, seeds, &configs, hook)?;
    log::info!("ablation finished in {:.1}s", start.elapsed().as_secs_f64());
    configs
        .into_iter()
        .zip(grouped)
        .map(|(c, runs)| MetricReport::new(c.variant.to_string(), runs, TrainConfig { seed: seeds[0], ..c }))
        .collect()
}

/// One report per β, all sharing the per-seed label splits.
pub fn run_beta_sweep(
    config: &TrainConfig,
    dataset: &MultiViewDataset,
    betas: &[f64],
    seeds: &[u64],
    hook: Option<FitHook<'_>>,
) -> Result<Vec<MetricReport>> {
    config.validate()?;
    if betas.is_empty() {
        return Err(Error::config("need at least one beta"));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::config(format!("beta {b} must be >= 0")));
    }
    let graphs = build_graphset(dataset, config.k, config.metric)?;
    let configs: Vec<TrainConfig> = betas
        .iter()
        .map(|&beta| TrainConfig {
            beta,
            ..config.clone()
        })
        .collect();
    let grouped = run_grid(config, dataset, &graphs, seeds, &configs, hook)?;
    configs
        .into_iter()
        .zip(grouped)
        .map(|(c, runs)| MetricReport::new(format!("beta={}", c.beta), runs, TrainConfig { seed: seeds[0], ..c }))
        .collect()
}

/// Deliberate bugs for exercising the gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Autoencoder gradients computed without the sparsity term.
    DropKlPath,
}

/// Tolerance on the max relative error.
pub const GRADCHECK_TOL: f64 = 1e-5;
pub const GRADCHECK_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub group: &'static str,
    pub max_rel_error: f64,
}

impl GradcheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckTable {
    pub seed: u64,
    pub rows: Vec<GradcheckRow>,
}

impl GradcheckTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GradcheckRow::passed)
    }

    pub fn row(&self, group: &str) -> Option<&GradcheckRow> {
        self.rows.iter().find(|r| r.group == group)
    }
}

impl fmt::Display for GradcheckTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>14}  result", "group", "max_rel_error")?;
        for r in &self.rows {
            let verdict = if r.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "{:<12} {:>14.3e}  {verdict}", r.group, r.max_rel_error)?;
        }
        Ok(())
    }
}

/// Max of two errors where NaN counts as failing.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

fn check_stack<F>(layers: &[crate::dense::DenseLayer], grads: &[LayerGrad], loss: F) -> Result<(f64, f64)>
where
    F: Fn(&[crate::dense::DenseLayer]) -> f64,
{
    let (mut w_err, mut b_err) = (0.0f64, 0.0f64);
    for l in 0..layers.len() {
        let e = finite_diff_check(
            |w| {
                let mut ls = layers.to_vec();
                ls[l].weight = w.clone();
                loss(&ls)
            },
            &grads[l].weight,
            &layers[l].weight,
            GRADCHECK_STEP,
        )?;
        w_err = worst(w_err, e);
        let e = finite_diff_check(
            |b| {
                let mut ls = layers.to_vec();
                ls[l].bias = b.clone();
                loss(&ls)
            },
            &grads[l].bias,
            &layers[l].bias,
            GRADCHECK_STEP,
        )?;
        b_err = worst(b_err, e);
    }
    Ok((w_err, b_err))
}

/// Central-difference check of every gradient path on a seeded tiny
/// instance (m = 5, V = 2, view widths 4 and 3, latent width 3, 2 classes,
/// no dropout). Errors inside the check are reported as failing rows.
pub fn run_gradcheck(seed: u64, mutation: Option<Mutation>) -> GradcheckTable {
    match gradcheck_rows(seed, mutation) {
        Ok(rows) => GradcheckTable { seed, rows },
        Err(e) => {
            log::error!("gradient check aborted: {e}");
            GradcheckTable {
                seed,
                rows: vec![GradcheckRow {
                    group: "setup",
                    max_rel_error: f64::INFINITY,
                }],
            }
        }
    }
}

fn gradcheck_rows(seed: u64, mutation: Option<Mutation>) -> Result<Vec<GradcheckRow>> {
    let root = SeededRng::from_u64(seed);
    let mut rng = root.fork(1);
    let (m, d, c) = (5, 3, 2);
    let views = vec![rng.normal_matrix(m, 4, 0.0, 1.0), rng.normal_matrix(m, 3, 0.0, 1.0)];
    let labels = vec![0, 1, 0, 1, 1];
    let dataset = MultiViewDataset::new("gradcheck", views, labels, c)?;
    let info = LabelInfo::from_indices(&dataset, vec![0, 1, 4], 0.6)?;
    let mut rows = Vec::new();

    // autoencoders, sparsity term included
    let (mut ae_w, mut ae_b) = (0.0f64, 0.0f64);
    let mut latents = Vec::new();
    for (v, x) in dataset.views.iter().enumerate() {
        let mut r = root.fork(10 + v as u64);
        let mut ae = SparseAutoencoder::init(x.cols(), d, DEFAULT_RHO, 1.0, &mut r)?;
        for layer in &mut ae.layers {
            layer.bias = r.normal_matrix(1, layer.out_dim(), 0.0, 0.5);
        }
        let analytic = match mutation {
            Some(Mutation::DropKlPath) => SparseAutoencoder { beta: 0.0, ..ae.clone() }.gradients(x)?.1,
            None => ae.gradients(x)?.1,
        };
        let (we, be) = check_stack(&ae.layers, &analytic.layers, |ls| {
            SparseAutoencoder { layers: ls.to_vec(), ..ae.clone() }.loss(x).unwrap_or(f64::NAN)
        })?;
        ae_w = worst(ae_w, we);
        ae_b = worst(ae_b, be);
        latents.push(ae.forward(x)?.into_latent());
    }
    rows.push(GradcheckRow { group: "ae_weights", max_rel_error: ae_w });
    rows.push(GradcheckRow { group: "ae_biases", max_rel_error: ae_b });

    // fusion network and shared representation
    let mut r = root.fork(20);
    let mut fusion = FusionNet::init(m, d, &mut r);
    fusion.shared_h = r.normal_matrix(m, d, 0.0, 1.0);
    for layer in &mut fusion.layers {
        layer.bias = r.normal_matrix(1, d, 0.0, 0.5);
    }
    let (_, fc_grads, h_grad) = fusion.gradients(&latents)?;
    let fc_loss = |net: &FusionNet| {
        net.forward()
            .and_then(|f| fusion_loss(f.output(), &latents))
            .unwrap_or(f64::NAN)
    };
    let (fw, fb) = check_stack(&fusion.layers, &fc_grads, |ls| {
        fc_loss(&FusionNet {
            layers: ls.to_vec(),
            shared_h: fusion.shared_h.clone(),
        })
    })?;
    let he = finite_diff_check(
        |h| {
            fc_loss(&FusionNet {
                layers: fusion.layers.clone(),
                shared_h: h.clone(),
            })
        },
        &h_grad,
        &fusion.shared_h,
        GRADCHECK_STEP,
    )?;
    rows.push(GradcheckRow { group: "fc_weights", max_rel_error: fw });
    rows.push(GradcheckRow { group: "fc_biases", max_rel_error: fb });
    rows.push(GradcheckRow { group: "h", max_rel_error: he });

    // learnable GCN on KNN graphs of the two views
    let graphs = build_graphset(&dataset, 2, Metric::Euclidean)?;
    let mut r = root.fork(30);
    let dims = GcnDims {
        samples: m,
        views: 2,
        input_dim: d,
        hidden_dim: 4,
        num_classes: c,
    };
    let mut gcn = LearnableGcn::init(dims, AblationVariant::LgcnFf, 0.0, &mut r)?;
    gcn.dropout_rate = 0.0;
    // spread coefficients and thresholds so both live and dead gates occur
    gcn.s_bar = r.normal_matrix(m, m, 0.5, 1.0);
    gcn.theta = r.normal_matrix(1, m, -0.3, 0.5);
    gcn.pi = Matrix::row_vector(vec![0.4, 0.6]);
    let h = &fusion.shared_h;
    let fwd = gcn.forward(&graphs, h, None)?;
    let grads = gcn.backward(&graphs, &fwd, &info)?;
    let gcn_loss = |g: &LearnableGcn| {
        g.forward(&graphs, h, None)
            .and_then(|f| masked_cross_entropy(&f.z, &info))
            .unwrap_or(f64::NAN)
    };
    type Setter = fn(&mut LearnableGcn, &Matrix);
    let check = |set: Setter, analytic: &Matrix, at: &Matrix| {
        finite_diff_check(
            |p| {
                let mut g = gcn.clone();
                set(&mut g, p);
                gcn_loss(&g)
            },
            analytic,
            at,
            GRADCHECK_STEP,
        )
    };
    let pi = check(|g, p| g.pi = p.clone(), &grads.pi, &gcn.pi)?;
    let s_bar = check(|g, p| g.s_bar = p.clone(), &grads.s_bar, &gcn.s_bar)?;
    let theta = check(|g, p| g.theta = p.clone(), &grads.theta, &gcn.theta)?;
    let w1 = check(|g, p| g.weights[0] = p.clone(), &grads.weights[0], &gcn.weights[0])?;
    let w2 = check(|g, p| g.weights[1] = p.clone(), &grads.weights[1], &gcn.weights[1])?;
    rows.push(GradcheckRow { group: "pi", max_rel_error: pi });
    rows.push(GradcheckRow { group: "s_bar", max_rel_error: s_bar });
    rows.push(GradcheckRow { group: "theta", max_rel_error: theta });
    rows.push(GradcheckRow { group: "gcn_weights", max_rel_error: worst(w1, w2) });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};

    #[test]
    fn gradcheck_passes_for_several_seeds() {
        for seed in 0..4 {
            let table = run_gradcheck(seed, None);
            assert!(table.passed(), "seed {seed}\n{table}");
            assert_eq!(table.rows.len(), 9);
        }
    }

    #[test]
    fn dropping_the_kl_path_fails_only_the_autoencoder() {
        let table = run_gradcheck(0, Some(Mutation::DropKlPath));
        assert!(!table.row("ae_weights").unwrap().passed(), "{table}");
        assert!(!table.row("ae_biases").unwrap().passed(), "{table}");
        for r in table.rows.iter().filter(|r| !r.group.starts_with("ae_")) {
            assert!(r.passed(), "{table}");
        }
    }

    #[test]
    fn gradcheck_is_deterministic() {
        assert_eq!(run_gradcheck(3, None), run_gradcheck(3, None));
    }

    fn tiny() -> (MultiViewDataset, TrainConfig) {
        let ds = gen_synthetic(&SyntheticConfig {
            samples: 30,
            classes: 3,
            dims: vec![4, 3],
            noise: vec![0.3, 0.5],
            seed: 1,
        })
        .unwrap();
        let cfg = TrainConfig {
            latent_dim: 5,
            hidden_dim: 4,
            k: 3,
            label_ratio: 0.2,
            max_iters: 8,
            ..TrainConfig::default()
        };
        (ds, cfg)
    }

    #[test]
    fn single_seed_has_zero_std() {
        let (ds, cfg) = tiny();
        let reports = run_ablation(&cfg, &ds, &[4], None).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert_eq!(r.std, 0.0);
            assert_eq!(r.seeds(), vec![4]);
            assert!((0.0..=1.0).contains(&r.mean));
        }
    }

    #[test]
    fn wgcn_keeps_uniform_view_weights() {
        let (ds, cfg) = tiny();
        let hook = |f: &Fitted| {
            if f.config.variant == AblationVariant::WgcnFf {
                assert!(f.model.gcn.pi.data().iter().all(|&p| p == 0.5));
            }
            Ok(())
        };
        run_ablation(&cfg, &ds, &[0, 1], Some(&hook)).unwrap();
    }

    #[test]
    fn ablation_is_reproducible() {
        let (ds, cfg) = tiny();
        let a = run_ablation(&cfg, &ds, &[0, 1], None).unwrap();
        let b = run_ablation(&cfg, &ds, &[0, 1], None).unwrap();
        let acc = |rs: &[MetricReport]| rs.iter().flat_map(|r| r.runs.iter().map(|x| x.accuracy)).collect::<Vec<_>>();
        assert_eq!(acc(&a), acc(&b));
    }

    #[test]
    fn beta_sweep_accepts_zero_and_echoes_beta() {
        let (ds, cfg) = tiny();
        let reports = run_beta_sweep(&cfg, &ds, &[0.0, 1.0], &[0], None).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].config.beta, 0.0);
        assert!(reports[0].to_text().contains("config.beta = 0\n"));
        assert!(reports[1].to_text().contains("config.beta = 1\n"));
        assert!(run_beta_sweep(&cfg, &ds, &[-1.0], &[0], None).is_err());
        assert!(beta_csv(&reports).starts_with("beta,seed,accuracy,iters,seconds\n0,0,"));
    }

    #[test]
    fn report_formats() {
        let run = |seed, accuracy| RunResult {
            variant: AblationVariant::AwgcnFf,
            seed,
            beta: 1.0,
            accuracy,
            iters: 10,
            seconds: 0.5,
        };
        let rep = MetricReport::new("AWGCN_FF", vec![run(0, 0.5), run(1, 1.0)], TrainConfig::default()).unwrap();
        assert_eq!(rep.mean, 0.75);
        assert_eq!(rep.std, 0.25);
        let text = rep.to_text();
        assert!(text.starts_with("report = AWGCN_FF\nseeds = 0,1\naccuracy.seed0 = 0.5\n"));
        assert_eq!(
            summary_csv(&[rep]),
            "variant,seed,accuracy,iters,seconds\nAWGCN_FF,0,0.5,10,0.5\nAWGCN_FF,1,1,10,0.5\n"
        );
        assert!(MetricReport::new("x", vec![], TrainConfig::default()).is_err());
    }
}
