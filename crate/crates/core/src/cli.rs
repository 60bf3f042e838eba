//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{gen_synthetic, load_dataset, write_dataset, LabelInfo, LoadOptions, MultiViewDataset, SyntheticConfig};
use crate::error::{Error, Result};
use crate::eval::{beta_csv, run_ablation, run_beta_sweep, run_gradcheck, summary_csv, MetricReport, Mutation, RunResult};
use crate::graph::{build_graphset, GraphSet, Metric};
use crate::lgcn::Variant;
use crate::ndmath::io::write_matrix;
use crate::trainer::{fit, load_checkpoint, Fitted, Model, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "lgcn-ff", version, about = "Multi-view semi-supervised classification with a learnable GCN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic multi-view dataset to a directory.
    GenSynth(GenSynthArgs),
    /// Train one model per seed and write checkpoints and reports.
    Train(TrainArgs),
    /// Score a checkpoint on its dataset.
    Evaluate(CheckpointArgs),
    /// Train WGCN_FF, AWGCN_FF and LGCN_FF on every seed.
    Ablate(ExperimentArgs),
    /// Train the configured variant for every sparsity weight.
    BetaSweep(BetaSweepArgs),
    /// Finite-difference check of every gradient path.
    Gradcheck(GradcheckArgs),
    /// Dump the fused and refined graphs of a checkpoint.
    ExportGraph(CheckpointArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Dataset manifest file.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Use the built-in synthetic dataset.
    #[arg(long)]
    synth: bool,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[command(flatten)]
    source: Source,
    /// Skip per-column standardization of manifest views.
    #[arg(long)]
    no_standardize: bool,
}

impl DataArgs {
    fn load(&self) -> Result<MultiViewDataset> {
        match &self.source.manifest {
            Some(path) => load_dataset(
                path,
                LoadOptions {
                    standardize: !self.no_standardize,
                },
            ),
            None => gen_synthetic(&SyntheticConfig::default()),
        }
    }

    fn is_synthetic(&self) -> bool {
        self.source.synth
    }
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Fraction of samples whose labels are visible.
    #[arg(long, default_value_t = 0.1)]
    label_ratio: f64,
    /// Neighbors per node in the KNN graphs.
    #[arg(long, default_value_t = crate::graph::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = Metric::Euclidean)]
    metric: Metric,
    /// Sparsity penalty weight.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Latent width (default 64 for --synth, 512 otherwise).
    #[arg(long)]
    latent_dim: Option<usize>,
    /// GCN hidden width (default 64 for --synth, 128 otherwise).
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = Variant::LgcnFf)]
    variant: Variant,
    /// Mean of the initial raw edge coefficients.
    #[arg(long, default_value_t = crate::lgcn::S_BAR_INIT_MEAN, allow_hyphen_values = true)]
    s_bar_mean: f64,
}

impl ModelArgs {
    fn config(&self, synthetic: bool) -> TrainConfig {
        let base = if synthetic {
            TrainConfig::default()
        } else {
            TrainConfig::for_real_data()
        };
        TrainConfig {
            label_ratio: self.label_ratio,
            k: self.k,
            metric: self.metric,
            beta: self.beta,
            latent_dim: self.latent_dim.unwrap_or(base.latent_dim),
            hidden_dim: self.hidden_dim.unwrap_or(base.hidden_dim),
            max_iters: self.max_iters,
            patience: self.patience,
            variant: self.variant,
            s_bar_init_mean: self.s_bar_mean,
            ..base
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated run seeds.
    #[arg(long, default_value = "0,1,2,3,4", value_parser = parse_list::<u64>)]
    seeds: std::vec::Vec<u64>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Also write the fused and refined graphs.
    #[arg(long)]
    export_graph: bool,
    /// Also write the class-probability embedding and shared representation.
    #[arg(long)]
    export_embedding: bool,
}

#[derive(Debug, Args)]
struct BetaSweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Comma-separated sparsity weights.
    #[arg(long, default_value = "0,0.001,0.01,0.1,1,10", value_parser = parse_list::<f64>)]
    betas: std::vec::Vec<f64>,
}

#[derive(Debug, Args)]
struct GenSynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    samples: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CheckpointArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inject a known bug; the check is expected to fail.
    #[arg(long)]
    drop_kl_path: bool,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn export_graphs(model: &Model, graphs: &GraphSet, dir: &Path) -> Result<()> {
    let (fused, refined) = model.gcn.graphs(graphs)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(dir.join("fused_graph.txt"), &fused)?;
    write_matrix(dir.join("refined_graph.txt"), &refined)
}

fn write_reports(out: Option<&Path>, reports: &[MetricReport], extra: Option<(&str, String)>) -> Result<()> {
    let text: String = reports.iter().map(|r| r.to_text() + "\n").collect();
    print!("{text}");
    if let Some(dir) = out {
        write_file(&dir.join("report.txt"), &text)?;
        write_file(&dir.join("summary.csv"), &summary_csv(reports))?;
        if let Some((name, body)) = extra {
            write_file(&dir.join(name), &body)?;
        }
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let exp = &args.exp;
    let dataset = exp.data.load()?;
    let base = exp.model.config(exp.data.is_synthetic());
    let mut runs = Vec::new();
    for &seed in &exp.seeds {
        let config = TrainConfig { seed, ..base.clone() };
        let fitted = fit(&config, &dataset)?;
        let result = run_result(&fitted, &dataset)?;
        println!(
            "{} seed {seed}: accuracy {} ({} iterations, best {})",
            config.variant,
            result.accuracy,
            fitted.trace.len(),
            fitted.best_iteration
        );
        if let Some(out) = &exp.out {
            let dir = out.join(format!("seed{seed}"));
            fitted.save_checkpoint(dir.join("checkpoint"))?;
            write_file(&dir.join("trace.csv"), &fitted.trace.to_csv())?;
            if args.export_graph {
                export_graphs(&fitted.model, &fitted.graphs, &dir)?;
            }
            if args.export_embedding {
                write_matrix(dir.join("embedding.txt"), &fitted.model.embedding(&fitted.graphs)?)?;
                write_matrix(dir.join("shared_h.txt"), &fitted.model.fusion.shared_h)?;
            }
        }
        runs.push(result);
    }
    let report = MetricReport::new(base.variant.to_string(), runs, TrainConfig { seed: exp.seeds[0], ..base })?;
    write_reports(exp.out.as_deref(), &[report], None)
}

fn run_result(fitted: &Fitted, dataset: &MultiViewDataset) -> Result<RunResult> {
    Ok(RunResult {
        variant: fitted.config.variant,
        seed: fitted.config.seed,
        beta: fitted.config.beta,
        accuracy: fitted.heldout_accuracy(dataset)?,
        iters: fitted.trace.len(),
        seconds: fitted.seconds,
    })
}

fn load_for_checkpoint(args: &CheckpointArgs) -> Result<(MultiViewDataset, Model, LabelInfo, GraphSet)> {
    let dataset = args.data.load()?;
    let (model, meta) = load_checkpoint(&args.checkpoint)?;
    let graphs = build_graphset(&dataset, meta.config.k, meta.config.metric)?;
    if model.fusion.shared_h.rows() != dataset.num_samples() {
        return Err(Error::config(format!(
            "checkpoint {} was trained on {} samples, dataset has {}",
            args.checkpoint.display(),
            model.fusion.shared_h.rows(),
            dataset.num_samples()
        )));
    }
    let info = LabelInfo::from_indices(&dataset, meta.omega, meta.config.label_ratio)?;
    Ok((dataset, model, info, graphs))
}

fn evaluate(args: &CheckpointArgs) -> Result<()> {
    let (dataset, model, info, graphs) = load_for_checkpoint(args)?;
    let eval = model.evaluate(&dataset, &graphs, &info)?;
    let text = format!(
        "checkpoint = {}\naccuracy = {}\nlabeled_accuracy = {}\nlgcn_loss = {}\n",
        args.checkpoint.display(),
        eval.heldout_accuracy,
        eval.labeled_accuracy,
        eval.lgcn_loss
    );
    print!("{text}");
    if let Some(out) = &args.out {
        write_file(&out.join("evaluation.txt"), &text)?;
    }
    Ok(())
}

fn export_graph(args: &CheckpointArgs) -> Result<()> {
    let (_, model, _, graphs) = load_for_checkpoint(args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    export_graphs(&model, &graphs, &out)?;
    println!("graphs written to {}", out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenSynth(a) => {
            let ds = gen_synthetic(&SyntheticConfig {
                samples: a.samples,
                classes: a.classes,
                seed: a.seed,
                ..SyntheticConfig::default()
            })?;
            let manifest = write_dataset(&ds, &a.out)?;
            println!("manifest = {}", manifest.display());
        }
        Command::Train(a) => train(&a)?,
        Command::Evaluate(a) => evaluate(&a)?,
        Command::ExportGraph(a) => export_graph(&a)?,
        Command::Ablate(a) => {
            let dataset = a.data.load()?;
            let config = a.model.config(a.data.is_synthetic());
            let reports = run_ablation(&config, &dataset, &a.seeds, None)?;
            write_reports(a.out.as_deref(), &reports, None)?;
        }
        Command::BetaSweep(a) => {
            let exp = &a.exp;
            let dataset = exp.data.load()?;
            let config = exp.model.config(exp.data.is_synthetic());
            let reports = run_beta_sweep(&config, &dataset, &a.betas, &exp.seeds, None)?;
            write_reports(exp.out.as_deref(), &reports, Some(("beta.csv", beta_csv(&reports))))?;
        }
        Command::Gradcheck(a) => {
            let mutation = a.drop_kl_path.then_some(Mutation::DropKlPath);
            let table = run_gradcheck(a.seed, mutation);
            print!("{table}");
            return Ok(table.passed());
        }
    }
    Ok(true)
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("error: gradient check failed");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
