//! Sensitivity of accuracy to the sparsity weight β, including the plain
//! autoencoder at β = 0.
//!
//! ```text
//! cargo run --release --example beta_sweep -- [betas, comma separated]
//! ```

use lgcn_ff::data::{gen_synthetic, SyntheticConfig};
use lgcn_ff::eval::{run_beta_sweep, MetricReport};
use lgcn_ff::trainer::TrainConfig;

pub fn run(betas: &[f64], seeds: &[u64]) -> lgcn_ff::Result<Vec<MetricReport>> {
    let dataset = gen_synthetic(&SyntheticConfig::default())?;
    let reports = run_beta_sweep(&TrainConfig::default(), &dataset, betas, seeds, None)?;
    for r in &reports {
        println!("beta {:<6} mean {:.4} std {:.4}", r.config.beta, r.mean, r.std);
    }
    Ok(reports)
}

fn main() -> lgcn_ff::Result<()> {
    env_logger::init();
    let betas: Vec<f64> = match std::env::args().nth(1) {
        Some(list) => list.split(',').filter_map(|s| s.trim().parse().ok()).collect(),
        None => vec![0.0, 0.01, 0.1, 1.0, 10.0],
    };
    run(&betas, &[0, 1, 2, 3, 4])?;
    Ok(())
}
