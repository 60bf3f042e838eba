//! Compare uniform graph averaging, learned view weights, and learned view
//! weights plus shrinkage on the synthetic dataset, with shared label splits
//! per seed.
//!
//! ```text
//! cargo run --release --example ablation -- [max_iters] [seeds...]
//! ```

use lgcn_ff::data::{gen_synthetic, SyntheticConfig};
use lgcn_ff::eval::{run_ablation, summary_csv, MetricReport};
use lgcn_ff::trainer::TrainConfig;

pub fn run(max_iters: usize, seeds: &[u64]) -> lgcn_ff::Result<Vec<MetricReport>> {
    let dataset = gen_synthetic(&SyntheticConfig::default())?;
    let config = TrainConfig { max_iters, ..TrainConfig::default() };
    let reports = run_ablation(&config, &dataset, seeds, None)?;
    for r in &reports {
        println!("{:<9} mean {:.4} std {:.4}", r.name, r.mean, r.std);
    }
    print!("{}", summary_csv(&reports));
    Ok(reports)
}

fn main() -> lgcn_ff::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let iters = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let mut seeds: Vec<u64> = args.filter_map(|s| s.parse().ok()).collect();
    if seeds.is_empty() {
        seeds = (0..5).collect();
    }
    run(iters, &seeds)?;
    Ok(())
}
