//! Write a dataset to disk, train on it through its manifest, checkpoint the
//! best model and reload it.

use std::path::Path;

use lgcn_ff::data::{gen_synthetic, load_dataset, write_dataset, LabelInfo, LoadOptions, SyntheticConfig};
use lgcn_ff::graph::build_graphset;
use lgcn_ff::trainer::{fit, load_checkpoint, TrainConfig};

/// Returns the accuracy before saving and after reloading.
pub fn run(dir: &Path, max_iters: usize) -> lgcn_ff::Result<(f64, f64)> {
    let synthetic = gen_synthetic(&SyntheticConfig { samples: 120, ..SyntheticConfig::default() })?;
    let manifest = write_dataset(&synthetic, dir.join("data"))?;
    let dataset = load_dataset(&manifest, LoadOptions::default())?;

    let config = TrainConfig { max_iters, ..TrainConfig::default() };
    let fitted = fit(&config, &dataset)?;
    let before = fitted.heldout_accuracy(&dataset)?;
    let ckpt = fitted.save_checkpoint(dir.join("checkpoint"))?;

    let (model, meta) = load_checkpoint(&ckpt)?;
    let graphs = build_graphset(&dataset, meta.config.k, meta.config.metric)?;
    let info = LabelInfo::from_indices(&dataset, meta.omega, meta.config.label_ratio)?;
    let after = model.evaluate(&dataset, &graphs, &info)?.heldout_accuracy;
    println!("best iteration {}: accuracy {before:.4} before saving, {after:.4} after reload", meta.iteration);
    Ok((before, after))
}

fn main() -> lgcn_ff::Result<()> {
    let dir = std::env::temp_dir().join("lgcn-ff-checkpoint-example");
    run(&dir, 200)?;
    println!("files under {}", dir.display());
    Ok(())
}
