//! Train the full model and compare the fused graph with its shrinkage-refined
//! version: which edges were weakened, which were cut, and how the view
//! weights moved.

use lgcn_ff::data::{gen_synthetic, SyntheticConfig};
use lgcn_ff::trainer::{fit, TrainConfig};

pub struct Refinement {
    pub fused_edges: usize,
    pub refined_edges: usize,
    pub mean_retained: f64,
    pub view_weights: Vec<f64>,
}

pub fn run(max_iters: usize) -> lgcn_ff::Result<Refinement> {
    let dataset = gen_synthetic(&SyntheticConfig::default())?;
    let config = TrainConfig { max_iters, ..TrainConfig::default() };
    let fitted = fit(&config, &dataset)?;
    let (fused, refined) = fitted.model.gcn.graphs(&fitted.graphs)?;

    let fused_edges = fused.data().iter().filter(|&&a| a != 0.0).count();
    let refined_edges = refined.data().iter().filter(|&&a| a != 0.0).count();
    let ratios: Vec<f64> = fused
        .data()
        .iter()
        .zip(refined.data())
        .filter(|(&a, &r)| a != 0.0 && r != 0.0)
        .map(|(a, r)| r / a)
        .collect();
    let mean_retained = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;

    // edges joining different classes vs the same class
    let labels = &dataset.labels;
    let m = dataset.num_samples();
    let (mut cross, mut within) = ((0.0, 0usize), (0.0, 0usize));
    for i in 0..m {
        for j in 0..m {
            let a = fused.get(i, j);
            if i == j || a == 0.0 {
                continue;
            }
            let bucket = if labels[i] == labels[j] { &mut within } else { &mut cross };
            bucket.0 += refined.get(i, j) / a;
            bucket.1 += 1;
        }
    }
    println!("nonzero entries: fused {fused_edges}, refined {refined_edges}");
    println!("mean retained weight on surviving entries: {mean_retained:.3}");
    if within.1 > 0 {
        println!("same-class edges keep {:.3} of their weight on average", within.0 / within.1 as f64);
    }
    if cross.1 > 0 {
        println!("cross-class edges keep {:.3} of their weight on average", cross.0 / cross.1 as f64);
    }
    println!("view weights {:?}", fitted.model.gcn.pi.data());
    Ok(Refinement {
        fused_edges,
        refined_edges,
        mean_retained,
        view_weights: fitted.model.gcn.pi.data().to_vec(),
    })
}

fn main() -> lgcn_ff::Result<()> {
    let iters = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    run(iters)?;
    Ok(())
}
