//! Train one sparse autoencoder on a synthetic view and watch the mean
//! latent activation approach the sparsity target.
//!
//! ```text
//! cargo run --release --example sparse_autoencoder -- [beta] [steps]
//! ```

use lgcn_ff::data::{gen_synthetic, SyntheticConfig};
use lgcn_ff::ndmath::{OptimConfig, SeededRng};
use lgcn_ff::sparse_ae::{kl_sparsity, mean_activation, SparseAutoencoder, DEFAULT_RHO};

pub struct AeRun {
    pub losses: Vec<f64>,
    pub mean_activation_before: f64,
    pub mean_activation_after: f64,
}

pub fn run(beta: f64, steps: usize) -> lgcn_ff::Result<AeRun> {
    let ds = gen_synthetic(&SyntheticConfig::default())?;
    let x = &ds.views[0];
    let mut rng = SeededRng::from_u64(7);
    let mut ae = SparseAutoencoder::init(x.cols(), 16, DEFAULT_RHO, beta, &mut rng)?;
    let mut optim = ae.optimizer(OptimConfig::adam(0.01, 0.0));
    let average = |ae: &SparseAutoencoder| -> lgcn_ff::Result<f64> {
        let rho_hat = mean_activation(ae.forward(x)?.latent());
        Ok(rho_hat.iter().sum::<f64>() / rho_hat.len() as f64)
    };
    let before = average(&ae)?;
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        losses.push(ae.backward_update(x, &mut optim)?);
    }
    let after = average(&ae)?;
    let rho_hat = mean_activation(ae.forward(x)?.latent());
    println!("beta {beta}: loss {:.2} -> {:.2}", losses[0], losses[steps - 1]);
    println!("mean activation {before:.3} -> {after:.3} (target {DEFAULT_RHO})");
    println!("sparsity penalty now {:.4}", kl_sparsity(DEFAULT_RHO, &rho_hat)?);
    Ok(AeRun {
        losses,
        mean_activation_before: before,
        mean_activation_after: after,
    })
}

fn main() -> lgcn_ff::Result<()> {
    let mut args = std::env::args().skip(1);
    let beta = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    run(beta, steps)?;
    Ok(())
}
