//! Central-difference check of every hand-written gradient, then the same
//! check with the autoencoder's sparsity term deliberately left out of the
//! analytic gradient.
//!
//! ```text
//! cargo run --release --example gradient_check -- [seed]
//! ```

use lgcn_ff::eval::{run_gradcheck, GradcheckTable, Mutation};

pub fn run(seed: u64) -> (GradcheckTable, GradcheckTable) {
    (run_gradcheck(seed, None), run_gradcheck(seed, Some(Mutation::DropKlPath)))
}

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (clean, mutated) = run(seed);
    println!("seed {seed}, correct gradients:\n{clean}");
    println!("sparsity term dropped from the analytic gradient:\n{mutated}");
    if !clean.passed() {
        std::process::exit(1);
    }
}
