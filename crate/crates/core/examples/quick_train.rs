//! Trains one variant on the lava crossing and prints its learning curve.
//!
//! Usage: `cargo run --release --example quick_train -- [VARIANT] [SEED] [STEPS]`

use std::time::Instant;

use eppo_core::envs::EnvSpec;
use eppo_core::trainer::{train, AlgoConfig, Variant};

fn main() -> eppo_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let variant: Variant = args.get(1).map_or("EPPO", String::as_str).parse()?;
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let steps = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let mut cfg = AlgoConfig::new(variant, EnvSpec::dist_shift(), seed);
    cfg.hyperparams.total_env_steps = steps;
    let start = Instant::now();
    let record = train(&cfg)?;
    for row in &record.rows {
        println!(
            "{:>7} return {:.3} entropy {:.3} kl {:.4} mu {:.3} ad {:?}",
            row.env_steps, row.mean_return, row.entropy, row.mean_kl, row.mu, row.action_disagreement
        );
    }
    println!("{variant} seed {seed}: {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
