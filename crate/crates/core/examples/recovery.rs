//! Fits y = 3.14·x1·x2 + x3 with the default engine settings and reports
//! timing and test R². Usage: `cargo run --release --example recovery [seed] [noise] [off]`,
//! where `noise` is Gaussian noise as a fraction of the target's standard deviation
//! and `off` disables simplification.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use symreg::data::{r2, Dataset, Partition};
use symreg::engine::{run, EngineConfig};
use symreg::expr::evaluate;

fn main() -> symreg::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let noise: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..500).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut y: Vec<f64> = (0..500).map(|i| 3.14 * x[0][i] * x[1][i] + x[2][i]).collect();
    if noise > 0.0 {
        let mean = y.iter().sum::<f64>() / 500.0;
        let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 500.0).sqrt();
        for v in &mut y {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += noise * sd * e;
        }
    }
    let data = Dataset::from_columns(x, y)?.split(0.25, 0.0, seed)?;
    let mut config = EngineConfig {
        seed,
        ..EngineConfig::default()
    };
    config.simplify.enabled = std::env::args().nth(3).as_deref() != Some("off");
    let start = Instant::now();
    let result = run(&config, &data)?;
    let (xt, yt) = data.subset(Partition::Test);
    let pred = evaluate(&result.best.tree, &xt)?;
    println!(
        "seed {seed}: {:.1}s, test R2 {:.6}, size {}, complexity {}, simplifications {}",
        start.elapsed().as_secs_f64(),
        r2(&pred, &yt)?,
        result.best.size,
        result.best.complexity,
        result.simplifications.len()
    );
    Ok(())
}
