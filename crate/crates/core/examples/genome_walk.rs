//! Build the tree process along the genome with each walk variant and
//! compare how often the tree changes.
//!
//! cargo run --example genome_walk

use argscape::stats::mean_se;
use argscape::walk::{sample_walk_detailed, WalkVariant};
use argscape::RandomSource;

fn main() -> argscape::Result<()> {
    let (n, rho, b, reps) = (6, 1.0, 5.0, 2000);
    for variant in [WalkVariant::Full, WalkVariant::Smc, WalkVariant::SmcPrime, WalkVariant::Macs(3)] {
        let mut splits = Vec::with_capacity(reps);
        let mut changes = Vec::with_capacity(reps);
        for i in 0..reps {
            let mut rng = RandomSource::new(11, 0).derive(i as u64);
            let out = sample_walk_detailed(n, 0.0, b, rho, variant, &mut rng)?;
            splits.push(out.steps.len() as f64);
            changes.push(out.path()?.n_breakpoints() as f64);
        }
        let (s, _) = mean_se(&splits);
        let (c, se) = mean_se(&changes);
        println!("{:>10}: {s:6.2} split points, {c:6.2} +- {se:.2} tree changes on [0, {b}]", variant.to_string());
    }
    Ok(())
}
