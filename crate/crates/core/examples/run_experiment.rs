//! Run a verification experiment from code at reduced size and print its
//! report as CSV.
//!
//! cargo run --release --example run_experiment -- [name] [replicates]

use argscape::experiment::{registry, run_experiment, ExperimentConfig};

fn main() -> argscape::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "verify-cross-pair".to_string());
    let mut config = ExperimentConfig::new(&name);
    config.replicates = Some(args.next().and_then(|s| s.parse().ok()).unwrap_or(5_000));
    if name == "verify-cross-pair" {
        config.set_param_str("rho_v", "0,1,5")?;
    }
    let report = run_experiment(&config)?;
    print!("{}", report.to_csv());
    println!("passed: {}", report.passed());
    println!("other experiments: {}", registry().iter().map(|e| e.name).collect::<Vec<_>>().join(", "));
    Ok(())
}
