//! Command-line front end: `argscape <subcommand> [--key value]...`.
//!
//! Subcommands are the experiment names from [`experiment::registry`],
//! `simulate arg|walk` and `list`. Exit codes: 0 all checks pass, 1 a check
//! failed or a run hit a resource limit, 2 unknown experiment, 3 invalid
//! parameters, 4 I/O failure.

use std::path::PathBuf;

use clap::Parser;

use crate::error::Error;
use crate::experiment::{self, ExperimentConfig, SimulateKind, SimulateParams, DEFAULT_SEED};

pub const SEED_ENV: &str = "ARGSCAPE_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "argscape",
    version,
    about = "Simulate ARGs and genome walks, and run Monte Carlo verification experiments",
    after_help = "Run `argscape list` for the experiments and their parameters.\n\
                  Common keys: --seed, --replicates, --workers, --out, --raw, --config <file.json>.\n\
                  ARGSCAPE_SEED overrides the seed from a config file."
)]
struct Cli {
    /// Experiment name, `simulate` or `list`.
    command: Option<String>,

    /// JSON experiment configuration; later `--key value` pairs override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// `--key value` pairs (and `arg|walk` after `simulate`).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    rest: Vec<String>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownExperiment(_) => 2,
        Error::Io(_) => 4,
        Error::ResourceLimit(_) => 1,
        _ => 3,
    }
}

/// Splits `--key value`, `--key=value` and bare `--flag` into pairs.
fn key_values(rest: &[String]) -> Result<Vec<(String, Option<String>)>, Error> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        let Some(key) = rest[i].strip_prefix("--") else {
            return Err(Error::invalid(format!("expected `--key`, got `{}`", rest[i])));
        };
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.replace('-', "_"), Some(v.to_string())));
            i += 1;
        } else if i + 1 < rest.len() && !rest[i + 1].starts_with("--") {
            out.push((key.replace('-', "_"), Some(rest[i + 1].clone())));
            i += 2;
        } else {
            out.push((key.replace('-', "_"), None));
            i += 1;
        }
    }
    Ok(out)
}

fn need(key: &str, v: Option<String>) -> Result<String, Error> {
    v.ok_or_else(|| Error::invalid(format!("`--{key}` needs a value")))
}

fn parse_seed(s: &str) -> Result<u64, Error> {
    s.trim().parse().map_err(|_| Error::invalid(format!("seed `{s}` is not a non-negative integer")))
}

/// Builds the experiment configuration from the subcommand, an optional
/// config file and the command-line pairs, in increasing precedence.
pub fn experiment_config(
    command: Option<&str>,
    pairs: Vec<(String, Option<String>)>,
    env_seed: Option<&str>,
) -> Result<ExperimentConfig, Error> {
    let mut config = match pairs.iter().find(|(k, _)| k == "config") {
        Some((_, v)) => {
            let path = PathBuf::from(need("config", v.clone())?);
            let mut c = ExperimentConfig::from_json_file(&path)?;
            if let Some(name) = command {
                c.experiment = name.to_string();
            }
            c
        }
        None => ExperimentConfig::new(command.ok_or_else(|| Error::invalid("no experiment given"))?),
    };
    experiment::experiment_info(&config.experiment)?;
    if let Some(s) = env_seed {
        config.master_seed = parse_seed(s)?;
    }
    for (key, value) in pairs {
        match key.as_str() {
            "config" => {}
            "seed" | "master_seed" => config.master_seed = parse_seed(&need(&key, value)?)?,
            "replicates" | "reps" => {
                let v = need(&key, value)?;
                config.replicates =
                    Some(v.parse().map_err(|_| Error::invalid(format!("replicates `{v}` is not a count")))?);
            }
            "workers" => {
                let v = need(&key, value)?;
                config.workers = Some(v.parse().map_err(|_| Error::invalid(format!("workers `{v}` is not a count")))?);
            }
            "out" | "output_dir" => config.output_dir = Some(PathBuf::from(need(&key, value)?)),
            "raw" => {
                config.raw = match value.as_deref() {
                    None | Some("true") | Some("1") => true,
                    Some("false") | Some("0") => false,
                    Some(v) => return Err(Error::invalid(format!("raw expects true or false, got `{v}`"))),
                }
            }
            _ => config.set_param_str(&key, &need(&key, value)?)?,
        }
    }
    Ok(config)
}

fn print_list() {
    for info in experiment::registry() {
        println!("{}  (default replicates {})", info.name, info.default_replicates);
        println!("    {}", info.summary);
        for p in info.params {
            println!("    --{} {}", p.key.replace('_', "-"), p.default);
        }
    }
    println!("simulate arg|walk");
    println!("    --n 5 --rho 1 --genome 0:1 --algorithm gm|hudson|auto --variant full|smc|smc-prime|macs(k) --seed S --out DIR");
}

fn run_simulate(rest: &[String], env_seed: Option<&str>) -> Result<i32, Error> {
    let (kind, tail) = match rest.split_first() {
        Some((k, tail)) => (k.parse::<SimulateKind>()?, tail),
        None => return Err(Error::invalid("simulate expects `arg` or `walk`")),
    };
    let mut params = SimulateParams::default();
    let mut seed = match env_seed {
        Some(s) => parse_seed(s)?,
        None => DEFAULT_SEED,
    };
    let mut out = None;
    for (key, value) in key_values(tail)? {
        match key.as_str() {
            "seed" => seed = parse_seed(&need(&key, value)?)?,
            "out" | "output_dir" => out = Some(PathBuf::from(need(&key, value)?)),
            _ => params.set(&key, &need(&key, value)?)?,
        }
    }
    let out = out.unwrap_or_else(|| PathBuf::from(format!("argscape-out/simulate-{}", tail_name(kind))));
    let s = experiment::simulate(kind, &params, seed, &out)?;
    println!(
        "{} n={} genome={}:{} rho={} seed={}",
        tail_name(kind),
        params.n,
        params.a,
        params.b,
        params.rho,
        seed
    );
    println!("max particles: {}", s.max_particles);
    println!("splits: {}", s.splits);
    println!("breakpoints: {}", s.breakpoints);
    println!("distinct trees along the path: {}", s.trees);
    println!("written to {}", out.display());
    Ok(0)
}

fn tail_name(kind: SimulateKind) -> &'static str {
    match kind {
        SimulateKind::Arg => "arg",
        SimulateKind::Walk => "walk",
    }
}

fn run_inner(args: Vec<String>) -> Result<i32, Error> {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return Ok(code);
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match cli.command.as_deref() {
        Some("list") => {
            print_list();
            Ok(0)
        }
        Some("simulate") => run_simulate(&cli.rest, env_seed.as_deref()),
        command => {
            let mut pairs = key_values(&cli.rest)?;
            if let Some(path) = cli.config {
                pairs.insert(0, ("config".to_string(), Some(path.display().to_string())));
            }
            run_config(command, pairs, env_seed.as_deref())
        }
    }
}

fn run_config(command: Option<&str>, pairs: Vec<(String, Option<String>)>, env_seed: Option<&str>) -> Result<i32, Error> {
    let mut config = experiment_config(command, pairs, env_seed)?;
    if config.output_dir.is_none() {
        config.output_dir = Some(PathBuf::from(format!("argscape-out/{}", config.experiment)));
    }
    let report = experiment::run_experiment(&config)?;
    for r in &report.rows {
        println!(
            "{} {:<28} {:<32} est={:.6} ref={:.6} se={:.2e} z={:.2} [{}]",
            if r.pass { "PASS" } else { "FAIL" },
            r.point,
            r.statistic,
            r.estimate,
            r.reference,
            r.se,
            r.z,
            r.check.as_str()
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!(
        "{}: {} of {} rows pass; seed {}, {} replicates, {:.1}s; report in {}",
        report.experiment,
        report.rows.iter().filter(|r| r.pass).count(),
        report.rows.len(),
        report.master_seed,
        report.replicates,
        report.wall_time_s,
        config.output_dir.as_ref().expect("set above").display()
    );
    Ok(if report.passed() { 0 } else { 1 })
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run(args: Vec<String>) -> i32 {
    match run_inner(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("argscape: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pairs_forms() {
        let p = key_values(&strings(&["--rho-v", "1,2", "--raw", "--seed=4"])).unwrap();
        assert_eq!(
            p,
            vec![
                ("rho_v".to_string(), Some("1,2".to_string())),
                ("raw".to_string(), None),
                ("seed".to_string(), Some("4".to_string())),
            ]
        );
        assert!(key_values(&strings(&["rho", "1"])).is_err());
    }

    #[test]
    fn precedence_of_seed_sources() {
        let c = experiment_config(Some("verify-aux"), vec![], Some("9")).unwrap();
        assert_eq!(c.master_seed, 9);
        let pairs = key_values(&strings(&["--seed", "3"])).unwrap();
        let c = experiment_config(Some("verify-aux"), pairs, Some("9")).unwrap();
        assert_eq!(c.master_seed, 3);
        assert_eq!(experiment_config(Some("verify-aux"), vec![], None).unwrap().master_seed, DEFAULT_SEED);
    }

    #[test]
    fn error_codes() {
        let e = experiment_config(Some("nope"), vec![], None).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let pairs = key_values(&strings(&["--rho-u", "x"])).unwrap();
        assert_eq!(exit_code(&experiment_config(Some("verify-aux"), pairs, None).unwrap_err()), 3);
        let pairs = key_values(&strings(&["--config", "/nonexistent/c.json"])).unwrap();
        assert_eq!(exit_code(&experiment_config(None, pairs, None).unwrap_err()), 4);
        assert_eq!(run(strings(&["argscape", "simulate", "tree"])), 3);
        assert_eq!(run(strings(&["argscape", "simulate", "arg", "--rho", "0"])), 3);
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"experiment": "verify-small-time", "master_seed": 5, "replicates": 3, "parameters": {"n": 100}}"#,
        )
        .unwrap();
        let pairs = key_values(&strings(&["--config", path.to_str().unwrap(), "--eps", "0.1"])).unwrap();
        let c = experiment_config(None, pairs, None).unwrap();
        assert_eq!((c.master_seed, c.replicates), (5, Some(3)));
        assert_eq!(c.parameters["eps"], serde_json::json!(0.1));
        assert_eq!(c.parameters["n"], serde_json::json!(100));
    }
}
