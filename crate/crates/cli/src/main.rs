use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use msgd_lab::{run_experiment, validate_config, COMMANDS};

/// Run an M-SGD experiment from a JSON config.
#[derive(Parser, Debug)]
#[command(name = "msgd", version)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, required_unless_present = "list_commands")]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replications (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the available commands and exit.
    #[arg(long)]
    list_commands: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_commands {
        for (name, about) in COMMANDS {
            println!("{name:<16} {about}");
        }
        return ExitCode::SUCCESS;
    }
    let path = cli.config.expect("clap enforces --config");
    let raw = match fs::read_to_string(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match validate_config(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    let out = cli
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("msgd-out/{}", config.command.name())));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run_experiment(&config, &out)) {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "{} {}: observed {:.6e}, target {:.6e}, tolerance {:.3e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.observed,
                    c.target,
                    c.tolerance
                );
            }
            println!(
                "{}: {} ({} of {} checks passed); outputs in {}",
                report.command,
                if report.pass { "PASS" } else { "FAIL" },
                report.checks.iter().filter(|c| c.pass).count(),
                report.checks.len(),
                out.display()
            );
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
