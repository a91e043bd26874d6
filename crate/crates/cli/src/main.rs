//! `dispersive`: well-posedness checks, transforms and growth experiments
//! for 2x2 fourth-order dispersive systems on the circle.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{Report, EXIT_ERROR};
use config::{Config, MethodName};

#[derive(Parser)]
#[command(name = "dispersive", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the integral conditions; exit 0 if well-posed, 2 if not.
    Check(Common),
    /// Build the decoupling transform of a complex system and verify it.
    Diagonalize(Common),
    /// Build the gauge of a real system and measure its energy estimate.
    Gauge(Common),
    /// Evolve initial data and record the L2 norm.
    Evolve(Common),
    /// Propagator norms along the N-ladder, one CSV series per system.
    Growth(Common),
    /// Moving-frame coefficients, identities and verdict.
    Frame(Common),
}

#[derive(Args)]
struct Common {
    /// System description (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Truncation N; for `growth` the ladder becomes N/4, N/2, 3N/4, N.
    #[arg(long, value_name = "N")]
    modes: Option<usize>,
    #[arg(long, value_name = "T")]
    t_final: Option<f64>,
    /// Cutoff radius of the transforms.
    #[arg(long, value_name = "R")]
    r: Option<f64>,
    #[arg(long, value_name = "TOL")]
    tolerance: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Write the machine-readable report here (CSV for evolve/growth unless --json).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Print JSON instead of the human report.
    #[arg(long)]
    json: bool,
}

fn ladder_for(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [n / 4, n / 2, 3 * n / 4, n].into_iter().filter(|&m| m > 0).collect();
    v.dedup();
    v
}

fn load(c: &Common) -> Result<Config> {
    let mut cfg = config::load(&c.config)?;
    let ex = &mut cfg.experiment;
    if let Some(n) = c.modes {
        anyhow::ensure!(n > 0, "--modes must be positive");
        ex.modes = n;
        ex.ladder = ladder_for(n);
    }
    if let Some(t) = c.t_final {
        anyhow::ensure!(t.is_finite() && t >= 0.0, "--t-final must be a nonnegative number");
        ex.t_final = t;
    }
    if let Some(r) = c.r {
        anyhow::ensure!(r.is_finite() && r > 0.0, "--r must be positive");
        ex.r = Some(r);
    }
    if let Some(tol) = c.tolerance {
        anyhow::ensure!(tol.is_finite() && tol >= 0.0, "--tolerance must be a nonnegative number");
        ex.tolerance = tol;
    }
    if let Some(m) = c.method {
        ex.method = m;
    }
    Ok(cfg)
}

fn emit(report: &Report, c: &Common) -> Result<()> {
    let json = serde_json::to_string_pretty(&report.json)? + "\n";
    let mut stderr = std::io::stderr().lock();
    for w in &report.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(if c.json { json.as_bytes() } else { report.text.as_bytes() })?;
    stdout.flush()?;
    if let Some(path) = &c.out {
        let body = match (&report.csv, c.json) {
            (Some(csv), false) => csv.as_str(),
            _ => json.as_str(),
        };
        std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let (c, f): (&Common, fn(&Config) -> Result<Report>) = match &cli.command {
        Command::Check(c) => (c, commands::check),
        Command::Diagonalize(c) => (c, commands::diagonalize_cmd),
        Command::Gauge(c) => (c, commands::gauge),
        Command::Evolve(c) => (c, commands::evolve_cmd),
        Command::Growth(c) => (c, commands::growth),
        Command::Frame(c) => (c, commands::frame),
    };
    let cfg = load(c)?;
    let report = f(&cfg)?;
    emit(&report, c)?;
    Ok(report.exit_code())
}

// causes already spelled out by their parent are skipped
fn chain(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !out.contains(&c) {
            out.push_str(": ");
            out.push_str(&c);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are errors (1); exit 2 means ill-posed
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", chain(&e));
            ExitCode::from(EXIT_ERROR)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ladder_from_modes() {
        assert_eq!(ladder_for(32), vec![8, 16, 24, 32]);
        assert_eq!(ladder_for(2), vec![1, 2]);
    }
}
