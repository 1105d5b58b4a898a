use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use trunclap::experiment::{self, ExperimentConfig, Mode, ReportBundle};

/// Barrier oracles and monotone grid solves for singular degenerate elliptic problems.
#[derive(Parser)]
#[command(name = "trunclap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on each grid spacing (also runs ode_only and barrier_only configs).
    Solve(RunArgs),
    /// Run the nonexistence probe.
    Probe(RunArgs),
    /// Convergence study against an exact radial solution.
    Study(RunArgs),
    /// Drift threshold scan.
    Scan {
        #[command(flatten)]
        run: RunArgs,
        /// Drift strengths, overriding the config's `scan_b`.
        #[arg(long, value_delimiter = ',')]
        b: Vec<f64>,
    },
    /// Closed-form reference values and ODE residuals.
    Oracle {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON experiment config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for summary.json and CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run jobs one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => experiment::preset(name)?,
            (None, None) => bail!("one of --config or --preset is required"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.outputs.dir = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn require(cfg: &ExperimentConfig, allowed: &[Mode], command: &str) -> Result<()> {
    if !allowed.contains(&cfg.mode) {
        bail!("`{command}` cannot run a config in {:?} mode", cfg.mode);
    }
    Ok(())
}

fn report(bundle: &ReportBundle) -> ExitCode {
    println!("{}", bundle.summary_json());
    for c in &bundle.summary.checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if bundle.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (args, mut cfg) = match &cli.command {
        Command::Oracle { out } => {
            let rows = experiment::oracle_table()?;
            let json = serde_json::to_string_pretty(&rows)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("oracle.json"), &json)?;
            }
            println!("{json}");
            let ok = rows.iter().all(|r| r.passed);
            for r in rows.iter().filter(|r| !r.passed) {
                eprintln!("FAIL {} ({}): u(0) = {}", r.name, r.params, r.center_value);
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
        Command::Solve(a) | Command::Probe(a) | Command::Study(a) | Command::Scan { run: a, .. } => (a, a.load()?),
    };
    match &cli.command {
        Command::Solve(_) => require(&cfg, &[Mode::Solve, Mode::OdeOnly, Mode::BarrierOnly], "solve")?,
        Command::Study(_) => require(&cfg, &[Mode::ConvergenceStudy], "study")?,
        Command::Probe(_) => {
            require(&cfg, &[Mode::Probe], "probe")?;
            if !cfg.scan_b.is_empty() {
                bail!("config has scan_b; use `scan`");
            }
        }
        Command::Scan { b, .. } => {
            require(&cfg, &[Mode::Probe], "scan")?;
            if !b.is_empty() {
                cfg.scan_b = b.clone();
                cfg.expect.scan_verdicts = None;
            }
            if cfg.scan_b.is_empty() {
                bail!("no drift strengths: set scan_b or pass --b");
            }
        }
        Command::Oracle { .. } => unreachable!(),
    }
    let bundle = experiment::run(&cfg, args.sequential).with_context(|| format!("experiment `{}`", cfg.name))?;
    Ok(report(&bundle))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
