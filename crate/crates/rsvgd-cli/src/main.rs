//! `rsvgd` — command-line front end for the R-SVGD experiment runner.
//!
//! Subcommands:
//!
//! - `rsvgd run --config <path>` — execute a discrete- or continuous-mode
//!   config and write `trace.csv`, snapshots, `summary.json`, and
//!   `config_resolved.json` under its output directory;
//! - `rsvgd sweep --config <path>` — execute a particle-count sweep and write
//!   `rates.csv` plus the fitted log-log slope;
//! - `rsvgd check` — run the library's curated invariant suite and exit
//!   nonzero if anything fails.
//!
//! `--output-dir` and `--seed` override the corresponding config fields.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use rsvgd_core::checks::run_all_checks;
use rsvgd_core::runner::{
    apply_overrides, load_config, run_discrete, run_continuous, run_sweep, Mode, RunConfig,
    RunOutput, RunStatus, SweepOutput,
};

#[derive(Parser)]
#[command(
    name = "rsvgd",
    version,
    about = "Regularized Stein variational gradient descent: runs, sweeps, and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a discrete- or continuous-mode config.
    Run {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<String>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a particle-count sweep config.
    Sweep {
        /// Path to the JSON sweep configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<String>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the curated invariant suite.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
        } => cmd_run(&config, output_dir.as_deref(), seed),
        Command::Sweep {
            config,
            output_dir,
            seed,
        } => cmd_sweep(&config, output_dir.as_deref(), seed),
        Command::Check => return cmd_check(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(config: &PathBuf, output_dir: Option<&str>, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = load_config(config)
        .with_context(|| format!("loading {}", config.display()))?;
    apply_overrides(&mut cfg, output_dir, seed);
    Ok(cfg)
}

fn cmd_run(config: &PathBuf, output_dir: Option<&str>, seed: Option<u64>) -> anyhow::Result<()> {
    let cfg = load(config, output_dir, seed)?;
    let out = match cfg.mode {
        Mode::Discrete => run_discrete(&cfg)?,
        Mode::Continuous => run_continuous(&cfg)?,
        Mode::Sweep => bail!("config has mode \"sweep\"; use `rsvgd sweep`"),
    };
    print_run(&out);
    if let RunStatus::Diverged { step, detail } = &out.status {
        bail!("run diverged at step {step}: {detail} (partial trace written)");
    }
    Ok(())
}

fn print_run(out: &RunOutput) {
    if let Some(last) = out.trace.last() {
        let r = &last.report;
        println!(
            "final    step {:>6}  t = {:<12.6} ksd2 = {:<12.6e} i_nu_stein = {:<12.6e}",
            last.step, last.time, r.ksd2, r.i_nu_stein
        );
        if let Some(w1) = r.w1_to_target {
            println!("         w1 = {w1:.6}");
        }
    }
    if let Some(a) = &out.annealed {
        println!(
            "annealed ksd2 = {:<12.6e} i_nu_stein = {:<12.6e} ({} snapshots, {} pooled, {})",
            a.ksd2, a.i_nu_stein, a.n_snapshots, a.pool_size, a.weighting
        );
    }
    println!("outputs  {}", out.output_dir.display());
}

fn cmd_sweep(config: &PathBuf, output_dir: Option<&str>, seed: Option<u64>) -> anyhow::Result<()> {
    let cfg = load(config, output_dir, seed)?;
    if cfg.mode != Mode::Sweep {
        bail!(
            "config has mode \"{}\"; use `rsvgd run`",
            cfg.mode.name()
        );
    }
    let out = run_sweep(&cfg)?;
    print_sweep(&out);
    if out.rows.is_empty() {
        bail!("every sweep replicate failed; see summary.json");
    }
    Ok(())
}

fn print_sweep(out: &SweepOutput) {
    println!("{:>8} {:>6} {:>14} {:>14} {:>14}", "N", "reps", "mean_i_nu", "mean_ksd2", "stderr_i_nu");
    for row in &out.rows {
        println!(
            "{:>8} {:>6} {:>14.6e} {:>14.6e} {:>14.6e}",
            row.n,
            row.replicates_completed,
            row.mean_i_nu_stein,
            row.mean_ksd2,
            row.stderr_i_nu_stein
        );
    }
    match out.slope {
        Some(s) => println!("fitted log-log slope: {s:.4}"),
        None => println!("fitted log-log slope: unavailable (fewer than 2 surviving N values)"),
    }
    if !out.failures.is_empty() {
        println!("failed replicates: {}", out.failures.len());
    }
    println!("outputs  {}", out.output_dir.display());
}

fn cmd_check() -> ExitCode {
    let results = run_all_checks();
    let mut failed = 0usize;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} — {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("all {} checks passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} checks failed", results.len());
        ExitCode::FAILURE
    }
}
