//! CLI for the bdris experiment harness.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use bdris::sim;
use bdris::ExperimentSpec64;

#[derive(Parser)]
#[command(
    name = "bdris",
    about = "Joint beamforming / BD-RIS / sub-panel placement experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write results.csv, summary.csv,
    /// metadata.toml, and a plot script.
    Run {
        /// TOML experiment spec; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the spec's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed (overrides the spec).
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per sweep point (overrides the spec).
        #[arg(long)]
        trials: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Aggregate a results.csv into per-point statistics and gap tables.
    Summarize {
        /// Path to a results.csv produced by `run`.
        results: PathBuf,
        /// Also write summary.csv next to the input.
        #[arg(long)]
        write: bool,
    },
    /// Run the built-in oracle suites.
    Selftest,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            threads,
        } => run(config, out, seed, trials, threads),
        Command::Summarize { results, write } => summarize(results, write),
        Command::Selftest => selftest(),
    }
}

fn run(
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<usize>,
    threads: Option<usize>,
) -> anyhow::Result<()> {
    let mut spec = match config {
        Some(path) => ExperimentSpec64::load(&path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentSpec64::default(),
    };
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&spec.output_dir));

    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        builder.build().context("building thread pool")?
    };

    let points = spec.points().len();
    eprintln!(
        "running {} sweep points x {} trials on {} threads",
        points,
        spec.trials,
        pool.current_num_threads()
    );
    let started = std::time::Instant::now();
    let rows = pool.install(|| sim::run_experiment(&spec))?;
    let results = sim::emit(&spec, &rows, &out_dir)?;
    eprintln!(
        "finished {} rows in {:.1} s",
        rows.len(),
        started.elapsed().as_secs_f64()
    );

    let summary = sim::summarize(&rows);
    print_summary(&summary);
    println!("results table: {}", results.display());
    Ok(())
}

fn summarize(results: PathBuf, write: bool) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&results)
        .with_context(|| format!("reading {}", results.display()))?;
    let rows: Vec<sim::ResultRow<f64>> = sim::from_csv(&text)?;
    let summary = sim::summarize(&rows);
    print_summary(&summary);
    if write {
        let out = results.with_file_name("summary.csv");
        std::fs::write(&out, sim::summary_to_csv(&summary))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn print_summary(summary: &sim::Summary<f64>) {
    println!(
        "{:>4} {:>4} {:>9} {:>4} {:>3} {:>5} {:>4} {:>7} {:>10} {:>9} {:>9}",
        "pt", "M", "arch", "N_t", "L", "l_s", "mob", "trials", "mean", "std", "ci95"
    );
    for p in &summary.points {
        println!(
            "{:>4} {:>4} {:>9} {:>4} {:>3} {:>5.2} {:>4} {:>7} {:>10.4} {:>9.4} {:>9.4}",
            p.point_id,
            p.m,
            p.arch_label(),
            p.n_t,
            p.l,
            p.l_s,
            p.mobility.to_string(),
            p.trials - p.failures,
            p.mean,
            p.std,
            p.ci95
        );
        if p.failures > 0 {
            println!("     ^ {} failed trial(s)", p.failures);
        }
    }
    if !summary.ma_minus_fa.is_empty() {
        println!("\nmobility gaps (MA - FA, bits/s/Hz):");
        for g in &summary.ma_minus_fa {
            println!(
                "  {:<16} M={:<4} N_t={:<3} L={:<2} l_s={:<5.2} gap={:+.4}",
                g.label.trim(),
                g.m,
                g.n_t,
                g.l,
                g.l_s,
                g.gap
            );
        }
    }
    if !summary.connectivity.is_empty() {
        println!("\nconnectivity gaps (bits/s/Hz):");
        for g in &summary.connectivity {
            println!(
                "  {:<22} M={:<4} N_t={:<3} L={:<2} l_s={:<5.2} gap={:+.4}",
                g.label.trim(),
                g.m,
                g.n_t,
                g.l,
                g.l_s,
                g.gap
            );
        }
    }
}

fn selftest() -> anyhow::Result<()> {
    let results = bdris::selftest::run_selftest();
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "ok" } else { "FAILED" };
        println!("{:<28} {:>6}   {}", r.name, status, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        bail!("{failed} selftest suite(s) failed");
    }
    println!("all {} suites passed", results.len());
    Ok(())
}
