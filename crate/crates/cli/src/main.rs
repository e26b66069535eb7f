use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use cbwk_core::acceptance::{self, AcceptanceOptions, ExperimentSet};
use cbwk_core::env::{reference_environment, reference_policy_class};
use cbwk_core::harness::{self, ExperimentConfig, InstanceFile, RunOptions, SummaryRow};
use cbwk_core::RunTrace;

#[derive(Parser)]
#[command(
    name = "cbwk",
    version,
    about = "Contextual bandits with knapsacks: experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config over all its horizons and seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Added to every seed in the config.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Parallel replicas; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
        /// Skip the per-run trace files.
        #[arg(long)]
        no_traces: bool,
    },
    /// Rebuild and print the summary table from a directory of traces.
    Summarize {
        dir: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite; exits 0 only if every criterion passes.
    Check {
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Write every acceptance trace and a summary here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Write the reference instance as an instance file.
    ReferenceInstance {
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_jobs(jobs: Option<usize>) -> usize {
    jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn print_summary(rows: &[SummaryRow]) {
    let f = |v: Option<f64>| v.map_or("na".to_string(), |x| format!("{x:.4}"));
    println!(
        "{:<10} {:>7} {:>9} {:>5} {:>7} {:>11} {:>11} {:>10} {:>11} {:>6} {:>11}",
        "algorithm", "T", "B", "runs", "refused", "OPT", "regret", "sd", "reward", "abort", "calls"
    );
    for r in rows {
        println!(
            "{:<10} {:>7} {:>9} {:>5} {:>7} {:>11} {:>11} {:>10} {:>11} {:>6} {:>11}",
            r.algorithm.to_string(),
            r.horizon,
            f(r.budget),
            r.runs,
            r.refused,
            f(r.opt),
            f(r.mean_regret),
            f(r.sd_regret),
            f(r.mean_total_reward),
            f(r.abort_rate),
            f(r.mean_oracle_calls)
        );
    }
}

fn run(
    config: &Path,
    seed_offset: u64,
    out_dir: Option<PathBuf>,
    jobs: Option<usize>,
    no_traces: bool,
) -> Result<()> {
    let loaded = ExperimentConfig::load(config)?;
    let out = out_dir.unwrap_or_else(|| loaded.output_dir());
    let opts = RunOptions {
        seed_offset,
        jobs: default_jobs(jobs),
        write_traces: !no_traces,
    };
    let result = harness::run_experiment(&loaded, &out, &opts)
        .with_context(|| format!("running {}", config.display()))?;
    print_summary(&result.summary);
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn check(seed_offset: u64, out_dir: Option<PathBuf>, jobs: Option<usize>) -> Result<bool> {
    let opts = AcceptanceOptions {
        seed_offset,
        jobs: default_jobs(jobs),
    };
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let sink = |trace: &RunTrace| -> cbwk_core::Result<()> {
        if let Some(dir) = &out_dir {
            let name =
                harness::trace_file_name(trace.info.algorithm, trace.info.horizon, trace.info.seed);
            trace.write_file(&dir.join(name))?;
        }
        Ok(())
    };
    let set = ExperimentSet::run(&opts, sink)?;
    if let Some(dir) = &out_dir {
        harness::write_summary(&set.all_summaries(), &dir.join(harness::SUMMARY_FILE))?;
    }
    let report = acceptance::check_all(&set, &opts)?;
    for c in &report {
        println!("{c}");
    }
    let passed = report.iter().filter(|c| c.pass).count();
    println!("{passed}/{} criteria passed", report.len());
    Ok(passed == report.len())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed_offset,
            out_dir,
            jobs,
            no_traces,
        } => run(&config, seed_offset, out_dir, jobs, no_traces).map(|_| true),
        Command::Summarize { dir, out } => (|| {
            let rows = harness::summarize(&dir)?;
            print_summary(&rows);
            if let Some(out) = out {
                harness::write_summary(&rows, &out)?;
            }
            Ok(true)
        })(),
        Command::Check {
            seed_offset,
            out_dir,
            jobs,
        } => check(seed_offset, out_dir, jobs),
        Command::ReferenceInstance { out } => (|| {
            let file = InstanceFile::from_parts(reference_environment(), &reference_policy_class());
            if out.exists() {
                bail!("{} already exists", out.display());
            }
            std::fs::write(&out, harness::instance_to_json(&file)? + "\n")?;
            Ok(true)
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
