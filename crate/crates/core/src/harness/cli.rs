//! The `mlsa` command line.
//!
//! Exit status: 0 on success, 1 for configuration or usage errors, 2 when a
//! run fails. Diagnostics go to standard error.

use std::path::{Path, PathBuf};
use std::process::Command;

use clap::{Args, Parser, Subcommand};

use super::config::RawConfig;
use super::experiment::{
    run_prepared, trajectory_csv, HarnessError, Prepared, RunOptions, RunSummary,
};
use super::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "mlsa", version, about = "Multilevel stochastic approximation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed (overrides the `seed` key).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replications; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the configured experiment; writes summary.csv and summary.meta.
    Run {
        #[command(flatten)]
        common: Common,
        /// Fill the wall_ms column (makes the CSV machine dependent).
        #[arg(long)]
        wall_time: bool,
    },
    /// Print the admissibility report of the configured schedule.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run once per value of one key; writes one summary per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Configuration key to vary.
        #[arg(long)]
        param: String,
        /// Values, separated by `;` (list-valued keys keep their commas).
        #[arg(long)]
        values: String,
    },
    /// Run a single replication and write trajectory.csv (n, error, cum_cost).
    Trajectory {
        #[command(flatten)]
        common: Common,
        /// Number of steps.
        #[arg(long)]
        n: u64,
        /// Replication index.
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
}

/// `git rev-parse HEAD`, or `unknown` outside a repository.
pub fn git_revision() -> String {
    Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn load(common_config: &Path, seed: Option<u64>) -> Result<(RawConfig, ExperimentConfig), HarnessError> {
    let mut raw = RawConfig::load(common_config)?;
    if let Some(s) = seed {
        raw.set("seed", &s.to_string())?;
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    Ok((raw, cfg))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_summary(dir: &Path, summary: &RunSummary, rev: &str) -> Result<(), HarnessError> {
    write(&dir.join("summary.csv"), &summary.csv())?;
    write(&dir.join("summary.meta"), &summary.meta(rev))?;
    if let Some(sup) = summary.sup_csv() {
        write(&dir.join("sup_error.csv"), &sup)?;
    }
    Ok(())
}

fn print_summary(summary: &RunSummary) {
    print!("{}", summary.csv());
    if let Some(f) = summary.error_fit {
        println!("error slope {:.4} (max residual {:.3})", f.slope, f.max_residual);
    }
    if let Some(f) = summary.cost_fit {
        println!("cost slope {:.4}", f.slope);
    }
    if let Some(f) = summary.sup_fit {
        println!("sup-error slope {:.4}", f.slope);
    }
}

/// Executes a parsed command.
pub fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Cmd::Run { common, wall_time } => {
            let (_, cfg) = load(&common.config, common.seed)?;
            let prep = Prepared::new(&cfg)?;
            let opts = RunOptions {
                jobs: common.jobs,
                wall_time,
            };
            let summary = run_prepared(&prep, opts)?;
            write_summary(&common.out, &summary, &git_revision())?;
            print_summary(&summary);
            Ok(())
        }
        Cmd::Validate { config } => {
            let (_, cfg) = load(&config, None)?;
            let prep = Prepared::new(&cfg)?;
            let reports = prep.validation()?;
            if reports.is_empty() {
                println!("no polynomial-schedule conditions apply to this configuration");
            }
            for r in reports {
                println!("{r}");
            }
            Ok(())
        }
        Cmd::Sweep {
            common,
            param,
            values,
        } => {
            let (raw, _) = load(&common.config, common.seed)?;
            let rev = git_revision();
            for value in values.split(';').map(str::trim).filter(|v| !v.is_empty()) {
                let mut raw = raw.clone();
                raw.set(&param, value)?;
                let cfg = ExperimentConfig::from_raw(&raw)?;
                let prep = Prepared::new(&cfg)?;
                let summary = run_prepared(
                    &prep,
                    RunOptions {
                        jobs: common.jobs,
                        wall_time: false,
                    },
                )?;
                let label: String = value
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                    .collect();
                write_summary(&common.out.join(format!("{param}={label}")), &summary, &rev)?;
                println!("== {param} = {value}");
                print_summary(&summary);
            }
            Ok(())
        }
        Cmd::Trajectory {
            common,
            n,
            replication,
        } => {
            let (_, cfg) = load(&common.config, common.seed)?;
            let prep = Prepared::new(&cfg)?;
            let traj = prep
                .run_replication(replication, n, &mut |_| {})
                .map_err(|source| HarnessError::Replication {
                    index: replication,
                    source,
                })?;
            write(&common.out.join("trajectory.csv"), &trajectory_csv(&traj)?)?;
            println!("wrote {} steps", n);
            Ok(())
        }
    }
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}
