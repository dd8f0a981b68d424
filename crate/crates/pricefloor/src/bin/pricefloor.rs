//! Command-line front end: `check`, `solve`, `simulate`, `analyze`, `sweep`.
//!
//! Exit codes: 0 ok, 2 assumption violation, 3 convergence failure, 4 I/O
//! or configuration error. The output directory comes from the config file
//! and can be overridden with `--out` or the `PRICEFLOOR_OUT` variable.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pricefloor::config::RunConfig;
use pricefloor::io;
use pricefloor::run;
use pricefloor::Error;

#[derive(Parser)]
#[command(name = "pricefloor", about = "Liquidation strategies under price-floor trading conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (TOML); defaults apply for missing keys.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured number of paths.
    #[arg(long)]
    n_paths: Option<u64>,
    /// Override the configured floor level (sigma units).
    #[arg(long)]
    ell: Option<f64>,
    /// Override the output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if let Some(n) = self.n_paths {
            cfg.sim.n_paths = n;
        }
        if let Some(ell) = self.ell {
            cfg.regime.ell = ell;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the feasibility checks with their margins.
    Check {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Solve the configured problem and persist the grids with a manifest.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Simulate paths against a persisted solve and write the records.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Directory holding the solve (defaults to the output directory).
        #[arg(long)]
        solve_dir: Option<PathBuf>,
    },
    /// Aggregate a records file into summary and figure tables.
    Analyze {
        /// Records file produced by `simulate`.
        #[arg(long)]
        records: PathBuf,
        /// Optional baseline records for a side-by-side table.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve + simulate + analyze across values of one parameter.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Axis to sweep: ell | kv-over-eta.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Check { cfg } => {
            let cfg = cfg.load()?;
            let report = run::cmd_check(&cfg)?;
            print!("{}", run::format_report(&report));
            if report.all_pass() {
                println!("all checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("violated: {}", report.first_failure().unwrap().name);
                Ok(ExitCode::from(2))
            }
        }
        Command::Solve { cfg } => {
            let cfg = cfg.load()?;
            let solved = run::cmd_solve(&cfg)?;
            let dir = cfg.output_dir();
            let manifest = run::persist_solve(&dir, &cfg, &solved)?;
            println!("engine: {}", manifest.engine);
            for step in &manifest.cert {
                println!(
                    "truncation n = {:>10.0}: sup delta {:.3e}, min increase {:+.3e}",
                    step.n, step.sup_delta, step.min_increase
                );
            }
            println!("wrote {} file(s) to {}", manifest.files.len() + 1, dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { cfg, solve_dir } => {
            let cfg = cfg.load()?;
            let dir = cfg.output_dir();
            let solve_dir = solve_dir.unwrap_or_else(|| dir.clone());
            let records = run::cmd_simulate(&cfg, &solve_dir)?;
            run::persist_records(&dir, &cfg, &records)?;
            let closed = records.iter().filter(|r| r.liquidated).count();
            println!(
                "{} paths, {} fully closed ({:.4})",
                records.len(),
                closed,
                closed as f64 / records.len().max(1) as f64
            );
            println!("records: {}", dir.join("records.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { records, baseline, out } => {
            let records = io::read_records(&records)?;
            let baseline = match baseline {
                Some(p) => Some(io::read_records(&p)?),
                None => None,
            };
            let (summary, comparison) = run::cmd_analyze(&records, baseline.as_deref())?;
            run::persist_analysis(&out, &summary, comparison.as_ref(), &records)?;
            println!("paths:        {}", summary.n_paths);
            println!("p(closed):    {:.5} +- {:.5}", summary.p_liquidated, summary.p_liquidated_stderr);
            if let (Some(m), Some(s)) = (summary.mean_fq_pos, summary.sd_fq_pos) {
                println!("fq | surviving: mean {m:.4}, sd {s:.4}");
            }
            if let Some(tail) = &summary.exp_tail {
                println!("tail fit:     slope {:.3}, r2 {:.4}, 1/mean {:.3}", tail.slope, tail.r2, tail.reference_rate);
            }
            println!("tables in {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { cfg, axis, values } => {
            let cfg = cfg.load()?;
            if values.is_empty() {
                return Err(Error::Config("sweep needs at least one value".into()));
            }
            let axis = run::SweepAxis::parse(&axis)?;
            let rows = run::cmd_sweep(&cfg, axis, &values)?;
            let dir = cfg.output_dir();
            run::persist_sweep(&dir, axis, &rows)?;
            for row in &rows {
                println!(
                    "value {:>8.4}: p(closed) {:.4}, fq|surviving mean {:.4} sd {:.4}",
                    row.value, row.p_liquidated, row.mean_fq_pos, row.sd_fq_pos
                );
            }
            println!("sweep table: {}", dir.join("sweep.csv").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
