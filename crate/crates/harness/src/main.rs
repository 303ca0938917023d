//! `chemotaxis` command-line interface.
//!
//! Exit status: 0 on success (whatever the verdict), 1 for invalid input, 2 for I/O failures,
//! 3 when the solver aborts.

use std::path::PathBuf;
use std::process::ExitCode;

use chemotaxis_core::oracle::MmsCase;
use chemotaxis_core::RunStatus;
use chemotaxis_harness::checks;
use chemotaxis_harness::config::{self, OUTPUT_ROOT_ENV};
use chemotaxis_harness::plot::{self, PlotKind};
use chemotaxis_harness::{experiment, sweep, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chemotaxis", version, about = "Chemotaxis-consumption simulator and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its series, snapshots and manifest.
    #[command(after_help = format!("Relative output directories resolve against ${OUTPUT_ROOT_ENV} (default: the working directory)."))]
    Run { config: PathBuf },
    /// Run every point of a sweep specification.
    Sweep {
        spec: PathBuf,
        /// Points run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Compare the solver with closed-form solutions.
    OracleCheck {
        /// One of the oracle case names; all cases when omitted.
        #[arg(long)]
        case: Option<String>,
    },
    /// Manufactured-solution convergence table.
    Mms {
        /// constant, cosine-1d or cosine-2d.
        #[arg(long, default_value = "cosine-1d")]
        case: String,
        /// Number of refinement levels.
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Cells per axis on the coarsest level.
        #[arg(long, default_value_t = 32)]
        coarsest: usize,
        #[arg(long, default_value_t = 0.0)]
        chi: f64,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        /// Final time (default depends on the case dimension).
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Render a series or sweep CSV to SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_parser = ["series", "sweep"])]
        kind: String,
        /// Output file (default: the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config } => {
            let cfg = config::load_config(&config)?;
            let rep = experiment::run_experiment(&cfg, &config::output_root())?;
            let o = &rep.simulation.outcome;
            println!("status       {}", rep.manifest.status);
            println!("verdict      {}", o.verdict);
            println!("peak sup u   {}", o.peak_sup_u);
            println!("threshold m  {} (margin {})", rep.manifest.threshold_m, rep.manifest.margin);
            println!("v max principle {}", if o.v_max_principle_ok { "ok" } else { "VIOLATED" });
            if let Some(a) = &rep.simulation.entropy_audit {
                println!("entropy audit  {} violation(s)", a.violations.len());
            }
            println!("output       {}", rep.output_dir.display());
            Ok(if rep.manifest.status == RunStatus::PositivityFailure { 3 } else { 0 })
        }
        Command::Sweep { spec, jobs } => {
            let s = sweep::load_sweep(&spec)?;
            println!("{} points", s.size());
            let res = sweep::run_sweep(&s, jobs, &config::output_root())?;
            let sum = &res.summary;
            println!(
                "bounded {}  growing {}  inconclusive {}  failed {}",
                sum.bounded, sum.growing, sum.inconclusive, sum.failed
            );
            for f in &sum.monotonicity_findings {
                println!(
                    "finding: Bounded at m = {} but {} at m = {} (mu = {}, chi = {}, seed = {})",
                    f.bounded_at_m, f.verdict, f.not_bounded_at_m, f.mu, f.chi, f.seed
                );
            }
            println!("output {}", res.output_dir.join(sweep::SWEEP_FILE).display());
            Ok(0)
        }
        Command::OracleCheck { case } => {
            let results = checks::oracle_check(case.as_deref())?;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(if results.iter().all(|r| r.passed) { 0 } else { 3 })
        }
        Command::Mms {
            case,
            levels,
            coarsest,
            chi,
            m,
            t_end,
        } => {
            let case = MmsCase::from_name(&case)?;
            let t_end = t_end.unwrap_or_else(|| checks::default_mms_t_end(case));
            let rep = checks::mms_table(case, chi, m, coarsest, levels, t_end)?;
            println!("case {} chi {} m {} t_end {}", rep.case, rep.chi, rep.m, rep.t_end);
            println!("{:>8} {:>12} {:>12} {:>12} {:>8} {:>8}", "cells", "h", "err_u", "err_v", "ord_u", "ord_v");
            for (k, l) in rep.levels.iter().enumerate() {
                let ord = |o: &[f64]| k.checked_sub(1).map_or(String::from("-"), |j| format!("{:.3}", o[j]));
                println!(
                    "{:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>8} {:>8}",
                    l.cells,
                    l.h,
                    l.err_u,
                    l.err_v,
                    ord(&rep.order_u),
                    ord(&rep.order_v)
                );
            }
            Ok(0)
        }
        Command::Plot { csv, kind, out } => {
            let kind = PlotKind::from_name(&kind)?;
            let path = plot::emit_plots(&csv, kind, out.as_deref())?;
            println!("{}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are invalid input; help and version requests succeed
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
