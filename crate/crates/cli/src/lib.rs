//! `sdgame` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or check failure, 2 configuration or
//! usage error.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod registry;
pub mod run;

use run::Failure;

#[derive(Parser)]
#[command(name = "sdgame", version, about = "Solve, simulate and verify zero-sum stochastic differential games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Isaacs equation; writes value_field.csv and solve_report.json.
    Solve(Common),
    /// Run verification checks; writes verify_report.json.
    Verify(Common),
    /// Dump simulated paths; writes paths.csv and simulate_summary.json.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated check names, e.g. `value,dpp:gamma=tau,lambda=1`.
    #[arg(long, value_name = "LIST")]
    checks: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn exec(cmd: Cmd) -> Result<i32, Failure> {
    let (which, common) = match cmd {
        Cmd::Solve(c) => (0, c),
        Cmd::Verify(c) => (1, c),
        Cmd::Simulate(c) => (2, c),
    };
    let mut cfg = config::load(&common.config).map_err(|e| Failure::Config(e.0))?;
    cfg.apply_overrides(common.seed, common.checks.as_deref().map(registry::split_list), common.out)
        .map_err(|e| Failure::Config(e.0))?;
    let body = || -> Result<i32, Failure> {
        match which {
            0 => Ok(if run::cmd_solve(&cfg)? { 0 } else { 1 }),
            1 => {
                let (pass, reports) = run::cmd_verify(&cfg)?;
                for r in &reports {
                    println!("{:<16} {}  estimate {:.6e}  bound {:.6e}", r.name, if r.pass { "PASS" } else { "FAIL" }, r.estimate, r.bound);
                }
                Ok(if pass { 0 } else { 1 })
            }
            _ => run::cmd_simulate(&cfg).map(|_| 0),
        }
    };
    match common.threads {
        Some(0) => Err(Failure::Config("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Run(e.to_string()))?;
            pool.install(body)
        }
        None => body(),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match exec(cli.cmd) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}
