//! `scalecalc`: scale derivatives, delayed Euler-Lagrange and Pontryagin
//! checks from the command line.
//!
//! Exit codes: 0 when the check passes, 1 when the measured quantity is
//! above tolerance (or a solve fails), 2 on unreadable or invalid input.

mod commands;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{Assembly, CliError, Mode, Settings, TriplePaths};
use report::{Report, Status};

#[derive(Debug, Parser)]
#[command(name = "scalecalc", version, about = "Scale calculus with time delays")]
struct Cli {
    /// Grid step (overrides the problem file's `h`).
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Largest ε of the schedule; default 16h.
    #[arg(long, global = true)]
    eps0: Option<f64>,
    /// Schedule ratio in (0, 1); default 0.5.
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// Number of schedule levels; default 5.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Tolerance of the subcommand's pass/fail check.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for artifacts; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Report)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Report,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scale derivative of a function, compared with f′ when that exists.
    Derive {
        spec: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
    },
    /// Leibniz residual of f·g and Barrow residual of f.
    Rules {
        f: String,
        g: String,
        /// Hölder exponent of f (default: nominal exponent of the spec).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        /// Barrow interval; defaults to the effective interval of □f.
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
    },
    /// Hölder exponent estimate.
    Holder {
        spec: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        /// Expected exponent; the check is |estimate − expect| ≤ tol.
        #[arg(long)]
        expect: Option<f64>,
    },
    /// Euler-Lagrange residual of a trajectory CSV.
    Residual {
        problem: PathBuf,
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Classical)]
        mode: Mode,
        /// Scale mode only: how the residual is assembled.
        #[arg(long, value_enum, default_value_t = Assembly::LeastAction)]
        assembly: Assembly,
    },
    /// Direct extremal solver; the trajectory is the first artifact.
    Solve {
        problem: PathBuf,
        /// Extra history samples before t₁ − τ (a multiple of h).
        #[arg(long, default_value_t = 0.0)]
        guard: f64,
    },
    /// Embedding versus least-action scale residual.
    Coherence {
        problem: PathBuf,
        /// Trajectory CSV; the solved extremal when absent.
        trajectory: Option<PathBuf>,
    },
    /// Pontryagin residuals of a triple, or the reduction check.
    Control {
        problem: PathBuf,
        #[arg(long)]
        q: Option<PathBuf>,
        #[arg(long)]
        u: Option<PathBuf>,
        #[arg(long)]
        p: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Classical)]
        mode: Mode,
        /// Compare the costate equation with the Euler-Lagrange residual
        /// (needs phi = u); uses --q or the solved extremal.
        #[arg(long)]
        reduction: bool,
    },
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let st = Settings { h: cli.h, eps0: cli.eps0, ratio: cli.ratio, levels: cli.levels, tol: cli.tol };
    match &cli.command {
        Command::Derive { spec, from, to } => commands::derive(spec, *from, *to, &st),
        Command::Rules { f, g, alpha, beta, from, to, t1, t2 } => {
            commands::rules(f, g, *alpha, *beta, *from, *to, *t1, *t2, &st)
        }
        Command::Holder { spec, from, to, expect } => commands::holder(spec, *from, *to, *expect, &st),
        Command::Residual { problem, trajectory, mode, assembly } => {
            commands::residual(problem, trajectory, *mode, *assembly, &st)
        }
        Command::Solve { problem, guard } => commands::solve(problem, *guard, &st),
        Command::Coherence { problem, trajectory } => commands::coherence(problem, trajectory.as_deref(), &st),
        Command::Control { problem, q, u, p, mode, reduction } => {
            let paths = TriplePaths { q: q.as_deref(), u: u.as_deref(), p: p.as_deref() };
            commands::control_cmd(problem, paths, *mode, *reduction, &st)
        }
    }
}

fn write(out: Option<&Path>, name: &str, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Input(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("--out {}: {e}", dir.display())))?;
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::Input(format!("--out {}: {e}", path.display())))
        }
    }
}

fn emit(cli: &Cli, report: &Report) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match cli.format {
        Format::Report => write(out, &format!("{}.toml", report.subcommand), &report.to_toml()),
        Format::Csv => {
            for (name, text) in report.csv_artifacts() {
                write(out, &format!("{}-{}.csv", report.subcommand, name), &text)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli).and_then(|r| emit(&cli, &r).map(|_| r));
    match outcome {
        Ok(r) => {
            let verdict = match r.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
            };
            eprintln!("{verdict} {}: measured {:e}, tolerance {:e}", r.subcommand, r.measured, r.tolerance);
            ExitCode::from(if r.status == Status::Pass { 0 } else { 1 })
        }
        Err(CliError::Failed(m)) => {
            eprintln!("FAIL: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Input(m)) => {
            eprintln!("input error: {m}");
            ExitCode::from(2)
        }
    }
}
