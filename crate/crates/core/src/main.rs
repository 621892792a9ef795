//! `semidiscrete` command-line entry point.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use semidiscrete::certify::{CertifyOptions, SUITES};
use semidiscrete::cli::{
    default_certify_dir, dump_coefficients, exit_code, format_outcome, run_certify, run_simulate,
    verify_operator,
};
use semidiscrete::config::{parse_config, Formulation};
use semidiscrete::discrete_ops::{DEFAULT_P, DEFAULT_TOL};
use semidiscrete::Error;

#[derive(Parser)]
#[command(
    name = "semidiscrete",
    version,
    about = "Semidiscrete Hamiltonian lattice simulations and conservation-law certification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Canonical,
    Lagrangian,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured system and write CSV trajectories and a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `integrator.formulation` from the config.
        #[arg(long, value_enum)]
        formulation: Option<FormulationArg>,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a certification suite, or list the registry.
    Certify {
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, default_value_t = DEFAULT_P)]
        p: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the series coefficients of the nonlocal central operator.
    Operators {
        #[command(subcommand)]
        action: OperatorAction,
    },
}

#[derive(Subcommand)]
enum OperatorAction {
    /// Write `p,c_p,tail_estimate` CSV to stdout or a file.
    Dump {
        #[arg(long, default_value_t = DEFAULT_P)]
        p: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check signs, skew-adjointness and symbol accuracy.
    Verify {
        #[arg(long, default_value_t = DEFAULT_P)]
        p: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate {
            config,
            formulation,
            out,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::Config(vec![format!("{}: {e}", config.display())]))?;
            let mut cfg = parse_config(&text)?;
            if let Some(f) = formulation {
                cfg.formulation = match f {
                    FormulationArg::Canonical => Formulation::Canonical,
                    FormulationArg::Lagrangian => Formulation::Lagrangian,
                };
            }
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let summary = run_simulate(&cfg, &dir)?;
            for r in &summary.reports {
                println!(
                    "{}: {:?}, relative drift {:.3e}, detrended {:.3e}",
                    r.name,
                    r.verdict,
                    r.relative_drift(),
                    r.drift_detrended
                );
            }
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify {
            name,
            list,
            p,
            tol,
            out,
        } => {
            if list {
                for (name, claim) in SUITES {
                    println!("{name}\t{claim}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "--tol must lie in (0, 1), got {tol}"
                )));
            }
            let name = name.expect("clap requires a name without --list");
            let dir = out.unwrap_or_else(default_certify_dir);
            let outcome = run_certify(&name, &CertifyOptions { p, tol }, Some(&dir))?;
            print!("{}", format_outcome(&outcome));
            Ok(if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Operators {
            action: OperatorAction::Dump { p, tol, out },
        } => {
            match out {
                Some(path) => {
                    dump_coefficients(p, tol, io::BufWriter::new(fs::File::create(path)?))?
                }
                None => dump_coefficients(p, tol, io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Operators {
            action: OperatorAction::Verify { p, tol },
        } => {
            let checks = verify_operator(p, tol)?;
            let mut stdout = io::stdout().lock();
            for c in &checks {
                writeln!(
                    stdout,
                    "[{}] {}: {:.3e} (bound {:.1e})",
                    if c.passed { "ok" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.bound
                )?;
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
