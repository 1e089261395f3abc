#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommandKind, Family, RunConfig, OUTPUT_DIR_ENV};

/// Radial Toda-system numerics: spectrum, branch continuation and diagnostics.
#[derive(Debug, Parser)]
#[command(name = "toda", version)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (also settable through TODA_OUTPUT_DIR).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Number of grid nodes.
    #[arg(long, global = true)]
    grid_size: Option<usize>,
    /// Node clustering of the compactified grid.
    #[arg(long, global = true)]
    stretch: Option<f64>,
    /// Weight exponent of the weighted norms, in (0, 1).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Newton tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for negative-control noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Bifurcation values μ_n with multiplicities.
    Spectrum {
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Radial kernel P_n(t(r)) on the grid.
    Kernel {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Diagnostics of a closed-form solution.
    #[command(allow_negative_numbers = true)]
    VerifyClosedForm {
        #[arg(long, value_enum)]
        family: Option<Family>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        a1: Option<f64>,
        #[arg(long)]
        a2: Option<f64>,
    },
    /// Locate bifurcation values in a μ-interval.
    #[command(allow_negative_numbers = true)]
    Detect {
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        mu_range: Option<Vec<f64>>,
    },
    /// Trace the branch bifurcating at mode n.
    Continue {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        eps_max: Option<f64>,
        /// Continuation steps per side.
        #[arg(long)]
        steps: Option<usize>,
        /// Also write every state's fields as JSON.
        #[arg(long)]
        dump_fields: bool,
    },
    /// Continue the Jost–Wang pair from μ = −1 to a target μ.
    #[command(allow_negative_numbers = true)]
    PerturbCartan {
        #[arg(long)]
        a1: Option<f64>,
        #[arg(long)]
        a2: Option<f64>,
        #[arg(long)]
        mu_target: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        dump_fields: bool,
    },
    /// Diagnose a stored state (or the end of a freshly traced branch),
    /// optionally after adding seeded noise to ψ.
    Diagnose {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        eps_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Amplitude of uniform noise added to ψ.
        #[arg(long)]
        noise: Option<f64>,
        /// Report name: writes report_<id>.json.
        #[arg(long)]
        id: Option<String>,
    },
    /// Run the command named in the config file.
    Run,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl Cli {
    fn overrides(&self) -> RunConfig {
        let mut c = RunConfig {
            grid_size: self.grid_size,
            stretch: self.stretch,
            alpha: self.alpha,
            tol: self.tol,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            ..Default::default()
        };
        match &self.command {
            None | Some(Cmd::Run) => {}
            Some(Cmd::Spectrum { max_n }) => {
                c.command = Some(CommandKind::Spectrum);
                c.max_n = *max_n;
            }
            Some(Cmd::Kernel { n }) => {
                c.command = Some(CommandKind::Kernel);
                c.mode_n = *n;
            }
            Some(Cmd::VerifyClosedForm { family, mu, delta, a1, a2 }) => {
                c.command = Some(CommandKind::VerifyClosedForm);
                (c.family, c.mu, c.delta, c.a1, c.a2) = (*family, *mu, *delta, *a1, *a2);
            }
            Some(Cmd::Detect { mu_range }) => {
                c.command = Some(CommandKind::Detect);
                c.mu_range = mu_range.as_ref().map(|v| [v[0], v[1]]);
            }
            Some(Cmd::Continue { n, eps_max, steps, dump_fields }) => {
                c.command = Some(CommandKind::Continue);
                (c.mode_n, c.eps_max, c.steps, c.dump_fields) = (*n, *eps_max, *steps, flag(*dump_fields));
            }
            Some(Cmd::PerturbCartan { a1, a2, mu_target, steps, dump_fields }) => {
                c.command = Some(CommandKind::PerturbCartan);
                (c.a1, c.a2, c.mu_target, c.steps) = (*a1, *a2, *mu_target, *steps);
                c.dump_fields = flag(*dump_fields);
            }
            Some(Cmd::Diagnose { input, n, eps_max, steps, noise, id }) => {
                c.command = Some(CommandKind::Diagnose);
                (c.input, c.mode_n, c.eps_max, c.steps) = (input.clone(), *n, *eps_max, *steps);
                (c.noise, c.id) = (*noise, id.clone());
            }
        }
        c
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_DIAGNOSTIC: u8 = 3;

/// Exit code for an error: solver breakdowns → 2, failed numerical checks
/// inside the diagnostics → 3, everything else (bad input, I/O) → 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    use toda_core::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::NonConvergence { .. } | E::SingularJacobian | E::StepUnderflow(_) | E::Overflow(_)) => EXIT_SOLVER,
        Some(E::InvalidInput(_)) | None => EXIT_CONFIG,
        Some(_) => EXIT_DIAGNOSTIC,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let settings = cli
        .config
        .as_deref()
        .map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
        .and_then(|file| {
            let env = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
            config::resolve(file, env, cli.overrides())
        });
    let settings = match settings {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match commands::run(&settings) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in failures {
                eprintln!("diagnostic failure: {f}");
            }
            ExitCode::from(EXIT_DIAGNOSTIC)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
