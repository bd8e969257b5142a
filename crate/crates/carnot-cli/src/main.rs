//! `carnot`: experiment driver for Carnot-group curvature checks.
//!
//! Exit codes: 0 = pass/success, 1 = a check failed or a witness was found,
//! 2 = invalid input.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use carnot_core::contraction::{
    estimate_curvature_exponent, required_exponent, exponent_bound, DensityConfig, SamplerConfig,
};
use carnot_core::geodesic::{integrate_normal_extremal, Covector};
use carnot_core::heisenberg::{mcp_monte_carlo, SetSpec};
use carnot_core::lie::{CarnotSpec, SpecError};
use carnot_core::riemann::{comparison_check, constant_curvature_model, riccati_residual,
    jacobi_integrate};
use carnot_core::singularity::{singular_witness_search, SingularSearchOutcome};
use carnot_core::builtin;

#[derive(Parser)]
#[command(name = "carnot", version, about = "Carnot group curvature experiments")]
struct Cli {
    /// Worker threads (default: available parallelism). The CARNOT_THREADS
    /// environment variable takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a group file: bracket antisymmetry, grading, Jacobi identity,
    /// stratification.
    Validate { group: String },
    /// Print n, m, the homogeneous dimension D and the exponent bound D+n-m.
    Bound { group: String },
    /// Integrate a normal geodesic and emit the curve as CSV.
    Geodesic {
        group: String,
        /// Initial covector, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Jacobian density of the exponential map at a covector.
    Density {
        group: String,
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<f64>,
        #[arg(long, default_value_t = 1e-5)]
        fd_step: f64,
        #[arg(long, default_value_t = 400)]
        rk4_steps: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Estimate the curvature exponent by sampling covectors.
    Exponent {
        group: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Exponent to test (default: the bound D+n-m).
        #[arg(long, short = 'N')]
        n: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Density-level contraction check at a single covector and scale.
    McpDensity {
        group: String,
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Exponent to test (default: the bound D+n-m).
        #[arg(long, short = 'N')]
        n: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Search for a covector annihilating the horizontal coupling map.
    Singular {
        group: String,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// First Heisenberg group checks.
    #[command(subcommand)]
    Heisenberg(HeisenbergCommand),
    /// Riemannian comparison models.
    #[command(subcommand)]
    Riemann(RiemannCommand),
}

#[derive(Subcommand)]
enum HeisenbergCommand {
    /// Monte Carlo volume-contraction check on an annulus around the origin.
    Verify {
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, short = 'N', default_value_t = 5.0)]
        n: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        r_in: f64,
        #[arg(long, default_value_t = 1.0)]
        r_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum RiemannCommand {
    /// Distortion comparison of an integrated constant-curvature model
    /// against the s_K bound.
    Compare {
        /// Comparison curvature K in the bound.
        #[arg(long, short = 'K', default_value_t = 0.0)]
        k: f64,
        /// Ambient dimension n >= 2.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Ricci curvature of the integrated model (default: K).
        #[arg(long)]
        model_k: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 4000)]
        steps: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

fn load_group(arg: &str) -> Result<CarnotSpec, SpecError> {
    match builtin::by_name(arg) {
        Some(res) => res,
        None => CarnotSpec::from_json_file(arg),
    }
}

fn emit(out: &OutArg, report: &serde_json::Value) -> Result<(), SpecError> {
    let text = format!("{}\n", serde_json::to_string_pretty(report)?);
    match &out.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, SpecError> {
    match cli.command {
        Command::Validate { group } => {
            let spec = load_group(&group)?;
            let report = spec.validate();
            if report.is_valid() {
                println!("{}: ok", spec.name());
                Ok(ExitCode::SUCCESS)
            } else {
                for v in &report.violations {
                    eprintln!("{}: {v}", spec.name());
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Bound { group } => {
            let spec = load_group(&group)?;
            let report = spec.validate();
            if !report.is_valid() {
                for v in &report.violations {
                    eprintln!("{}: {v}", spec.name());
                }
                return Ok(ExitCode::from(2));
            }
            println!(
                "n={} m={} D={} bound={}",
                spec.dim(),
                spec.first_layer_dim(),
                spec.homogeneous_dimension(),
                exponent_bound(&spec)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Geodesic {
            group,
            h,
            t_max,
            steps,
            out,
        } => {
            let spec = load_group(&group)?;
            let path = integrate_normal_extremal(&spec, &Covector::from_slice(&h), t_max, steps)?;
            let csv = path.to_csv();
            match &out.out {
                Some(p) => std::fs::write(p, csv)?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Density {
            group,
            h,
            fd_step,
            rk4_steps,
            out,
        } => {
            let spec = load_group(&group)?;
            let cfg = DensityConfig { fd_step, rk4_steps };
            let hv = DVector::from_column_slice(&h);
            let d = carnot_core::contraction::density(&spec, &hv, &cfg)?;
            emit(
                &out,
                &serde_json::json!({
                    "group": spec.name(),
                    "h": h,
                    "density": d,
                }),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Exponent {
            group,
            samples,
            n,
            tolerance,
            seed,
            out,
        } => {
            let spec = load_group(&group)?;
            let cfg = SamplerConfig {
                n_samples: samples,
                n_tested: n,
                tolerance,
                ..SamplerConfig::default()
            };
            let report = estimate_curvature_exponent(&spec, &cfg, seed)?;
            let passes = report.passes();
            emit(&out, &serde_json::to_value(&report)?)?;
            Ok(if passes {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::McpDensity {
            group,
            h,
            s,
            n,
            tolerance,
            out,
        } => {
            let spec = load_group(&group)?;
            let hv = DVector::from_column_slice(&h);
            let n_tested = n.unwrap_or(exponent_bound(&spec) as f64);
            let n_req = required_exponent(&spec, &hv, s, &DensityConfig::default())?;
            let pass = n_req <= n_tested + tolerance;
            emit(
                &out,
                &serde_json::json!({
                    "group": spec.name(),
                    "h": h,
                    "s": s,
                    "N_tested": n_tested,
                    "N_req": n_req,
                    "pass": pass,
                }),
            )?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Singular {
            group,
            budget,
            seed,
            out,
        } => {
            let spec = load_group(&group)?;
            let outcome = singular_witness_search(&spec, budget, seed)?;
            let found = matches!(outcome, SingularSearchOutcome::Witness(_));
            let report = outcome.to_report(spec.name(), seed);
            let mut value = serde_json::to_value(&report)?;
            value["budget"] = serde_json::json!(budget);
            emit(&out, &value)?;
            Ok(if found {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Heisenberg(HeisenbergCommand::Verify {
            s,
            n,
            samples,
            eps,
            r_in,
            r_out,
            seed,
            out,
        }) => {
            let set = SetSpec::Annulus { r_in, r_out };
            let report = mcp_monte_carlo(&set, s, n, samples, eps, seed)?;
            let pass = report.pass && !report.empty_set;
            emit(&out, &serde_json::to_value(&report)?)?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Riemann(RiemannCommand::Compare {
            k,
            n,
            model_k,
            t_max,
            steps,
            out,
        }) => {
            let model = constant_curvature_model(model_k.unwrap_or(k), n);
            let report = comparison_check(k, n, &model, t_max, steps)?;
            let sol = jacobi_integrate(&model, n, t_max, steps)?;
            let residual = riccati_residual(&sol)?;
            // Equality models sit on the bound; allow integrator noise.
            let pass = report.min_margin >= -1e-6;
            let mut value = serde_json::to_value(&report)?;
            value["riccati_residual"] = serde_json::json!(residual);
            value["pass"] = serde_json::json!(pass);
            emit(&out, &value)?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("CARNOT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.threads);
    if let Some(t) = threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
