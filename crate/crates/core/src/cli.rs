//! Command-line front end: `solve`, `energy`, `distance`, `homogenize`, `verify`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::grid::FeFunction;
use crate::homogenization::{perturbed_measure_family, run_h_convergence, ConvergenceTable};
use crate::potential::{d_lambda_with, energy_report};
use crate::singular::{solve_singular, verify_bounds, SolveReport};
use crate::verify::run_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "singular-elliptic", version, about = "Finite element laboratory for -div(A grad u) = sigma / u^lambda")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the singular problem; writes solution.csv and report.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the energy norms of the configured measure as JSON.
    Energy {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print d_lambda between the measures of two configs as JSON.
    Distance {
        #[arg(long = "config-a")]
        config_a: PathBuf,
        #[arg(long = "config-b")]
        config_b: PathBuf,
    },
    /// Run the laminate convergence experiment; writes convergence.csv and summary.json.
    Homogenize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an invariant suite ("basic" or "full").
    Verify {
        #[arg(long, default_value = "basic")]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// Exit code for a failed command: 2 for solver breakdowns, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::StageFailure { .. }
        | Error::CgStagnation { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::NotSymmetric
        | Error::WeightSingularity => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn report_error(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Solution and report (with bounds) for a config.
pub fn solve_config(cfg: &ExperimentConfig) -> Result<(FeFunction, SolveReport)> {
    let mesh = cfg.build_mesh()?;
    let a = cfg.build_coefficient(&mesh)?;
    let sigma = cfg.build_measure(&mesh)?;
    let (u, mut report) = solve_singular(&a, &sigma, cfg.lambda(), &cfg.solver)?;
    report.bounds = Some(verify_bounds(&u, &a, &sigma, cfg.lambda(), &cfg.solver)?);
    Ok((u, report))
}

pub fn solve_report_json(cfg: &ExperimentConfig, report: &SolveReport) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    let map = v.as_object_mut().expect("report is an object");
    map.insert("lambda".into(), json!(cfg.lambda()));
    map.insert("dim".into(), json!(cfg.domain.dim));
    map.insert("cells".into(), json!(cfg.domain.cells));
    map.insert("newton_steps".into(), json!(report.newton_steps()));
    v
}

fn mass_json(m: Option<f64>) -> Value {
    m.map_or(json!("infinite"), |m| json!(m))
}

/// `{lambda, trace_norm, cov_energy, h_minus1, mass}` for the configured measure.
pub fn energy_config(cfg: &ExperimentConfig) -> Result<Value> {
    let mesh = cfg.build_mesh()?;
    let sigma = cfg.build_measure(&mesh)?;
    let r = energy_report(&sigma, cfg.lambda(), &cfg.solver)?;
    Ok(json!({
        "lambda": r.lambda,
        "trace_norm": r.trace_norm,
        "cov_energy": r.cov_energy,
        "h_minus1": r.h_minus1,
        "mass": mass_json(r.mass),
    }))
}

/// `{d_lambda}` between two configured measures, using λ and solver options of the first.
pub fn distance_configs(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<Value> {
    if a.domain != b.domain {
        return Err(Error::IncompatibleMeasures("configs use different domains"));
    }
    if a.lambda() != b.lambda() {
        return Err(Error::Config(format!("configs disagree on lambda ({} vs {})", a.lambda(), b.lambda())));
    }
    let mesh = a.build_mesh()?;
    let sa = a.build_measure(&mesh)?;
    let sb = b.build_measure(&mesh)?;
    let d = d_lambda_with(&sa, &sb, a.lambda(), &a.solver)?;
    Ok(json!({ "d_lambda": d }))
}

pub fn homogenize_config(cfg: &ExperimentConfig) -> Result<ConvergenceTable> {
    let family = cfg.oscillating_family()?;
    let x = cfg.experiment_block();
    let mesh = cfg.build_mesh()?;
    let sigma = cfg.build_measure(&mesh)?;
    let measures = perturbed_measure_family(&sigma, x.family, &family.epsilons)?;
    run_h_convergence(&family, &measures, cfg.lambda(), x.test_functions, &cfg.solver)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))
}

pub fn cmd_solve(config: &Path, out: &Path) -> i32 {
    let run = || -> Result<()> {
        let cfg = ExperimentConfig::load(config)?;
        let (u, report) = solve_config(&cfg)?;
        create_out(out)?;
        let mut csv = Vec::new();
        u.write_csv(&mut csv)?;
        write_file(&out.join("solution.csv"), &String::from_utf8(csv).expect("CSV is UTF-8"))?;
        write_file(&out.join("report.json"), &to_pretty(&solve_report_json(&cfg, &report)))?;
        Ok(())
    };
    run().map_or_else(|e| report_error(&e), |_| EXIT_OK)
}

pub fn cmd_energy(config: &Path) -> i32 {
    match ExperimentConfig::load(config).and_then(|cfg| energy_config(&cfg)) {
        Ok(v) => {
            print!("{}", to_pretty(&v));
            EXIT_OK
        }
        Err(e) => report_error(&e),
    }
}

pub fn cmd_distance(config_a: &Path, config_b: &Path) -> i32 {
    let run = || -> Result<Value> {
        let a = ExperimentConfig::load(config_a)?;
        let b = ExperimentConfig::load(config_b)?;
        distance_configs(&a, &b)
    };
    match run() {
        Ok(v) => {
            print!("{}", to_pretty(&v));
            EXIT_OK
        }
        Err(e) => report_error(&e),
    }
}

pub fn cmd_homogenize(config: &Path, out: &Path) -> i32 {
    let run = || -> Result<()> {
        let cfg = ExperimentConfig::load(config)?;
        let table = homogenize_config(&cfg)?;
        create_out(out)?;
        write_file(&out.join("convergence.csv"), &table.to_csv())?;
        write_file(&out.join("summary.json"), &to_pretty(&table.summary_json()))?;
        Ok(())
    };
    run().map_or_else(|e| report_error(&e), |_| EXIT_OK)
}

pub fn cmd_verify(suite: &str, seed: u64) -> i32 {
    match run_suite(suite, seed) {
        Ok(report) => {
            print!("{}", report.render());
            if report.all_passed() {
                EXIT_OK
            } else {
                EXIT_VERIFY
            }
        }
        Err(e) => report_error(&e),
    }
}

/// Parses arguments and runs the chosen subcommand, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, &out),
        Command::Energy { config } => cmd_energy(&config),
        Command::Distance { config_a, config_b } => cmd_distance(&config_a, &config_b),
        Command::Homogenize { config, out } => cmd_homogenize(&config, &out),
        Command::Verify { suite, seed } => cmd_verify(&suite, seed),
    }
}
