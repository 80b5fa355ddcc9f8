//! `damplast`: run, verify and cross-check damage–plasticity scenarios.
//!
//! Exit codes: 0 success, 1 invalid input, 2 solver stall, 3 verification
//! violations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use damplast_core::energetics::{condition_suite, verify_trajectory};
use damplast_core::oracle::{oracle_minimize, unknown_count, OracleError, MAX_UNKNOWNS};
use damplast_core::output::{format_conditions, format_report, read_run, write_report_csv, write_run, write_snapshot};
use damplast_core::scenario::{parse_scenario, Scenario};
use damplast_core::solver::{incremental_step, run_evolution, SolverError, Trajectory};
use damplast_core::Model;

#[derive(Debug, Parser)]
#[command(name = "damplast", version, about = "Rate-independent damage and plasticity by incremental minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a scenario and optionally write the time series and snapshots.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check stability, energy balance and admissibility of a trajectory.
    Verify {
        scenario: PathBuf,
        /// Directory written by `run --out`; a fresh run is used when absent.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Directory for report.txt, report.csv and the worst competitor of
        /// every step with a stability violation.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the incremental solver with the exhaustive oracle at one step.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        step: usize,
    },
    /// Sample the structural inequalities with their derived constants.
    CheckConditions {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

enum Failure {
    Input(String),
    Stall(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Stall(_) => 2,
            Failure::Violation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Stall(m) | Failure::Violation(m) => m,
        }
    }
}

fn solver_failure(e: &SolverError, context: String) -> Failure {
    match e {
        SolverError::Infeasible(_) | SolverError::Configuration(_) => Failure::Input(context),
        _ => Failure::Stall(context),
    }
}

fn load(path: &Path) -> Result<(Scenario, Model), Failure> {
    let scenario = parse_scenario(path).map_err(|e| Failure::Input(e.to_string()))?;
    let model = scenario.build_model().map_err(|e| Failure::Input(e.to_string()))?;
    Ok((scenario, model))
}

fn evolve(scenario: &Scenario, model: &Model) -> Result<Trajectory, (Failure, Trajectory)> {
    run_evolution(model, &scenario.time, &scenario.solver, &scenario.initial_state(model))
        .map_err(|e| (solver_failure(&e.source, e.to_string()), e.partial))
}

fn cmd_run(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let (scenario, model) = load(path)?;
    let (traj, failure) = match evolve(&scenario, &model) {
        Ok(t) => (t, None),
        Err((f, partial)) => (partial, Some(f)),
    };
    if let Some(dir) = out {
        write_run(&model, &traj, dir).map_err(|e| Failure::Input(e.to_string()))?;
        println!("wrote {} states to {}", traj.len(), dir.display());
    }
    if let Some(f) = failure {
        return Err(f);
    }
    let last = traj.records.last().expect("trajectory holds the initial state");
    let gap = traj.balance_gaps().last().copied().unwrap_or(0.0);
    println!(
        "{} steps to t = {}: E = {:.10e}, dissipation = {:.10e}, balance gap = {:.3e}, min chi = {:.6}",
        traj.len() - 1,
        last.t,
        last.energy.total,
        last.diss_cum,
        gap,
        last.state.min_chi()
    );
    Ok(())
}

fn cmd_verify(path: &Path, stored: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let (scenario, model) = load(path)?;
    let traj = match stored {
        Some(dir) => read_run(&model, dir).map_err(|e| Failure::Input(e.to_string()))?,
        None => evolve(&scenario, &model).map_err(|(f, _)| f)?,
    };
    let report = verify_trajectory(&model, &traj, &scenario.verification).map_err(|e| Failure::Input(e.to_string()))?;
    let text = format_report(&report);
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
        fs::write(dir.join("report.txt"), &text).map_err(|e| Failure::Input(e.to_string()))?;
        write_report_csv(&report, dir.join("report.csv")).map_err(|e| Failure::Input(e.to_string()))?;
        for s in &report.steps {
            if let Some(c) = &s.violating_competitor {
                write_snapshot(&model, s.step, c, dir.join("competitors")).map_err(|e| Failure::Input(e.to_string()))?;
            }
        }
    }
    let v = report.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{} verification violation(s), first: {}", v.len(), v[0])))
    }
}

fn cmd_oracle(path: &Path, step: usize) -> Result<(), Failure> {
    let (scenario, model) = load(path)?;
    let unknowns = unknown_count(&model);
    if unknowns > MAX_UNKNOWNS {
        return Err(Failure::Input(OracleError::TooLarge { unknowns, levels: scenario.oracle.levels }.to_string()));
    }
    if step == 0 || step > scenario.time.n_steps {
        return Err(Failure::Input(format!("step must lie in 1..={}", scenario.time.n_steps)));
    }
    let traj = run_evolution(&model, &scenario.time, &scenario.solver, &scenario.initial_state(&model))
        .map_err(|e| solver_failure(&e.source, e.to_string()))?;
    let prev = traj.records[step - 1].state.clone();
    let t = scenario.time.time(step);
    let am = incremental_step(&model, t, &prev, &scenario.solver).map_err(|e| solver_failure(&e, e.to_string()))?;
    let or = oracle_minimize(&model, t, &prev, &scenario.oracle).map_err(|e| match e {
        OracleError::TooLarge { .. } => Failure::Input(e.to_string()),
        _ => Failure::Stall(e.to_string()),
    })?;
    let diff = am.objective - or.objective;
    let allowed = or.quantization_gap.max(1e-6);
    println!("step {step} (t = {t})");
    println!("  incremental solver objective {:.15e}", am.objective);
    println!("  oracle objective             {:.15e}", or.objective);
    println!("  difference                   {diff:+.3e} (allowed {allowed:.3e}, quantization gap {:.3e})", or.quantization_gap);
    println!("  oracle evaluations           {}", or.evaluations);
    if diff.abs() <= allowed {
        Ok(())
    } else {
        Err(Failure::Violation(format!("objectives differ by {diff:.3e} > {allowed:.3e}")))
    }
}

fn cmd_conditions(path: &Path, samples: usize, seed: u64) -> Result<(), Failure> {
    let (scenario, model) = load(path)?;
    let report = condition_suite(&model, scenario.time.horizon, samples, seed).map_err(|e| Failure::Input(e.to_string()))?;
    print!("{}", format_conditions(&report));
    let f = report.failures();
    if f.is_empty() {
        println!("result: all conditions hold");
        Ok(())
    } else {
        Err(Failure::Violation(f.join("; ")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out } => cmd_run(scenario, out.as_deref()),
        Command::Verify { scenario, trajectory, out } => cmd_verify(scenario, trajectory.as_deref(), out.as_deref()),
        Command::Oracle { scenario, step } => cmd_oracle(scenario, *step),
        Command::CheckConditions { scenario, samples, seed } => cmd_conditions(scenario, *samples, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
