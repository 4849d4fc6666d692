//! `nlsc` — simulate, differentiate and optimize bilinear NLS control runs.
//!
//! Subcommands: `simulate`, `adjoint`, `grad-check`, `optimize`, `verify`.
//! Configuration comes from a TOML file (`--config`); command-line flags
//! override file values, which override the built-in defaults. Every run
//! writes a manifest JSON with the full effective configuration, seed,
//! invariant summary and wall-clock time.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure (blow-up or a failed verification check).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use nlsc::adjoint::evolve_backward;
use nlsc::checks::{gradient_check, run_all, CheckReport, VerifyConfig};
use nlsc::config::{InvariantSummary, Problem, RunConfig, RunManifest};
use nlsc::cost::evaluate;
use nlsc::forward::{evolve, Trajectory};
use nlsc::gradient::{assemble_gradient, h1_riesz_lift};
use nlsc::io;
use nlsc::optimize::optimize;
use nlsc::Error;

#[derive(Parser)]
#[command(name = "nlsc", version, about = "Bilinear optimal control of the NLS equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// TOML run configuration; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "nlsc-out")]
    out: PathBuf,
    /// Seed for random test directions (flags > file > defaults).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// Control horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    phi0: Option<f64>,
    /// State-storage stride of the forward solver.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the state equation, writing diagnostics and snapshots.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Times at which to write NLSC state snapshots (nearest node).
        #[arg(long, value_delimiter = ',')]
        snapshot_at: Vec<f64>,
    },
    /// Integrate the adjoint backward, writing the pairing series.
    Adjoint {
        #[command(flatten)]
        common: CommonOpts,
        /// Times at which to write adjoint NLSC snapshots.
        #[arg(long, value_delimiter = ',')]
        snapshot_at: Vec<f64>,
    },
    /// Compare the adjoint gradient with central finite differences.
    GradCheck {
        #[command(flatten)]
        common: CommonOpts,
        /// Number of seeded random directions.
        #[arg(long, default_value_t = 3)]
        directions: usize,
    },
    /// Projected descent on the control.
    Optimize {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        grad_tol: Option<f64>,
        #[arg(long)]
        initial_step: Option<f64>,
    },
    /// Run the verification harness.
    Verify {
        #[command(flatten)]
        common: CommonOpts,
        /// Emit the machine-readable JSON report on stdout.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    // Usage errors exit 1 (clap's default of 2 is reserved here for
    // numerical failures); --help and --version stay exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &CommonOpts) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(lambda) = common.lambda {
        cfg.model.lambda = lambda;
    }
    if let Some(sigma) = common.sigma {
        cfg.model.sigma = sigma;
    }
    if let Some(g1) = common.gamma1 {
        cfg.cost.gamma1 = g1;
    }
    if let Some(g2) = common.gamma2 {
        cfg.cost.gamma2 = g2;
    }
    if let Some(t) = common.horizon {
        cfg.control.horizon = t;
    }
    if let Some(n) = common.n_steps {
        cfg.control.n_steps = n;
    }
    if let Some(phi0) = common.phi0 {
        cfg.control.phi0 = phi0;
    }
    if let Some(stride) = common.stride {
        cfg.solver.stride = stride;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(common: &CommonOpts) -> Result<(RunConfig, Problem), Error> {
    let cfg = load_config(common)?;
    std::fs::create_dir_all(&common.out)?;
    let problem = cfg.build()?;
    Ok((cfg, problem))
}

fn snapshot_nodes(times: &[f64], traj: &Trajectory) -> Vec<(f64, usize)> {
    times
        .iter()
        .map(|&t| {
            let k = ((t / traj.dt).round() as usize).min(traj.n_steps);
            // Snap to the nearest stored node under the stride.
            let k = if traj.state_at(k).is_some() {
                k
            } else {
                ((k / traj.stride) * traj.stride).min(traj.n_steps)
            };
            (k as f64 * traj.dt, k)
        })
        .collect()
}

fn forward_invariants(traj: &Trajectory, control: &nlsc::control::ControlPath) -> InvariantSummary {
    InvariantSummary {
        mass_drift: Some(traj.mass_drift()),
        energy_identity_residual: Some(traj.energy_identity_residual(control)),
        boundary_max: Some(traj.boundary_max),
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate { common, snapshot_at } => {
            let start = Instant::now();
            let (cfg, problem) = prepare(&common)?;
            let traj =
                evolve(&problem.u0, &problem.control, &problem.model, &problem.potential, &problem.solver)?;
            let cost = evaluate(&traj, &problem.control, &problem.cost)?;

            io::write_diagnostics(&common.out.join("diagnostics.csv"), &traj)?;
            io::write_control(&common.out.join("control.csv"), &problem.control)?;
            io::write_real_field(&common.out.join("potential.nlsc"), &problem.potential)?;
            io::write_real_field(&common.out.join("observable.nlsc"), &problem.observable)?;
            if problem.grid.dim() == 1 {
                io::write_real_field_csv(&common.out.join("potential.csv"), &problem.potential)?;
                io::write_real_field_csv(&common.out.join("observable.csv"), &problem.observable)?;
            }
            for (t, k) in snapshot_nodes(&snapshot_at, &traj) {
                let state = traj.state_at(k).expect("snapped to a stored node");
                io::write_state(&common.out.join(format!("state_t{t:.6}.nlsc")), state)?;
            }

            let mut manifest = RunManifest::new("simulate", &cfg);
            manifest.invariants = forward_invariants(&traj, &problem.control);
            manifest.cost = Some(cost);
            manifest.wall_clock_s = start.elapsed().as_secs_f64();
            manifest.write(&common.out.join("manifest.json"))?;
            println!(
                "simulate: {} steps, mass drift {:.3e}, energy-identity residual {:.3e}, total cost {:.6e}",
                traj.n_steps,
                traj.mass_drift(),
                traj.energy_identity_residual(&problem.control),
                cost.total
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Adjoint { common, snapshot_at } => {
            let start = Instant::now();
            let (cfg, problem) = prepare(&common)?;
            let traj =
                evolve(&problem.u0, &problem.control, &problem.model, &problem.potential, &problem.solver)?;
            let run = evolve_backward(
                &traj,
                &problem.control,
                &problem.model,
                &problem.potential,
                &problem.cost,
                !snapshot_at.is_empty(),
            )?;
            io::write_pairing(&common.out.join("pairing.csv"), run.pairing.dt, &run.pairing.values)?;
            if let Some(states) = &run.states {
                for (t, k) in snapshot_nodes(&snapshot_at, &traj) {
                    io::write_state(&common.out.join(format!("adjoint_t{t:.6}.nlsc")), &states[k])?;
                }
            }

            let mut manifest = RunManifest::new("adjoint", &cfg);
            manifest.invariants = forward_invariants(&traj, &problem.control);
            manifest.wall_clock_s = start.elapsed().as_secs_f64();
            manifest.write(&common.out.join("manifest.json"))?;
            let gmax = run.pairing.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            println!("adjoint: pairing series written, max |g| = {gmax:.6e}");
            Ok(ExitCode::SUCCESS)
        }

        Command::GradCheck { common, directions } => {
            let start = Instant::now();
            let (cfg, problem) = prepare(&common)?;
            if !problem.model.gateaux_ok {
                return Err(Error::GateauxRange(problem.model.sigma));
            }
            let records = gradient_check(
                &problem.u0,
                &problem.control,
                &problem.model,
                &problem.potential,
                &problem.cost,
                problem.seed,
                directions,
                &[1e-2, 5e-3],
            )?;

            let traj =
                evolve(&problem.u0, &problem.control, &problem.model, &problem.potential, &problem.solver)?;
            let run = evolve_backward(
                &traj,
                &problem.control,
                &problem.model,
                &problem.potential,
                &problem.cost,
                false,
            )?;
            let grad = assemble_gradient(&run.pairing, &problem.control, &traj.omega, &problem.cost)?;
            let lift = h1_riesz_lift(&grad);
            io::write_gradient(&common.out.join("gradient.csv"), &grad, &lift)?;

            // The report excludes timing so identical seeds give
            // byte-identical files.
            let report = serde_json::json!({ "seed": problem.seed, "directions": records });
            std::fs::write(
                common.out.join("grad_check.json"),
                serde_json::to_string_pretty(&report).expect("serializable") + "\n",
            )?;

            let mut manifest = RunManifest::new("grad-check", &cfg);
            manifest.invariants = forward_invariants(&traj, &problem.control);
            manifest.wall_clock_s = start.elapsed().as_secs_f64();
            manifest.write(&common.out.join("manifest.json"))?;

            let worst = records.iter().map(|r| r.rel_err).fold(0.0, f64::max);
            println!("grad-check: {directions} directions, worst relative error {worst:.3e}");
            Ok(ExitCode::SUCCESS)
        }

        Command::Optimize { common, max_iters, grad_tol, initial_step } => {
            let start = Instant::now();
            let (cfg, problem) = prepare(&common)?;
            let mut opts = problem.optimize;
            if let Some(m) = max_iters {
                opts.max_iters = m;
            }
            if let Some(g) = grad_tol {
                opts.grad_tol = g;
            }
            if let Some(s) = initial_step {
                opts.initial_step = s;
            }
            let report = optimize(
                &problem.u0,
                &problem.control,
                &problem.model,
                &problem.potential,
                &problem.cost,
                &opts,
            )?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            io::write_iterates(&common.out.join("iterates.csv"), &report.iterates)?;
            io::write_control(&common.out.join("final_control.csv"), &report.final_control)?;

            let final_traj = evolve(
                &problem.u0,
                &report.final_control,
                &problem.model,
                &problem.potential,
                &problem.solver,
            )?;
            io::write_state(&common.out.join("state_final.nlsc"), final_traj.final_state())?;

            let mut manifest = RunManifest::new("optimize", &cfg);
            manifest.invariants = forward_invariants(&final_traj, &report.final_control);
            manifest.cost = Some(report.iterates.last().expect("non-empty").cost);
            manifest.wall_clock_s = start.elapsed().as_secs_f64();
            manifest.write(&common.out.join("manifest.json"))?;

            let last = report.iterates.last().expect("non-empty");
            println!(
                "optimize: {} iterates, total {:.6e}, grad_h1 {:.3e}, stationarity residual {:.3e}{}{}",
                report.iterates.len(),
                last.cost.total,
                last.grad_h1,
                report.stationarity_residual,
                if report.converged { ", converged" } else { "" },
                if report.stagnated { ", stagnated" } else { "" },
            );
            if let Some(failure) = &report.failure {
                eprintln!("failure context: {failure}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { common, json } => {
            let cfg = load_config(&common)?;
            std::fs::create_dir_all(&common.out)?;
            let vcfg = VerifyConfig { seed: cfg.seed, ..Default::default() };
            let reports = run_all(&vcfg);
            let payload = serde_json::json!({
                "seed": vcfg.seed,
                "tolerances": vcfg.tolerances,
                "checks": reports,
            });
            std::fs::write(
                common.out.join("verify_report.json"),
                serde_json::to_string_pretty(&payload).expect("serializable") + "\n",
            )?;
            if json {
                println!("{}", serde_json::to_string_pretty(&payload).expect("serializable"));
            } else {
                print_table(&reports, vcfg.seed);
            }
            let all_pass = reports.iter().all(CheckReport::passed);
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn print_table(reports: &[CheckReport], seed: u64) {
    println!("verification harness (seed {seed})");
    println!("{:<24} {:<8} {:>10}", "check", "status", "runtime");
    for r in reports {
        let status = match r.status {
            nlsc::checks::CheckStatus::Pass => "PASS",
            nlsc::checks::CheckStatus::Fail => "FAIL",
            nlsc::checks::CheckStatus::Skipped => "SKIP",
        };
        println!("{:<24} {:<8} {:>8.2} s", r.name, status, r.runtime_s);
        if r.status == nlsc::checks::CheckStatus::Fail {
            println!("    measured:  {}", r.measured);
            println!("    tolerance: {}", r.tolerance);
        }
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} checks passed", reports.len());
}
