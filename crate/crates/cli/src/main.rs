use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use reusealloc::experiment::{generate_synthetic, run_experiment, ExperimentConfig, SyntheticParams};
use reusealloc::lp::{
    build_dual, build_lp_e, build_lp_s, solve_lp, solve_lp_s_colgen, text, DualKind, LinearProgram, LpSolution,
    LpStatus, DENSE_LP_S_MAX_COLUMNS,
};
use reusealloc::model::{gap_instance_spec, Instance, InstanceFile};
use reusealloc::suite::{run_suite, Level, SuiteOptions};
use reusealloc::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "reusealloc", version, about = "Online allocation of reusable resources")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write an instance file.
    Gen {
        /// Output path for the JSON instance.
        #[arg(short, long)]
        out: PathBuf,
        /// Horizon used for the default duration cap (horizon / 5).
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 14)]
        products: usize,
        #[arg(long, default_value_t = 1000)]
        customers: usize,
        #[arg(long, default_value_t = 5)]
        max_assortment: usize,
        #[arg(long, default_value_t = 0.05)]
        xi: f64,
        #[arg(long)]
        duration_cap: Option<u32>,
        /// Write the two-action gap instance with duration `D` instead.
        #[arg(long, value_name = "D")]
        gap: Option<u32>,
    },
    /// Solve a benchmark program and print its value and multipliers as JSON.
    SolveLp {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Program::S)]
        program: Program,
        /// Horizon for the expectation program.
        #[arg(long)]
        horizon: Option<usize>,
        /// Also solve the explicit dual and report both optima.
        #[arg(long)]
        check_dual: bool,
        /// Write the program in text form.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Run an experiment described by a TOML file.
    Run { config: PathBuf },
    /// Run the verification suite.
    Verify {
        #[arg(value_enum, default_value_t = VerifyLevel::Quick)]
        level: VerifyLevel,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Program {
    S,
    E,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericalFailure(_)
        | Error::NonTermination(_)
        | Error::OracleFailure(_)
        | Error::ZeroBenchmark(_)
        | Error::ConstraintViolation { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Cmd) -> reusealloc::Result<ExitCode> {
    match cmd {
        Cmd::Gen {
            out,
            horizon,
            seed,
            products,
            customers,
            max_assortment,
            xi,
            duration_cap,
            gap,
        } => {
            let file = match gap {
                Some(d) => {
                    if d < 2 || d % 2 != 0 {
                        return Err(Error::Config(format!("gap duration must be even and at least 2, got {d}")));
                    }
                    InstanceFile::Table(gap_instance_spec(d))
                }
                None => {
                    let params = SyntheticParams {
                        seed,
                        n_products: products,
                        n_customers: customers,
                        max_assortment,
                        xi,
                        duration_cap,
                        ..SyntheticParams::default()
                    };
                    InstanceFile::Mnl(generate_synthetic(&params, horizon)?)
                }
            };
            fs::write(&out, file.to_json()?)?;
            println!("{}", out.display());
        }
        Cmd::SolveLp {
            instance,
            program,
            horizon,
            check_dual,
            dump,
        } => {
            let inst = InstanceFile::load(&instance)?.build()?;
            let report = solve_program(&inst, program, horizon, check_dual, dump)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_experiment(&cfg)?;
            let s = &out.summary;
            println!("policy {}  lambda* {:.6}  seeds {}", s.policy, s.lambda_star, s.seeds.len());
            println!("final reward gap {:?}", s.final_reward_gap_mean());
            println!("final normalized reward {:.6}", s.final_normalized_reward_mean());
            println!("summary {}", out.summary_path.display());
            if !s.complete {
                for e in &s.errors {
                    eprintln!("{e}");
                }
                return Ok(ExitCode::from(3));
            }
        }
        Cmd::Verify { level } => {
            let level = match level {
                VerifyLevel::Quick => Level::Quick,
                VerifyLevel::Full => Level::Full,
            };
            let report = run_suite(&SuiteOptions::new(level), |c| println!("{c}"))?;
            if !report.all_passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn optimal(lp: &LinearProgram) -> reusealloc::Result<LpSolution> {
    let sol = solve_lp(lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NumericalFailure(format!("program is {:?}", sol.status)));
    }
    Ok(sol)
}

fn solve_program(
    inst: &Instance,
    program: Program,
    horizon: Option<usize>,
    check_dual: bool,
    dump: Option<PathBuf>,
) -> reusealloc::Result<serde_json::Value> {
    let m = inst.model().as_ref();
    let (p, c) = (inst.arrival_probs(), inst.capacities());
    let (name, kind, lp, sol) = match program {
        Program::S => {
            let active = p.iter().filter(|&&x| x > 0.0).count();
            if active.saturating_mul(inst.n_actions()) <= DENSE_LP_S_MAX_COLUMNS {
                let (lp, _) = build_lp_s(m, p, c)?;
                let sol = optimal(&lp)?;
                ("LP-S", DualKind::LpS, lp, sol)
            } else {
                let res = solve_lp_s_colgen(m, p, c, |j, rho, alpha| m.kappa(j, rho, alpha))?;
                ("LP-S", DualKind::LpS, res.program, res.solution)
            }
        }
        Program::E => {
            let horizon = horizon.ok_or_else(|| Error::Config("--horizon is required for the expectation program".into()))?;
            let (lp, _) = build_lp_e(m, p, c, horizon)?;
            let sol = optimal(&lp)?;
            ("LP-E", DualKind::LpE { horizon }, lp, sol)
        }
    };
    if let Some(path) = dump {
        fs::write(path, text::dump(&lp))?;
    }
    let duals: serde_json::Map<String, serde_json::Value> = lp
        .rows()
        .iter()
        .zip(&sol.duals)
        .enumerate()
        .map(|(r, (row, y))| (row.label.clone().unwrap_or_else(|| format!("row{r}")), json!(y)))
        .collect();
    let mut out = json!({
        "program": name,
        "lambda": sol.objective,
        "dual_objective": sol.dual_objective,
        "duality_gap": sol.duality_gap(),
        "variables": lp.num_vars(),
        "rows": lp.num_rows(),
        "duals": duals,
    });
    if check_dual {
        let (dual, _) = build_dual(kind, m, p, c)?;
        let d = optimal(&dual)?;
        out["explicit_dual_objective"] = json!(d.objective);
    }
    Ok(out)
}
