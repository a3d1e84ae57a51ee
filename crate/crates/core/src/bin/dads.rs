use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use dads::scenario::{compare, ControllerSpec, Scenario, ScenarioError};
use dads::simulate;
use dads::simulator::{trajectory_stats, SimError};
use dads::synthesis::SynthesisError;
use dads::verifier::{summary, synthesized_dissipation, write_reports_csv, CheckReport};

const EXIT_PARSE: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_MAJORANT: u8 = 4;
const EXIT_CHECK: u8 = 5;

/// Simulate, synthesize and verify dynamic-adaptation controllers.
#[derive(Parser)]
#[command(name = "dads", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the horizon.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Output directory (default: the scenario's, else the working directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the closed loop and write the trajectory as CSV.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the recursive design and certify every stage.
    Synthesize {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the scenario's checks and write a report.
    Verify {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate several scenarios and tabulate them.
    Compare {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn load(path: &Path, common: &Common) -> Result<Scenario> {
    let mut sc = Scenario::load(path)?;
    sc.apply_overrides(common.seed, common.dt, common.t_end)?;
    Ok(sc)
}

fn out_dir(sc: Option<&Scenario>, common: &Common) -> Result<PathBuf> {
    let dir = match (&common.out, sc.and_then(|s| s.output_dir.clone())) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => d,
        (None, None) => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_checks(dir: &Path, name: &str, reports: &[CheckReport]) -> Result<PathBuf> {
    let path = dir.join(format!("{name}_checks.csv"));
    write_reports_csv(reports, fs::File::create(&path)?)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Simulate { scenario, common } => {
            let sc = load(&scenario, &common)?;
            let sys = sc.build_system()?;
            let built = sc.build_controller(&sys)?;
            let log = simulate(&sys, &built.controller, sc.sim_config()?)?;
            let stats = trajectory_stats(&log, 0.2)?;
            let path = out_dir(Some(&sc), &common)?.join(format!("{}.csv", sc.name));
            log.write_csv(fs::File::create(&path)?)?;
            println!("{}: {} rows -> {}", sc.name, log.len(), path.display());
            println!(
                "sup_output_tail {:.6e}  sup_gain {:.6e}  final_z_or_theta_norm {:.6e}  control_energy {:.6e}  control_energy_tail {:.6e}",
                stats.sup_output_tail,
                stats.sup_gain,
                stats.final_z_or_theta_norm,
                stats.control_energy,
                stats.control_energy_tail
            );
            Ok(0)
        }
        Cmd::Synthesize { scenario, common } => {
            let sc = load(&scenario, &common)?;
            if !matches!(sc.controller, ControllerSpec::DadsSynthesized { .. }) {
                return Err(ScenarioError::Invalid(
                    "synthesize needs a `dads-synthesized` controller".into(),
                )
                .into());
            }
            let sys = sc.build_system()?;
            let built = sc.build_controller(&sys)?;
            let syn = built
                .synthesis
                .as_ref()
                .expect("synthesized controller carries its synthesis");
            let reports =
                synthesized_dissipation(&sys, syn, 200, 500, sc.seed, &sc.sample_box, 1e-7)?;
            let mut text = syn.report();
            text.push_str("\ncertificates:\n");
            text.push_str(&summary(&reports));
            let dir = out_dir(Some(&sc), &common)?;
            let path = dir.join(format!("{}_synthesis.txt", sc.name));
            fs::write(&path, &text)?;
            write_checks(&dir, &sc.name, &reports)?;
            print!("{text}");
            println!("report -> {}", path.display());
            Ok(if reports.iter().all(|r| r.passed) {
                0
            } else {
                EXIT_CHECK
            })
        }
        Cmd::Verify { scenario, common } => {
            let sc = load(&scenario, &common)?;
            if sc.checks.is_empty() {
                return Err(ScenarioError::Invalid("scenario lists no checks".into()).into());
            }
            let sys = sc.build_system()?;
            let built = sc.build_controller(&sys)?;
            let reports = sc.run_checks(&sys, &built)?;
            let path = write_checks(&out_dir(Some(&sc), &common)?, &sc.name, &reports)?;
            print!("{}", summary(&reports));
            println!("report -> {}", path.display());
            Ok(if reports.iter().all(|r| r.passed) {
                0
            } else {
                EXIT_CHECK
            })
        }
        Cmd::Compare { scenarios, common } => {
            let scs = scenarios
                .iter()
                .map(|p| load(p, &common))
                .collect::<Result<Vec<_>>>()?;
            let cmp = compare(&scs)?;
            print!("{}", cmp.table());
            let dir = out_dir(None, &common)?;
            let path = dir.join("compare.csv");
            cmp.write_csv(fs::File::create(&path)?)?;
            for (sc, log) in scs.iter().zip(&cmp.logs) {
                log.write_csv(fs::File::create(dir.join(format!("{}.csv", sc.name)))?)?;
            }
            println!("table -> {}", path.display());
            match &cmp.contrast {
                Some(r) => {
                    println!("{}", r.summary_line());
                    Ok(if r.passed { 0 } else { EXIT_CHECK })
                }
                None => Ok(0),
            }
        }
    }
}

fn sim_code(e: &SimError) -> Option<u8> {
    match e {
        SimError::Divergence { .. } | SimError::Solver { .. } => Some(EXIT_DIVERGENCE),
        SimError::Config(_) => Some(EXIT_PARSE),
        _ => None,
    }
}

fn synthesis_code(e: &SynthesisError) -> Option<u8> {
    matches!(e, SynthesisError::MajorantViolation { .. }).then_some(EXIT_MAJORANT)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let code = if let Some(e) = cause.downcast_ref::<ScenarioError>() {
            match e {
                ScenarioError::Io { .. }
                | ScenarioError::Parse { .. }
                | ScenarioError::Invalid(_)
                | ScenarioError::Controller(_) => Some(EXIT_PARSE),
                ScenarioError::Sim(e) => sim_code(e),
                ScenarioError::Synthesis(e) => synthesis_code(e),
                ScenarioError::Verify(_) => None,
            }
        } else if let Some(e) = cause.downcast_ref::<SimError>() {
            sim_code(e)
        } else {
            cause
                .downcast_ref::<SynthesisError>()
                .and_then(synthesis_code)
        };
        if let Some(c) = code {
            return c;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
