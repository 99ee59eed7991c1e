use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rasmc_core::scenario::Scenario;
use rasmc_core::sim::{prepare, run_scenario, RunSetup, SimRun};
use rasmc_core::smc::gain_bound_report;
use rasmc_core::telemetry::{
    read_telemetry, write_run_header, write_telemetry, RunHeader, PLOT_SETS, TELEMETRY_VERSION,
};
use rasmc_core::verify::{run_acceptance, AcceptanceOptions};
use rasmc_core::Error;
use rayon::prelude::*;

const VERIFICATION_FAILED: u8 = 6;

#[derive(Parser)]
#[command(name = "rasmc", version, about = "Adaptive sliding-mode flight control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file; the shipped damaged scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the run length [s].
    #[arg(long)]
    t_end: Option<f64>,
    /// Disable the damage event.
    #[arg(long)]
    no_damage: bool,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "RASMC_OUT_DIR", default_value = "rasmc-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write telemetry.csv, run_header.json and summary.json.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Seed for the randomized damage draws.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of randomized damage draws.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Print the gain-bound system, its spectral radius and k_d.
    Gains {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Print the trim point.
    Trim {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Split a telemetry file into per-panel column subsets.
    Plotdata {
        /// Telemetry CSV written by `run`.
        #[arg(long)]
        telemetry: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run several scenarios concurrently, one output directory each.
    Batch {
        /// Scenario files.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        no_damage: bool,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => e.class().exit_code() as u8,
            Failure::Verification(_) => VERIFICATION_FAILED,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Core(Error::Schema(issues)) => {
                    eprintln!("error: scenario has {} schema problem(s)", issues.len());
                    for issue in issues {
                        eprintln!("  {issue}");
                    }
                }
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Verification(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(failure.exit_code())
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Error> {
    let mut scenario = match &args.scenario {
        Some(path) => Scenario::from_path(path)?,
        None => Scenario::shipped_default()?,
    };
    if let Some(t_end) = args.t_end {
        scenario = scenario.with_t_end(t_end);
    }
    if args.no_damage {
        scenario = scenario.without_damage();
    }
    scenario.validate()?;
    Ok(scenario)
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, out } => {
            let scenario = load(&scenario)?;
            let run = simulate(&scenario, &out.out)?;
            print_summary(&run);
            Ok(())
        }
        Command::Verify { scenario, seed, draws } => {
            let scenario = load(&scenario)?;
            let options = AcceptanceOptions { seed, draws };
            let report = run_acceptance(&scenario, &options);
            for line in report.lines() {
                println!("{line}");
            }
            if report.all_passed() {
                Ok(())
            } else {
                Err(Failure::Verification(format!(
                    "{} of {} criteria failed",
                    report.failures(),
                    report.criteria.len()
                )))
            }
        }
        Command::Gains { scenario } => {
            let scenario = load(&scenario)?;
            let report = gain_bound_report(&scenario.smc)?;
            let d = &report.system.d;
            println!("D =");
            for i in 0..3 {
                println!("  [{:>12.6} {:>12.6} {:>12.6}]", d[(i, 0)], d[(i, 1)], d[(i, 2)]);
            }
            let z = &report.system.z;
            println!("z      = [{:.6}, {:.6}, {:.6}]", z.x, z.y, z.z);
            println!("rho(D) = {:.6}", report.rho);
            println!("k_d    = [{:.6}, {:.6}, {:.6}]", report.k_d.x, report.k_d.y, report.k_d.z);
            Ok(())
        }
        Command::Trim { scenario } => {
            let scenario = load(&scenario)?;
            let setup = prepare(&scenario)?;
            let t = &setup.trim;
            println!("airspeed  {:.4} m/s", t.airspeed);
            println!("alpha     {:.6} rad ({:.4} deg)", t.alpha, t.alpha.to_degrees());
            println!("beta      {:.6} rad", t.beta);
            println!("phi       {:.6} rad", t.phi);
            println!("theta     {:.6} rad", t.theta);
            println!("aileron   {:.6} rad", t.deflection[0]);
            println!("elevator  {:.6} rad ({:.4} deg)", t.deflection[1], t.deflection[1].to_degrees());
            println!("rudder    {:.6} rad", t.deflection[2]);
            println!("thrust    {:.4} N", t.thrust);
            println!("throttle  {:.6}", t.throttle);
            Ok(())
        }
        Command::Plotdata { telemetry, out } => {
            let records = read_telemetry(&telemetry)?;
            std::fs::create_dir_all(&out.out).map_err(Error::from)?;
            for set in PLOT_SETS {
                let path = out.out.join(format!("{}.csv", set.name));
                write_columns(&telemetry, set.columns, &path)?;
                println!("{} ({} rows)", path.display(), records.len());
            }
            Ok(())
        }
        Command::Batch { scenarios, no_damage, out } => batch(&scenarios, no_damage, &out.out),
    }
}

fn simulate(scenario: &Scenario, out: &Path) -> Result<SimRun, Error> {
    std::fs::create_dir_all(out)?;
    match run_scenario(scenario) {
        Ok(run) => {
            write_artifacts(scenario, &run.setup, &run.records, out)?;
            let summary = serde_json::to_string_pretty(&run.summary).map_err(|e| Error::Telemetry(e.to_string()))?;
            std::fs::write(out.join("summary.json"), summary)?;
            Ok(run)
        }
        Err(failure) => {
            if let Some(setup) = &failure.setup {
                if !failure.partial.is_empty() {
                    write_artifacts(scenario, setup, &failure.partial, out)?;
                    eprintln!("partial telemetry ({} records) written to {}", failure.partial.len(), out.display());
                }
            }
            Err(failure.error)
        }
    }
}

fn write_artifacts(
    scenario: &Scenario,
    setup: &RunSetup,
    records: &[rasmc_core::telemetry::TelemetryRecord],
    out: &Path,
) -> Result<(), Error> {
    write_telemetry(records, &out.join("telemetry.csv"))?;
    let header = RunHeader {
        version: env!("CARGO_PKG_VERSION").into(),
        telemetry_version: TELEMETRY_VERSION.into(),
        config_hash: scenario.config_hash.clone(),
        overrides: scenario.overrides.clone(),
        k_d: setup.k_d,
        rho: setup.rho,
        trim: setup.trim,
        f_ctrl: scenario.sim.f_ctrl,
        dt_phys: scenario.sim.dt_phys,
    };
    write_run_header(&header, &out.join("run_header.json"))
}

fn print_summary(run: &SimRun) {
    let s = &run.summary;
    println!("ticks                 {}", s.ticks);
    println!("final time            {:.3} s", s.final_time);
    println!(
        "max attitude error    [{:.4}, {:.4}, {:.4}] deg",
        s.max_attitude_error_deg[0], s.max_attitude_error_deg[1], s.max_attitude_error_deg[2]
    );
    println!("max altitude error    {:.3} m", s.max_altitude_error);
    println!("max airspeed error    {:.3} m/s", s.max_airspeed_error);
    println!("max course error      {:.3} deg", s.max_course_error_deg);
    println!("final gains           [{:.4}, {:.4}, {:.4}]", s.final_gains[0], s.final_gains[1], s.final_gains[2]);
    println!("k_d                   [{:.4}, {:.4}, {:.4}]", s.k_d[0], s.k_d[1], s.k_d[2]);
    println!("reaching violations   {}", s.reaching_violations);
    println!("Xi bound violations   {}", s.xi_bound_violations);
    println!("iota bound violations {}", s.iota_bound_violations);
}

/// Copies the named columns of a telemetry file, in the given order.
fn write_columns(telemetry: &Path, columns: &[&str], path: &Path) -> Result<(), Error> {
    let mut reader = csv::Reader::from_path(telemetry)?;
    let headers = reader.headers()?.clone();
    let indices: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| Error::Telemetry(format!("column {c} missing from {}", telemetry.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(columns)?;
    for row in reader.records() {
        let row = row?;
        writer.write_record(indices.iter().map(|&i| &row[i]))?;
    }
    writer.flush()?;
    Ok(())
}

fn batch(paths: &[PathBuf], no_damage: bool, out: &Path) -> Result<(), Failure> {
    let results: Vec<(PathBuf, Result<SimRun, Error>)> = paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let args = ScenarioArgs { scenario: Some(path.clone()), t_end: None, no_damage };
            let stem = path.file_stem().map_or_else(|| format!("scenario{i}"), |s| s.to_string_lossy().into_owned());
            let dir = out.join(format!("{i:03}-{stem}"));
            (path.clone(), load(&args).and_then(|s| simulate(&s, &dir)))
        })
        .collect();
    let mut worst: Option<Error> = None;
    for (path, result) in results {
        match result {
            Ok(run) => println!("ok    {}  ({} ticks)", path.display(), run.summary.ticks),
            Err(e) => {
                println!("FAIL  {}  {e}", path.display());
                worst = worst.or(Some(e));
            }
        }
    }
    match worst {
        None => Ok(()),
        Some(e) => Err(Failure::Core(e)),
    }
}
