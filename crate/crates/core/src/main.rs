use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tangent_mbd::config::{parse_override, ConfigFile, ResolvedRun, RunSpec};
use tangent_mbd::export::{read_trajectory, write_timeline, write_trajectory};
use tangent_mbd::integrators::{Method, TrajectoryStatus};
use tangent_mbd::repro::run_suite;
use tangent_mbd::stability::{full_space_frequency, newmark_dt_limit, StabilityReport, TimelinePoint};
use tangent_mbd::{Error, Result};

const EXIT_DIVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "tangent-mbd", version, about = "Planar multibody simulation with tangent-space Newmark integration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory as CSV.
    Run(RunArgs),
    /// Largest natural frequency and Newmark step-size limit.
    Stability(StabilityArgs),
    /// Run a reproduction suite (or `all`) and report each check.
    Repro {
        #[arg(default_value = "all")]
        suite: String,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario name, e.g. pendulum-constrained.
    scenario: Option<String>,
    /// Config file of `section.key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    /// fox-goodwin, trapezoidal, tuned or central-difference.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Scenario parameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    tol_c: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Add an omega_max column with the reduced frequency of every step.
    #[arg(long)]
    record_omega: bool,
    /// CSV destination; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory CSV written by `run`; adds a per-step timeline.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Timeline CSV destination; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Use the unreduced pencil (K_L, M) instead of the tangent-reduced system.
    #[arg(long)]
    full_space: bool,
}

fn spec_from(common: &Common) -> Result<RunSpec> {
    let mut spec = match &common.config {
        Some(path) => RunSpec::from_config(&ConfigFile::load(path)?)?,
        None => RunSpec::default(),
    };
    let mut cli = RunSpec {
        scenario: common.scenario.clone(),
        method: common.method,
        preset: common.preset.clone(),
        alpha: common.alpha,
        beta: common.beta,
        ..RunSpec::default()
    };
    for s in &common.set {
        let (k, v) = parse_override(s)?;
        cli.overrides.insert(k, v);
    }
    spec.merge(cli);
    Ok(spec)
}

fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let mut spec = spec_from(&args.common)?;
    spec.merge(RunSpec {
        dt: args.dt,
        t_end: args.t_end,
        tol: args.tol,
        tol_c: args.tol_c,
        max_iters: args.max_iters,
        record_omega: args.record_omega,
        output: args.output,
        ..RunSpec::default()
    });
    let ResolvedRun {
        scenario,
        method,
        params,
        step,
        t_end,
    } = spec.resolve()?;
    let tr = scenario.run(method, params, &step, t_end)?;
    let to_file = spec.output.is_some();
    let mut out = open_output(spec.output.as_ref())?;
    write_trajectory(&mut out, scenario.name, &tr)?;
    out.flush()?;
    drop(out);

    let steps = tr.records.len() - 1;
    let secs = tr.wall_time.as_secs_f64();
    let line = match &tr.status {
        TrajectoryStatus::Completed => format!("Converged: {steps} steps, wall time {secs:.3} s"),
        TrajectoryStatus::Diverged { t, reason } => {
            format!("Diverged at t = {t}: {reason}; {steps} steps, wall time {secs:.3} s")
        }
    };
    // With the CSV on standard output the status goes to standard error.
    if to_file {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(if tr.is_diverged() { EXIT_DIVERGED } else { 0 })
}

fn cmd_stability(args: StabilityArgs) -> Result<u8> {
    let spec = spec_from(&args.common)?;
    let run = spec.resolve()?;
    let sc = &run.scenario;
    let omega_at = |s: &tangent_mbd::model::SystemState| match (args.full_space, sc.model()) {
        (true, Some(model)) => full_space_frequency(model, s),
        (true, None) => Err(Error::Config(format!("{} has no full-space form", sc.name))),
        (false, _) => sc.omega_max_at(s, run.step.rank_tol),
    };
    let initial = StabilityReport::new(omega_at(&sc.initial_state())?, run.params);
    let mut report = io::stdout().lock();
    writeln!(report, "scenario: {}", sc.name)?;
    writeln!(report, "params: {}", run.params)?;
    writeln!(report, "omega_max: {:.10} rad/s", initial.omega_max)?;
    writeln!(report, "dt_limit: {:.6e} s", initial.dt_limit)?;
    drop(report);

    if let Some(path) = &args.trajectory {
        let file = File::open(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        let table = read_trajectory(file)?;
        let points = table
            .states
            .iter()
            .zip(&table.omega_max)
            .map(|(s, recorded)| {
                let w = match recorded {
                    Some(w) if !args.full_space => *w,
                    _ => omega_at(s)?,
                };
                Ok(TimelinePoint {
                    t: s.t,
                    omega_max: w,
                    dt_limit: newmark_dt_limit(w, run.params),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let summary = StabilityReport::from_timeline(points, run.params);
        let mut out = open_output(args.output.as_ref())?;
        write_timeline(&mut out, sc.name, &summary.timeline)?;
        out.flush()?;
        drop(out);
        let line = format!(
            "peak omega_max: {:.10} rad/s, peak dt_limit: {:.6e} s",
            summary.omega_max, summary.dt_limit
        );
        if args.output.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(0)
}

fn cmd_repro(suite: &str) -> Result<u8> {
    let checks = run_suite(suite)?;
    let failed = checks.iter().filter(|c| c.failed()).count();
    for c in &checks {
        println!("{c}");
    }
    println!(
        "{} checks, {failed} failed",
        checks.iter().filter(|c| c.outcome != tangent_mbd::repro::Outcome::Info).count()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // Usage errors exit 1; 2 is reserved for diverged runs.
            return ExitCode::from(u8::from(usage));
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Repro { suite } => cmd_repro(&suite),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
