//! Command-line front end: scenario loading, output routing, and the
//! run / compare / certify / validate commands.
//!
//! Exit codes: 0 on success, 1 on parse or validation failures
//! (including a validate run that finds budget violations), 2 when the
//! simulation itself diverges.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{convergence_report, trigger_stats, AnalysisError};
use crate::io::{
    atomic_write, builtin_scenario, builtin_scenario_names, parse_scenario, render_svg, write_csv,
    write_certificate_report, write_compare_report, write_report, write_validation_report,
    IoError, OutputPaths, ParsedScenario,
};
use crate::simulator::{simulate, simulate_periodic_baseline, run_ideal_validation, SimError};
use crate::triggering::derive_certificate;

/// Settling threshold used by run and compare reports.
const CONVERGENCE_THRESHOLD: f64 = 0.05;

/// Baseline sampling period for compare when the scenario does not set
/// one.
const DEFAULT_BASELINE_DELTA: f64 = 0.05;

#[derive(Parser)]
#[command(
    name = "etc-sim",
    version,
    about = "Event-triggered observer-based control: simulation and trigger-budget certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario; write its trajectory CSV, plot SVG, and report.
    Run(CommonArgs),
    /// Simulate event-triggered and periodic variants; write one combined report.
    Compare(CommonArgs),
    /// Derive the trigger-budget certificate without simulating.
    Certify(CommonArgs),
    /// Simulate under the certified ideal policies and audit every sample
    /// against the transmission-error budget.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file path or builtin scenario name.
    scenario: String,
    /// Override the integration step from the scenario file.
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory. Falls back to ETC_SIM_OUT, then the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized variants. The shipped scenarios are fully
    /// deterministic and ignore it.
    #[arg(long)]
    seed: Option<u64>,
}

enum CliError {
    /// Bad input: unparseable scenario, dimension mismatch, gains that
    /// admit no certificate, or an audit that found violations.
    Invalid(String),
    /// The simulation itself failed: divergence or suspected Zeno behavior.
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonFinite { .. } | SimError::ZenoSuspect { .. } => {
                CliError::Runtime(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

/// Runs the CLI against the given argument list and returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here with a zero exit code
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn load_scenario(args: &CommonArgs) -> Result<ParsedScenario, CliError> {
    let path = Path::new(&args.scenario);
    let mut parsed = if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let mut parsed = parse_scenario(&text)?;
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            parsed.name = stem.to_string();
        }
        parsed
    } else if let Some(parsed) = builtin_scenario(&args.scenario) {
        parsed
    } else {
        return Err(CliError::Invalid(format!(
            "no scenario file or builtin named '{}' (builtins: {})",
            args.scenario,
            builtin_scenario_names().join(", ")
        )));
    };
    if let Some(dt) = args.dt {
        parsed.scenario.dt = dt;
        parsed.scenario.validate().map_err(CliError::from)?;
    }
    Ok(parsed)
}

fn out_dir(args: &CommonArgs) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    match std::env::var("ETC_SIM_OUT") {
        Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("."),
    }
}

struct ResolvedOutputs {
    csv: PathBuf,
    svg: PathBuf,
    report: PathBuf,
}

fn resolve_outputs(args: &CommonArgs, parsed: &ParsedScenario) -> ResolvedOutputs {
    let dir = out_dir(args);
    let OutputPaths { csv, svg, report } = &parsed.outputs;
    let base = &parsed.name;
    ResolvedOutputs {
        csv: dir.join(csv.clone().unwrap_or_else(|| format!("{base}.csv"))),
        svg: dir.join(svg.clone().unwrap_or_else(|| format!("{base}.svg"))),
        report: dir.join(report.clone().unwrap_or_else(|| format!("{base}-report.txt"))),
    }
}

/// "name.csv" -> "name-periodic.csv"
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}{suffix}.{ext}"),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn emit(path: &Path, contents: &str) -> Result<(), CliError> {
    atomic_write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_run_summary(result: &crate::simulator::SimulationResult) {
    if let Some(last) = result.trajectory.last() {
        println!(
            "final t = {}, |x| = {:.6e}, |x - xhat| = {:.6e}",
            last.t, last.norm_x, last.norm_z
        );
    }
    for node in &result.summary {
        println!("{}: {} transmissions", node.node.label(), node.count);
    }
}

fn cmd_run(args: &CommonArgs) -> Result<(), CliError> {
    let parsed = load_scenario(args)?;
    let paths = resolve_outputs(args, &parsed);
    let result = simulate(&parsed.scenario)?;
    let stats = trigger_stats(&result)?;
    let convergence = convergence_report(&result, CONVERGENCE_THRESHOLD)?;
    let certificate = derive_certificate(&parsed.scenario.model).ok().map(|(_, c)| c);
    emit(&paths.csv, &write_csv(&result))?;
    emit(&paths.svg, &render_svg(&result))?;
    emit(&paths.report, &write_report(certificate.as_ref(), &stats, &convergence))?;
    print_run_summary(&result);
    Ok(())
}

fn cmd_compare(args: &CommonArgs) -> Result<(), CliError> {
    let parsed = load_scenario(args)?;
    let paths = resolve_outputs(args, &parsed);
    let delta = parsed.baseline_delta.unwrap_or(DEFAULT_BASELINE_DELTA);
    let event = simulate(&parsed.scenario)?;
    let periodic = simulate_periodic_baseline(&parsed.scenario, delta)?;
    let event_stats = trigger_stats(&event)?;
    let event_conv = convergence_report(&event, CONVERGENCE_THRESHOLD)?;
    let periodic_stats = trigger_stats(&periodic)?;
    let periodic_conv = convergence_report(&periodic, CONVERGENCE_THRESHOLD)?;
    let certificate = derive_certificate(&parsed.scenario.model).ok().map(|(_, c)| c);
    emit(&paths.csv, &write_csv(&event))?;
    emit(&with_suffix(&paths.csv, "-periodic"), &write_csv(&periodic))?;
    emit(&paths.svg, &render_svg(&event))?;
    let report = write_compare_report(
        certificate.as_ref(),
        (&event_stats, &event_conv),
        (&periodic_stats, &periodic_conv),
    );
    emit(&paths.report, &report)?;
    println!("event-triggered:");
    print_run_summary(&event);
    println!("periodic (delta = {delta}):");
    print_run_summary(&periodic);
    Ok(())
}

fn cmd_certify(args: &CommonArgs) -> Result<(), CliError> {
    let parsed = load_scenario(args)?;
    let paths = resolve_outputs(args, &parsed);
    let (_, certificate) = derive_certificate(&parsed.scenario.model)
        .map_err(|e| CliError::Invalid(format!("cannot certify: {e}")))?;
    emit(&paths.report, &write_certificate_report(&certificate))?;
    println!(
        "sigma_prime = {:e}, nodes = {}, min tau_min = {:e}",
        certificate.sigma_prime,
        certificate.kappa.len(),
        certificate.tau_min.iter().cloned().fold(f64::INFINITY, f64::min)
    );
    Ok(())
}

fn cmd_validate(args: &CommonArgs) -> Result<(), CliError> {
    let parsed = load_scenario(args)?;
    let paths = resolve_outputs(args, &parsed);
    let (_, certificate) = derive_certificate(&parsed.scenario.model)
        .map_err(|e| CliError::Invalid(format!("cannot certify: {e}")))?;
    let report = run_ideal_validation(&parsed.scenario, &certificate)?;
    emit(&paths.report, &write_validation_report(&certificate, &report))?;
    println!(
        "checked {} samples, {} violations",
        report.checked_samples,
        report.violations.len()
    );
    if !report.violations.is_empty() {
        return Err(CliError::Invalid(format!(
            "{} budget violations; see {}",
            report.violations.len(),
            paths.report.display()
        )));
    }
    Ok(())
}
