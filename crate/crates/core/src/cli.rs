//! Command-line frontend. [`run`] is the whole program; the binary only
//! forwards `argv` and the exit code.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure. Failures print one line to stderr:
//! `error kind=<kind> code=<code> message=<text>`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, ExperimentConfig, Method};
use crate::caseio::{parse_case_bytes, NetworkCase};
use crate::error::{Error, Result};
use crate::interval;
use crate::linalg;
use crate::measmodel::{self, ChiPMode, DeltaPMode, PmuPlacement};
use crate::plot;

#[derive(Debug, Parser)]
#[command(name = "bounded-lse", version, about = "Linear state estimation under bounded parameter and measurement uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a case and placement and report observability.
    Validate(InputArgs),
    /// Perturb the network, solve the power flow and write noisy measurements.
    Generate(GenerateArgs),
    /// Run one estimator on one generated data set.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo benchmark over several trials.
    Bench(BenchArgs),
    /// Render a figure CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// MATPOWER-style case file, or a bundled name (case5, case14, case30, case57, case118).
    #[arg(long)]
    case: String,
    /// PMU placement file; defaults to the bundled placement for bundled cases.
    #[arg(long)]
    placement: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Maximum relative deviation of branch r and x.
    #[arg(long, default_value_t = 0.3)]
    dev: f64,
    /// Bound on the total vector error of each phasor.
    #[arg(long, default_value_t = 0.01)]
    tve: f64,
    /// Random seed (required).
    #[arg(long)]
    seed: u64,
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Interval,
    Convex,
    Glfp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Interval => Method::Interval,
            MethodArg::Convex => Method::Convex,
            MethodArg::Glfp => Method::Glfp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChiPArg {
    Matrix,
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DeltaPArg {
    Box,
    Realized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ModeArgs {
    /// How the norm bound on the matrix perturbation is chosen for the convex estimator.
    #[arg(long = "chi-p", value_enum, default_value = "matrix")]
    chi_p: ChiPArg,
    /// How per-parameter deviations are chosen for the interval estimator.
    #[arg(long = "delta-p", value_enum, default_value = "box")]
    delta_p: DeltaPArg,
    /// Estimate the weight matrix from this many noise draws per channel
    /// instead of using the known noise level.
    #[arg(long = "w-samples")]
    w_samples: Option<usize>,
    /// Worker threads for GLFP sign vectors and bench trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Format of results written to stdout.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[command(flatten)]
    modes: ModeArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Methods to run; repeat the flag or separate with commas.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["interval", "convex"])]
    method: Vec<MethodArg>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[command(flatten)]
    modes: ModeArgs,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Figure CSV produced by `bench`.
    input: PathBuf,
    /// Output directory for figure.svg; the SVG goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

/// Runs the program with `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let message = text
                    .lines()
                    .take_while(|l| !l.starts_with("Usage:"))
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .collect::<Vec<_>>()
                    .join(" ");
                let message = message.trim_start_matches("error: ");
                let _ = writeln!(stderr, "error kind=usage code=1 message={message}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate(a) => validate(&a, stdout),
        Command::Generate(a) => generate(&a, stdout),
        Command::Estimate(a) => estimate(&a, stdout),
        Command::Bench(a) => bench_cmd(&a, stdout),
        Command::Plot(a) => plot_cmd(&a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let message = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "error kind={} code={code} message={message}", e.kind());
            code
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Case name as used in reports, plus the parsed case and placement.
fn load_inputs(args: &InputArgs) -> Result<(String, NetworkCase, PmuPlacement)> {
    let path = Path::new(&args.case);
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(&args.case)
        .to_string();
    let (case, bundled_placement) = if path.exists() {
        (parse_case_bytes(&read_bytes(path)?)?, None)
    } else if let Some((case_text, placement_text)) = crate::data::bundled(&stem) {
        (crate::caseio::parse_case(case_text)?, Some(placement_text))
    } else {
        return Err(Error::Io(format!("{}: no such file or bundled case", args.case)));
    };
    let placement = match (&args.placement, bundled_placement) {
        (Some(p), _) => {
            let bytes = read_bytes(p)?;
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| Error::InvalidPlacement(format!("{} is not UTF-8", p.display())))?;
            PmuPlacement::parse(text)?
        }
        (None, Some(text)) => PmuPlacement::parse(text)?,
        (None, None) => match crate::data::bundled(&stem) {
            Some((_, text)) => PmuPlacement::parse(text)?,
            None => return Err(Error::InvalidInput("--placement is required for non-bundled cases".into())),
        },
    };
    Ok((stem, case, placement))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn validate(args: &InputArgs, stdout: &mut dyn Write) -> Result<()> {
    let (name, case, placement) = load_inputs(args)?;
    case.check_connected()?;
    let model = measmodel::build_measurement_matrix(&case, &placement)?;
    let rank = linalg::rank(&model.p0, 1e-10);
    writeln!(
        stdout,
        "case={name} buses={} branches={} generators={} pmus={} measurements={} states={} rank={rank} observable={}",
        case.bus_count(),
        case.branches.len(),
        case.generators.len(),
        placement.buses.len(),
        model.n_rows(),
        model.n_states(),
        if rank == model.n_states() { "yes" } else { "no" }
    )?;
    Ok(())
}

fn generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<()> {
    let d = &args.data;
    let (_, case, placement) = load_inputs(&d.input)?;
    let (ps, ns) = bench::trial_seeds(d.seed, 0);
    let perturbed = measmodel::perturb_parameters(&case, d.dev, ps)?;
    let mv = measmodel::simulate_measurements(&perturbed, &placement, d.tve, ns)?;
    let model = measmodel::build_measurement_matrix(&case, &placement)?;
    let csv = measmodel::measurements_csv(&model, &mv);
    match &d.out {
        Some(dir) => {
            write_file(dir, "measurements.csv", &csv)?;
            write_file(dir, "perturbed_case.m", &crate::caseio::write_case(&perturbed))?;
            writeln!(stdout, "wrote {} measurements to {}", model.n_rows(), dir.display())?;
        }
        None => write!(stdout, "{csv}")?,
    }
    Ok(())
}

fn chi_mode(a: ChiPArg) -> ChiPMode {
    match a {
        ChiPArg::Matrix => ChiPMode::Matrix,
        ChiPArg::Paper => ChiPMode::Paper,
    }
}

fn delta_mode(a: DeltaPArg) -> DeltaPMode {
    match a {
        DeltaPArg::Box => DeltaPMode::Box,
        DeltaPArg::Realized => DeltaPMode::Realized,
    }
}

fn estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let d = &args.data;
    let (_, case, placement) = load_inputs(&d.input)?;
    let method: Method = args.method.into();
    if method == Method::Glfp && 2 * case.bus_count() > crate::glfp::DEFAULT_MAX_STATES {
        return Err(Error::DimensionGuard(format!(
            "GLFP enumerates 2^{} sign vectors; the limit is {} states",
            2 * case.bus_count(),
            crate::glfp::DEFAULT_MAX_STATES
        )));
    }
    let model = measmodel::build_measurement_matrix(&case, &placement)?;
    let data = bench::generate_trial(
        &case,
        &placement,
        &model,
        d.dev,
        d.tve,
        bench::trial_seeds(d.seed, 0),
        chi_mode(args.modes.chi_p),
        delta_mode(args.modes.delta_p),
    )?;
    let mut data = data;
    if let Some(samples) = args.modes.w_samples {
        bench::use_empirical_weights(&mut data, d.tve, samples, bench::trial_seeds(d.seed, 0).1);
    }
    let x_true = &data.measurements.x_true;
    let start = std::time::Instant::now();
    let (file_name, csv, diagnostics) = match method {
        Method::Interval => {
            let bounds = bench::run_interval(&model, &data)?;
            let runtime = start.elapsed().as_secs_f64();
            let (rate, _) = bench::containment(&bounds, x_true);
            let json = serde_json::json!({
                "method": "interval",
                "iterations": bounds.iterations,
                "converged": bounds.converged,
                "containment_rate": rate,
                "mean_bound_width": bounds.widths().iter().sum::<f64>() / bounds.widths().len() as f64,
                "runtime_seconds": runtime,
            });
            ("bounds.csv", interval::bounds_csv(&model, &bounds), json)
        }
        Method::Convex => {
            let sol = bench::run_convex(&model, &data)?;
            let runtime = start.elapsed().as_secs_f64();
            let json = serde_json::json!({
                "method": "convex",
                "theta": if sol.theta.is_finite() { Some(sol.theta) } else { None },
                "chi_p": data.chi_p,
                "chi_y": data.spec.chi_y,
                "residual_norm": sol.residual_norm,
                "secular_residual": sol.secular_residual,
                "root_iterations": sol.root_iterations,
                "rmse_pu": bench::rmse(&sol.x_hat, x_true)?,
                "runtime_seconds": runtime,
            });
            ("estimates.csv", bench::estimates_csv(&model, &sol.x_hat), json)
        }
        Method::Glfp => {
            let problem = crate::glfp::GlfpProblem::new(model.p0.clone(), data.measurements.y.clone())?;
            let sol = crate::glfp::solve_glfp(
                &problem,
                &crate::glfp::GlfpOptions {
                    jobs: args.modes.jobs,
                    ..Default::default()
                },
            )?;
            let json = serde_json::json!({
                "method": "glfp",
                "xi_hat": sol.xi_hat,
                "x_star": sol.x_star,
                "evaluated_signs": sol.evaluated_signs,
                "pruned_signs": sol.pruned_signs,
                "rmse_pu": bench::rmse(&sol.x_star, x_true)?,
                "runtime_seconds": sol.runtime_seconds,
            });
            ("estimates.csv", bench::estimates_csv(&model, &sol.x_star), json)
        }
    };
    let json = serde_json::to_string_pretty(&diagnostics).expect("json value serializes");
    match &d.out {
        Some(dir) => {
            write_file(dir, file_name, &csv)?;
            write_file(dir, "report.json", &json)?;
            writeln!(stdout, "wrote {file_name} and report.json to {}", dir.display())?;
        }
        None => match args.modes.format {
            Format::Csv => write!(stdout, "{csv}")?,
            Format::Json => writeln!(stdout, "{json}")?,
        },
    }
    Ok(())
}

fn bench_cmd(args: &BenchArgs, stdout: &mut dyn Write) -> Result<()> {
    let d = &args.data;
    let (name, case, placement) = load_inputs(&d.input)?;
    let mut config = ExperimentConfig::new(&name, case, placement, d.seed);
    config.max_rel_dev = d.dev;
    config.tve_bound = d.tve;
    config.trials = args.trials;
    config.methods = args.method.iter().map(|m| Method::from(*m)).collect();
    config.chi_p = chi_mode(args.modes.chi_p);
    config.delta_p = delta_mode(args.modes.delta_p);
    config.weight_samples = args.modes.w_samples;
    config.jobs = args.modes.jobs;
    let report = bench::run_experiment(&config)?;
    let csv = bench::report_csv(&report);
    let json = bench::summary_json(&report);
    match &d.out {
        Some(dir) => {
            let figure = bench::figure_csv(&report.model, &report.results[0]);
            write_file(dir, "report.csv", &csv)?;
            write_file(dir, "report.json", &json)?;
            write_file(dir, "figure.csv", &figure)?;
            let rows = plot::parse_figure_csv(&figure)?;
            write_file(dir, "figure.svg", &plot::render_svg(&rows))?;
            for s in &report.summary {
                writeln!(
                    stdout,
                    "{} ok={} failed={} median_runtime_s={} median_rmse_pu={} mean_containment={}",
                    s.method,
                    s.successes,
                    s.failures,
                    fmt_opt(s.median_runtime_s),
                    fmt_opt(s.median_rmse_pu),
                    fmt_opt(s.mean_containment_rate)
                )?;
            }
        }
        None => match args.modes.format {
            Format::Csv => write!(stdout, "{csv}")?,
            Format::Json => writeln!(stdout, "{json}")?,
        },
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

fn plot_cmd(args: &PlotArgs, stdout: &mut dyn Write) -> Result<()> {
    let bytes = read_bytes(&args.input)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidInput("figure CSV is not UTF-8".into()))?;
    let svg = plot::render_svg(&plot::parse_figure_csv(&text)?);
    match &args.out {
        Some(dir) => {
            write_file(dir, "figure.svg", &svg)?;
            writeln!(stdout, "wrote figure.svg to {}", dir.display())?;
        }
        None => write!(stdout, "{svg}")?,
    }
    Ok(())
}
