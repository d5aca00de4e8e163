//! Monte Carlo experiment harness: perturb, solve the power flow, add noise,
//! estimate with each method against the nominal model, score.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bdu::{solve_bdu, BduConfig, BduSolution};
use crate::caseio::NetworkCase;
use crate::error::{Error, Result};
use crate::glfp::{solve_glfp, GlfpOptions, GlfpProblem, GlfpSolution};
use crate::interval::{self, StateBounds};
use crate::measmodel::{
    build_measurement_matrix, chi_p_parameter_difference, perturb_parameters,
    empirical_sigmas, simulate_measurements, uncertainty_for_model, use_realized_deltas, weight_diagonal, ChiPMode,
    DeltaPMode, MeasurementModel, MeasurementVector, PmuPlacement, RowPart, UncertaintySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Interval,
    Convex,
    Glfp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Interval, Method::Convex, Method::Glfp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Interval => "interval",
            Method::Convex => "convex",
            Method::Glfp => "glfp",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(Method::Interval),
            "convex" => Ok(Method::Convex),
            "glfp" => Ok(Method::Glfp),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub case_name: String,
    pub case: NetworkCase,
    pub placement: PmuPlacement,
    pub max_rel_dev: f64,
    pub tve_bound: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub chi_p: ChiPMode,
    pub delta_p: DeltaPMode,
    /// Estimate `W` from this many noise draws instead of the known sigma.
    pub weight_samples: Option<usize>,
    /// Trials run concurrently when above one.
    pub jobs: usize,
    pub glfp_max_states: usize,
}

impl ExperimentConfig {
    pub fn new(case_name: &str, case: NetworkCase, placement: PmuPlacement, seed: u64) -> Self {
        ExperimentConfig {
            case_name: case_name.to_string(),
            case,
            placement,
            max_rel_dev: 0.3,
            tve_bound: 0.01,
            seed,
            methods: vec![Method::Interval, Method::Convex],
            trials: 10,
            chi_p: ChiPMode::Matrix,
            delta_p: DeltaPMode::Box,
            weight_samples: None,
            jobs: 1,
            glfp_max_states: crate::glfp::DEFAULT_MAX_STATES,
        }
    }

    /// Loads one of the bundled systems with its bundled placement.
    pub fn bundled(case_name: &str, seed: u64) -> Result<Self> {
        let (case_text, placement_text) = crate::data::bundled(case_name)
            .ok_or_else(|| Error::InvalidInput(format!("no bundled case named '{case_name}'")))?;
        let case = crate::caseio::parse_case(case_text)?;
        let placement = PmuPlacement::parse(placement_text)?;
        Ok(Self::new(case_name, case, placement, seed))
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.max_rel_dev) {
            return Err(Error::InvalidInput(format!("dev must lie in [0, 1), got {}", self.max_rel_dev)));
        }
        if !(self.tve_bound >= 0.0 && self.tve_bound.is_finite()) {
            return Err(Error::InvalidInput(format!("tve must be finite and >= 0, got {}", self.tve_bound)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("at least one trial is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods selected".into()));
        }
        let states = 2 * self.case.bus_count();
        if self.methods.contains(&Method::Glfp) && states > self.glfp_max_states {
            return Err(Error::DimensionGuard(format!(
                "GLFP enumerates 2^{states} sign vectors; the limit is {} states",
                self.glfp_max_states
            )));
        }
        Ok(())
    }
}

/// Independent perturbation and noise seeds for one trial.
pub fn trial_seeds(base: u64, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(base ^ trial as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Synthetic data for one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub perturbed: NetworkCase,
    pub measurements: MeasurementVector,
    pub spec: UncertaintySpec,
    pub chi_p: f64,
    pub weights: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn generate_trial(
    case: &NetworkCase,
    placement: &PmuPlacement,
    model: &MeasurementModel,
    max_rel_dev: f64,
    tve_bound: f64,
    seeds: (u64, u64),
    chi_mode: ChiPMode,
    delta_mode: DeltaPMode,
) -> Result<TrialData> {
    let perturbed = perturb_parameters(case, max_rel_dev, seeds.0)?;
    let measurements = simulate_measurements(&perturbed, placement, tve_bound, seeds.1)?;
    let mut spec = uncertainty_for_model(case, model, max_rel_dev, tve_bound, &measurements.true_y)?;
    if delta_mode == DeltaPMode::Realized {
        use_realized_deltas(&mut spec, &perturbed, model.n_rows(), model.n_states())?;
    }
    let chi_p = match chi_mode {
        ChiPMode::Matrix => spec.chi_p,
        ChiPMode::Paper => chi_p_parameter_difference(case, &perturbed),
    };
    let weights = weight_diagonal(&measurements.sigma);
    Ok(TrialData {
        perturbed,
        measurements,
        spec,
        chi_p,
        weights,
    })
}

/// Replaces the known-sigma weights with sample variances of `samples`
/// independent noise draws per channel.
pub fn use_empirical_weights(data: &mut TrialData, tve_bound: f64, samples: usize, seed: u64) {
    let sigmas = empirical_sigmas(&data.measurements.true_y, tve_bound, samples, seed ^ 0x5eed_0f_77);
    data.weights = weight_diagonal(&sigmas);
}

pub fn rmse(x_hat: &[f64], x_true: &[f64]) -> Result<f64> {
    if x_hat.len() != x_true.len() || x_hat.is_empty() {
        return Err(Error::Dimension(format!(
            "rmse of vectors with lengths {} and {}",
            x_hat.len(),
            x_true.len()
        )));
    }
    let sum: f64 = x_hat.iter().zip(x_true).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / x_hat.len() as f64).sqrt())
}

/// Fraction of components inside `[lower, upper]`, plus per-component flags.
pub fn containment(bounds: &StateBounds, x_true: &[f64]) -> (f64, Vec<bool>) {
    let flags: Vec<bool> = x_true
        .iter()
        .enumerate()
        .map(|(j, x)| bounds.lower[j] <= *x && *x <= bounds.upper[j])
        .collect();
    let rate = if flags.is_empty() {
        1.0
    } else {
        flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64
    };
    (rate, flags)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRecord {
    pub method: Method,
    pub runtime_s: Option<f64>,
    pub rmse_pu: Option<f64>,
    pub containment_rate: Option<f64>,
    pub mean_bound_width: Option<f64>,
    pub error: Option<String>,
}

impl MethodRecord {
    fn failed(method: Method, runtime: Option<f64>, err: &Error) -> Self {
        MethodRecord {
            method,
            runtime_s: runtime,
            rmse_pu: None,
            containment_rate: None,
            mean_bound_width: None,
            error: Some(format!("{}: {err}", err.kind())),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub perturb_seed: u64,
    pub noise_seed: u64,
    pub records: Vec<MethodRecord>,
    pub x_true: Vec<f64>,
    pub chi_p: f64,
    pub bounds: Option<StateBounds>,
    pub convex: Option<BduSolution>,
    pub glfp: Option<GlfpSolution>,
    /// Set when data generation itself failed.
    pub error: Option<String>,
}

impl TrialResult {
    pub fn record(&self, method: Method) -> Option<&MethodRecord> {
        self.records.iter().find(|r| r.method == method)
    }
}

pub fn run_interval(model: &MeasurementModel, data: &TrialData) -> Result<StateBounds> {
    let y = &data.measurements.y;
    let sys = interval::build_augmented(model, &data.weights, &data.spec, y)?;
    let rad = interval::iterate_radius(&sys, &data.spec.delta_y, interval::DEFAULT_TOL, interval::DEFAULT_MAX_ITER)?;
    Ok(interval::state_bounds(&sys, &rad))
}

pub fn run_convex(model: &MeasurementModel, data: &TrialData) -> Result<BduSolution> {
    solve_bdu(&model.p0, &data.measurements.y, &BduConfig::new(data.chi_p, data.spec.chi_y))
}

pub fn run_glfp(model: &MeasurementModel, data: &TrialData, max_states: usize) -> Result<GlfpSolution> {
    let problem = GlfpProblem::new(model.p0.clone(), data.measurements.y.clone())?;
    solve_glfp(
        &problem,
        &GlfpOptions {
            max_states,
            ..Default::default()
        },
    )
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (f64, Result<T>) {
    let start = Instant::now();
    let out = f();
    (start.elapsed().as_secs_f64(), out)
}

pub fn run_trial(config: &ExperimentConfig, model: &MeasurementModel, trial: usize) -> TrialResult {
    let (perturb_seed, noise_seed) = trial_seeds(config.seed, trial);
    let mut result = TrialResult {
        trial,
        perturb_seed,
        noise_seed,
        records: Vec::new(),
        x_true: Vec::new(),
        chi_p: 0.0,
        bounds: None,
        convex: None,
        glfp: None,
        error: None,
    };
    let data = match generate_trial(
        &config.case,
        &config.placement,
        model,
        config.max_rel_dev,
        config.tve_bound,
        (perturb_seed, noise_seed),
        config.chi_p,
        config.delta_p,
    ) {
        Ok(d) => d,
        Err(e) => {
            result.error = Some(format!("{}: {e}", e.kind()));
            result.records = config
                .methods
                .iter()
                .map(|m| MethodRecord::failed(*m, None, &e))
                .collect();
            return result;
        }
    };
    let mut data = data;
    if let Some(samples) = config.weight_samples {
        use_empirical_weights(&mut data, config.tve_bound, samples, noise_seed);
    }
    let x_true = data.measurements.x_true.clone();
    result.chi_p = data.chi_p;
    for &method in &config.methods {
        let record = match method {
            Method::Interval => match timed(|| run_interval(model, &data)) {
                (t, Ok(bounds)) => {
                    let (rate, _) = containment(&bounds, &x_true);
                    let widths = bounds.widths();
                    let rec = MethodRecord {
                        method,
                        runtime_s: Some(t),
                        rmse_pu: None,
                        containment_rate: Some(rate),
                        mean_bound_width: Some(widths.iter().sum::<f64>() / widths.len() as f64),
                        error: None,
                    };
                    result.bounds = Some(bounds);
                    rec
                }
                (t, Err(e)) => MethodRecord::failed(method, Some(t), &e),
            },
            Method::Convex => match timed(|| run_convex(model, &data)) {
                (t, Ok(sol)) => {
                    let rec = MethodRecord {
                        method,
                        runtime_s: Some(t),
                        rmse_pu: rmse(&sol.x_hat, &x_true).ok(),
                        containment_rate: None,
                        mean_bound_width: None,
                        error: None,
                    };
                    result.convex = Some(sol);
                    rec
                }
                (t, Err(e)) => MethodRecord::failed(method, Some(t), &e),
            },
            Method::Glfp => match timed(|| run_glfp(model, &data, config.glfp_max_states)) {
                (t, Ok(sol)) => {
                    let rec = MethodRecord {
                        method,
                        runtime_s: Some(t),
                        rmse_pu: rmse(&sol.x_star, &x_true).ok(),
                        containment_rate: None,
                        mean_bound_width: None,
                        error: None,
                    };
                    result.glfp = Some(sol);
                    rec
                }
                (t, Err(e)) => MethodRecord::failed(method, Some(t), &e),
            },
        };
        result.records.push(record);
    }
    result.x_true = x_true;
    result
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub successes: usize,
    pub failures: usize,
    pub median_runtime_s: Option<f64>,
    pub median_rmse_pu: Option<f64>,
    pub mean_containment_rate: Option<f64>,
    pub median_mean_bound_width: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub case_name: String,
    pub buses: usize,
    pub max_rel_dev: f64,
    pub tve_bound: f64,
    pub seed: u64,
    pub trials: usize,
    pub chi_p_mode: String,
    pub delta_p_mode: String,
    pub summary: Vec<MethodSummary>,
    pub results: Vec<TrialResult>,
    #[serde(skip)]
    pub model: MeasurementModel,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn summarize(method: Method, results: &[TrialResult]) -> MethodSummary {
    let records: Vec<&MethodRecord> = results.iter().filter_map(|r| r.record(method)).collect();
    let ok: Vec<&&MethodRecord> = records.iter().filter(|r| r.succeeded()).collect();
    let mut runtimes: Vec<f64> = ok.iter().filter_map(|r| r.runtime_s).collect();
    let mut rmses: Vec<f64> = ok.iter().filter_map(|r| r.rmse_pu).collect();
    let rates: Vec<f64> = ok.iter().filter_map(|r| r.containment_rate).collect();
    let mut widths: Vec<f64> = ok.iter().filter_map(|r| r.mean_bound_width).collect();
    MethodSummary {
        method,
        successes: ok.len(),
        failures: records.len() - ok.len(),
        median_runtime_s: median(&mut runtimes),
        median_rmse_pu: median(&mut rmses),
        mean_containment_rate: if rates.is_empty() {
            None
        } else {
            Some(rates.iter().sum::<f64>() / rates.len() as f64)
        },
        median_mean_bound_width: median(&mut widths),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let model = build_measurement_matrix(&config.case, &config.placement)?;
    let results: Vec<TrialResult> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|t| run_trial(config, &model, t))
                .collect()
        })
    } else {
        (0..config.trials).map(|t| run_trial(config, &model, t)).collect()
    };
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    let summary = methods.iter().map(|m| summarize(*m, &results)).collect();
    Ok(ExperimentReport {
        case_name: config.case_name.clone(),
        buses: config.case.bus_count(),
        max_rel_dev: config.max_rel_dev,
        tve_bound: config.tve_bound,
        seed: config.seed,
        trials: config.trials,
        chi_p_mode: match config.chi_p {
            ChiPMode::Matrix => "matrix",
            ChiPMode::Paper => "paper",
        }
        .into(),
        delta_p_mode: match config.delta_p {
            DeltaPMode::Box => "box",
            DeltaPMode::Realized => "realized",
        }
        .into(),
        summary,
        results,
        model,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (trial, method).
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("trial,method,runtime_s,rmse_pu,containment_rate,mean_bound_width\n");
    for r in &report.results {
        for rec in &r.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.trial,
                rec.method,
                opt(rec.runtime_s),
                opt(rec.rmse_pu),
                opt(rec.containment_rate),
                opt(rec.mean_bound_width)
            );
        }
    }
    out
}

pub fn summary_json(report: &ExperimentReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

fn part_name(part: RowPart) -> &'static str {
    if part == RowPart::Real {
        "real"
    } else {
        "imag"
    }
}

/// Figure data for one trial: truth, point estimates and bounds per state.
pub fn figure_csv(model: &MeasurementModel, trial: &TrialResult) -> String {
    let mut out = String::from("component_index,part,bus_id,true,convex_estimate,glfp_estimate,lower,upper\n");
    for (j, x) in trial.x_true.iter().enumerate() {
        let (bus, part) = model.bus_id_of_state(j);
        let convex = trial.convex.as_ref().map(|s| s.x_hat[j]);
        let glfp = trial.glfp.as_ref().map(|s| s.x_star[j]);
        let lower = trial.bounds.as_ref().map(|b| b.lower[j]);
        let upper = trial.bounds.as_ref().map(|b| b.upper[j]);
        let _ = writeln!(
            out,
            "{j},{},{bus},{x},{},{},{},{}",
            part_name(part),
            opt(convex),
            opt(glfp),
            opt(lower),
            opt(upper)
        );
    }
    out
}

/// Point-estimate dump: `component_index,part,bus_id,estimate`.
pub fn estimates_csv(model: &MeasurementModel, x: &[f64]) -> String {
    let mut out = String::from("component_index,part,bus_id,estimate\n");
    for (j, v) in x.iter().enumerate() {
        let (bus, part) = model.bus_id_of_state(j);
        let _ = writeln!(out, "{j},{},{bus},{v}", part_name(part));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let a = vec![0.1; 10];
        let b = vec![0.0; 10];
        assert!((rmse(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        let x = [0.3, -1.2, 2.5];
        let y = [0.1, -1.0, 2.0];
        let direct = ((0.04 + 0.04 + 0.25) / 3.0f64).sqrt();
        assert!((rmse(&x, &y).unwrap() - direct).abs() < 1e-15);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn containment_examples() {
        let x = vec![1.0, 0.5, -0.2];
        let exact = StateBounds {
            lower: x.clone(),
            upper: x.clone(),
            center: x.clone(),
            iterations: 1,
            converged: true,
        };
        assert_eq!(containment(&exact, &x).0, 1.0);
        let above = StateBounds {
            lower: x.iter().map(|v| v + 1.0).collect(),
            upper: x.iter().map(|v| v + 2.0).collect(),
            center: x.clone(),
            iterations: 1,
            converged: true,
        };
        let (rate, flags) = containment(&above, &x);
        assert_eq!(rate, 0.0);
        assert!(flags.iter().all(|f| !f));
    }

    #[test]
    fn empirical_weights_track_known_sigma() {
        let cfg = ExperimentConfig::bundled("case5", 8).unwrap();
        let model = build_measurement_matrix(&cfg.case, &cfg.placement).unwrap();
        let mut data = generate_trial(
            &cfg.case,
            &cfg.placement,
            &model,
            0.3,
            0.01,
            trial_seeds(8, 0),
            ChiPMode::Matrix,
            DeltaPMode::Box,
        )
        .unwrap();
        let known = data.weights.clone();
        use_empirical_weights(&mut data, 0.01, 5000, 1);
        for (k, e) in known.iter().zip(&data.weights) {
            if *k > 1e-7 {
                assert!((e / k - 1.0).abs() < 0.1, "{e} vs {k}");
            }
        }
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let a = trial_seeds(7, 0);
        assert_eq!(a, trial_seeds(7, 0));
        assert_ne!(a.0, a.1);
        assert_ne!(a, trial_seeds(7, 1));
    }

    #[test]
    fn zero_uncertainty_run() {
        let mut cfg = ExperimentConfig::bundled("case5", 1).unwrap();
        cfg.max_rel_dev = 0.0;
        cfg.tve_bound = 0.0;
        cfg.trials = 2;
        let report = run_experiment(&cfg).unwrap();
        for r in &report.results {
            let conv = r.record(Method::Convex).unwrap();
            assert!(conv.rmse_pu.unwrap() <= 1e-8);
            let int = r.record(Method::Interval).unwrap();
            assert_eq!(int.containment_rate, Some(1.0));
            assert!(r.bounds.as_ref().unwrap().widths().iter().all(|w| *w <= 1e-8));
        }
    }

    #[test]
    fn deterministic_outputs() {
        let mut cfg = ExperimentConfig::bundled("case14", 3).unwrap();
        cfg.trials = 2;
        cfg.max_rel_dev = 0.05;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(figure_csv(&a.model, &a.results[1]), figure_csv(&b.model, &b.results[1]));
        let strip = |r: &ExperimentReport| {
            r.results
                .iter()
                .flat_map(|t| t.records.iter().map(|m| (m.rmse_pu, m.containment_rate, m.mean_bound_width)))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        cfg.jobs = 2;
        let c = run_experiment(&cfg).unwrap();
        assert_eq!(strip(&a), strip(&c));
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut cfg = ExperimentConfig::bundled("case5", 4).unwrap();
        cfg.trials = 2;
        cfg.max_rel_dev = 0.3;
        let report = run_experiment(&cfg).unwrap();
        let s = report.summary.iter().find(|s| s.method == Method::Interval).unwrap();
        assert_eq!(s.successes + s.failures, 2);
        assert!(report.results.iter().all(|r| r.record(Method::Convex).unwrap().succeeded()));
        let csv = report_csv(&report);
        assert_eq!(csv.lines().count(), 1 + 4);
    }

    #[test]
    fn glfp_guard_in_config() {
        let mut cfg = ExperimentConfig::bundled("case14", 1).unwrap();
        cfg.methods = vec![Method::Glfp];
        assert!(matches!(run_experiment(&cfg), Err(Error::DimensionGuard(_))));
    }

    #[test]
    fn estimates_csv_layout() {
        let model = MeasurementModel {
            p0: Matrix::identity(4),
            channels: vec![],
            n_bus: 2,
            bus_ids: vec![10, 20],
            series: vec![],
        };
        let csv = estimates_csv(&model, &[1.0, 2.0, 3.0, 4.0]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "component_index,part,bus_id,estimate");
        assert_eq!(lines[1], "0,real,10,1");
        assert_eq!(lines[4], "3,imag,20,4");
    }
}
