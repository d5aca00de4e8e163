//! Linear PMU measurement model `y = P(p) x + noise` in stacked rectangular
//! coordinates, together with the data-generation steps (parameter
//! perturbation, bounded phasor noise) and the uncertainty description used
//! by the estimators.
//!
//! State ordering is all real parts of the bus voltages followed by all
//! imaginary parts. Measurement rows follow the same convention: the real
//! parts of every phasor channel, then the imaginary parts.
//!
//! Uncertain parameters are the real and imaginary parts of each measured
//! branch's series admittance. Every current channel is affine in the series
//! admittance, so `P(p) = P0 + Σ_k (p_k - p0_k) P_k` holds exactly.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::caseio::NetworkCase;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::powerflow::{self, build_admittance, ComplexVoltageProfile, C64};

/// Lower bound applied to each diagonal entry of `W` (a variance).
pub const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmuPlacement {
    pub buses: Vec<u32>,
}

impl PmuPlacement {
    /// Parses one bus id per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut buses = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let id: u32 = line.parse().map_err(|_| {
                Error::InvalidPlacement(format!("line {}: '{line}' is not a bus id", n + 1))
            })?;
            if buses.contains(&id) {
                return Err(Error::InvalidPlacement(format!("line {}: duplicate bus {id}", n + 1)));
            }
            buses.push(id);
        }
        if buses.is_empty() {
            return Err(Error::InvalidPlacement("no PMU buses listed".into()));
        }
        Ok(Self { buses })
    }

    pub fn all_buses(case: &NetworkCase) -> Self {
        Self {
            buses: case.buses.iter().map(|b| b.id).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        self.buses.iter().map(|b| format!("{b}\n")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Voltage,
    /// Current leaving the from end of a branch, measured at the from bus.
    CurrentFrom,
    /// Current leaving the to end of a branch, measured at the to bus.
    CurrentTo,
}

/// One phasor channel. It contributes two rows to `P`: the real part at
/// position `index` and the imaginary part at `index + n_channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    /// PMU bus id.
    pub bus: u32,
    /// Case index of the measured branch (current channels only).
    pub branch: Option<usize>,
    /// Branch endpoint ids (current channels only).
    pub branch_ends: Option<(u32, u32)>,
    /// Dense indices of the two buses the phasor depends on; equal for a
    /// voltage channel.
    pub near: usize,
    pub far: usize,
    /// Affine dependence on the series admittance `ys`: the channel reads
    /// `(near_gain * ys + near_const) V_near + (far_gain * ys + far_const) V_far`.
    pub near_gain: C64,
    pub near_const: C64,
    pub far_gain: C64,
    pub far_const: C64,
}

impl Channel {
    fn coefficients(&self, ys: C64) -> (C64, C64) {
        (
            self.near_gain * ys + self.near_const,
            self.far_gain * ys + self.far_const,
        )
    }

    pub fn is_current(&self) -> bool {
        self.kind != ChannelKind::Voltage
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowPart {
    Real,
    Imag,
}

#[derive(Debug, Clone)]
pub struct MeasurementModel {
    /// Nominal measurement matrix, `n × 2B`.
    pub p0: Matrix,
    pub channels: Vec<Channel>,
    pub n_bus: usize,
    pub bus_ids: Vec<u32>,
    /// Nominal series admittance per case branch (zero for out-of-service).
    pub series: Vec<C64>,
}

impl MeasurementModel {
    pub fn n_rows(&self) -> usize {
        2 * self.channels.len()
    }

    pub fn n_states(&self) -> usize {
        2 * self.n_bus
    }

    /// Channel and part of measurement row `row`.
    pub fn row_meta(&self, row: usize) -> (usize, RowPart) {
        let m = self.channels.len();
        if row < m {
            (row, RowPart::Real)
        } else {
            (row - m, RowPart::Imag)
        }
    }

    /// Rebuilds `P` for a different set of series admittances (indexed by
    /// case branch) while keeping channels and topology fixed.
    pub fn matrix_for(&self, series: &[C64]) -> Matrix {
        let m = self.channels.len();
        let b = self.n_bus;
        let mut p = Matrix::zeros(2 * m, 2 * b);
        for (i, ch) in self.channels.iter().enumerate() {
            let ys = ch.branch.map_or(C64::new(0.0, 0.0), |k| series[k]);
            let (a, c) = ch.coefficients(ys);
            place_complex(&mut p, i, m, b, ch.near, a);
            place_complex(&mut p, i, m, b, ch.far, c);
        }
        p
    }

    /// Noise-free phasor read by each channel for bus voltages `v`.
    pub fn phasors(&self, series: &[C64], v: &[C64]) -> Vec<C64> {
        self.channels
            .iter()
            .map(|ch| {
                let ys = ch.branch.map_or(C64::new(0.0, 0.0), |k| series[k]);
                let (a, c) = ch.coefficients(ys);
                if ch.kind == ChannelKind::Voltage {
                    v[ch.near]
                } else {
                    a * v[ch.near] + c * v[ch.far]
                }
            })
            .collect()
    }

    pub fn bus_id_of_state(&self, j: usize) -> (u32, RowPart) {
        if j < self.n_bus {
            (self.bus_ids[j], RowPart::Real)
        } else {
            (self.bus_ids[j - self.n_bus], RowPart::Imag)
        }
    }
}

/// Adds complex coefficient `a` multiplying bus `j` to the real/imaginary row
/// pair of channel `i`.
fn place_complex(p: &mut Matrix, i: usize, m: usize, b: usize, j: usize, a: C64) {
    p[(i, j)] += a.re;
    p[(i, b + j)] -= a.im;
    p[(m + i, j)] += a.im;
    p[(m + i, b + j)] += a.re;
}

fn push_complex(entries: &mut Vec<(usize, usize, f64)>, i: usize, m: usize, b: usize, j: usize, a: C64) {
    for (row, col, v) in [(i, j, a.re), (i, b + j, -a.im), (m + i, j, a.im), (m + i, b + j, a.re)] {
        match entries.iter_mut().find(|e| e.0 == row && e.1 == col) {
            Some(e) => e.2 += v,
            None => entries.push((row, col, v)),
        }
    }
}

fn stack_phasors(ph: &[C64]) -> Vec<f64> {
    powerflow::stack(ph)
}

fn series_admittances(case: &NetworkCase) -> Vec<C64> {
    case.branches
        .iter()
        .map(|br| {
            if br.in_service() {
                C64::new(br.r, br.x).inv()
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

pub fn build_measurement_matrix(
    case: &NetworkCase,
    placement: &PmuPlacement,
) -> Result<MeasurementModel> {
    let admittance = build_admittance(case)?;
    let mut channels = Vec::new();
    let zero = C64::new(0.0, 0.0);
    for &id in &placement.buses {
        let bus = case
            .bus_index(id)
            .ok_or_else(|| Error::InvalidPlacement(format!("PMU at unknown bus {id}")))?;
        channels.push(Channel {
            kind: ChannelKind::Voltage,
            bus: id,
            branch: None,
            branch_ends: None,
            near: bus,
            far: bus,
            near_gain: zero,
            near_const: C64::new(1.0, 0.0),
            far_gain: zero,
            far_const: zero,
        });
        for pi in admittance.branches.iter().filter(|pi| pi.from == bus || pi.to == bus) {
            let br = &case.branches[pi.case_index];
            let half = C64::new(0.0, pi.b_total / 2.0);
            let t = C64::from_polar(pi.tap, pi.shift);
            let ends = Some((br.from_bus, br.to_bus));
            let ch = if pi.from == bus {
                // I_from = (ys + jb/2)/τ² V_f - ys/conj(t) V_t
                Channel {
                    kind: ChannelKind::CurrentFrom,
                    bus: id,
                    branch: Some(pi.case_index),
                    branch_ends: ends,
                    near: pi.from,
                    far: pi.to,
                    near_gain: C64::new(1.0 / (pi.tap * pi.tap), 0.0),
                    near_const: half / (pi.tap * pi.tap),
                    far_gain: -t.conj().inv(),
                    far_const: zero,
                }
            } else {
                // I_to = -ys/t V_f + (ys + jb/2) V_t
                Channel {
                    kind: ChannelKind::CurrentTo,
                    bus: id,
                    branch: Some(pi.case_index),
                    branch_ends: ends,
                    near: pi.to,
                    far: pi.from,
                    near_gain: C64::new(1.0, 0.0),
                    near_const: half,
                    far_gain: -t.inv(),
                    far_const: zero,
                }
            };
            channels.push(ch);
        }
    }
    let mut model = MeasurementModel {
        p0: Matrix::zeros(0, 0),
        channels,
        n_bus: case.bus_count(),
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        series: series_admittances(case),
    };
    model.p0 = model.matrix_for(&model.series);
    let rank = linalg::rank(&model.p0, 1e-10);
    if rank < model.n_states() {
        return Err(Error::Unobservable {
            rank,
            states: model.n_states(),
        });
    }
    Ok(model)
}

/// Draws `d ~ N(0, dev²)` conditioned on `|d| <= dev` by rejection.
fn bounded_deviation(rng: &mut ChaCha8Rng, normal: &Normal<f64>, dev: f64) -> f64 {
    loop {
        let d = normal.sample(rng);
        if d.abs() <= dev {
            return d;
        }
    }
}

/// Multiplies every in-service branch's `r` and `x` by independent factors
/// `1 + d` with `|d| <= max_rel_dev`.
pub fn perturb_parameters(case: &NetworkCase, max_rel_dev: f64, seed: u64) -> Result<NetworkCase> {
    if !(0.0..1.0).contains(&max_rel_dev) {
        return Err(Error::InvalidInput(format!(
            "relative deviation must lie in [0, 1), got {max_rel_dev}"
        )));
    }
    let mut out = case.clone();
    if max_rel_dev == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, max_rel_dev).expect("positive std dev");
    for br in out.branches.iter_mut().filter(|b| b.in_service()) {
        br.r *= 1.0 + bounded_deviation(&mut rng, &normal, max_rel_dev);
        br.x *= 1.0 + bounded_deviation(&mut rng, &normal, max_rel_dev);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MeasurementVector {
    /// Noisy measurements, stacked like the rows of `P`.
    pub y: Vec<f64>,
    pub true_y: Vec<f64>,
    /// Per-row noise standard deviation (both rows of a channel share it).
    pub sigma: Vec<f64>,
    /// Stacked true state of the system that produced the data.
    pub x_true: Vec<f64>,
    pub profile: ComplexVoltageProfile,
}

impl MeasurementVector {
    /// Magnitude of the true phasor behind each row.
    pub fn true_magnitudes(&self) -> Vec<f64> {
        let m = self.true_y.len() / 2;
        (0..2 * m)
            .map(|r| {
                let c = r % m;
                self.true_y[c].hypot(self.true_y[m + c])
            })
            .collect()
    }
}

/// Complex Gaussian noise with per-axis sigma `tve·|phasor|/3`, redrawn until
/// its magnitude is within `tve·|phasor|`.
fn bounded_noise(rng: &mut ChaCha8Rng, magnitude: f64, tve: f64) -> (C64, f64) {
    let bound = tve * magnitude;
    let sigma = bound / 3.0;
    if bound == 0.0 {
        return (C64::new(0.0, 0.0), 0.0);
    }
    loop {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let n = C64::new(re, im) * sigma;
        if n.norm() <= bound {
            return (n, sigma);
        }
    }
}

/// Solves the power flow of `case_perturbed` and produces noisy PMU readings.
pub fn simulate_measurements(
    case_perturbed: &NetworkCase,
    placement: &PmuPlacement,
    tve_bound: f64,
    seed: u64,
) -> Result<MeasurementVector> {
    if !(tve_bound >= 0.0 && tve_bound.is_finite()) {
        return Err(Error::InvalidInput(format!("TVE bound must be nonnegative, got {tve_bound}")));
    }
    let model = build_measurement_matrix(case_perturbed, placement)?;
    let profile = powerflow::solve_power_flow(
        case_perturbed,
        powerflow::DEFAULT_PF_TOL,
        powerflow::DEFAULT_PF_MAX_ITER,
    )?;
    let truth = model.phasors(&model.series, &profile.v);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = truth.len();
    let mut noisy = Vec::with_capacity(m);
    let mut sigma = vec![0.0; 2 * m];
    for (i, ph) in truth.iter().enumerate() {
        let (n, s) = bounded_noise(&mut rng, ph.norm(), tve_bound);
        noisy.push(ph + n);
        sigma[i] = s;
        sigma[m + i] = s;
    }
    Ok(MeasurementVector {
        y: stack_phasors(&noisy),
        true_y: stack_phasors(&truth),
        sigma,
        x_true: profile.stacked(),
        profile,
    })
}

/// Per-row standard deviation of `samples` independent noise draws, the
/// empirical counterpart of `MeasurementVector::sigma`.
pub fn empirical_sigmas(true_y: &[f64], tve_bound: f64, samples: usize, seed: u64) -> Vec<f64> {
    let m = true_y.len() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; 2 * m];
    if samples < 2 {
        return out;
    }
    for c in 0..m {
        let mag = true_y[c].hypot(true_y[m + c]);
        let draws: Vec<C64> = (0..samples).map(|_| bounded_noise(&mut rng, mag, tve_bound).0).collect();
        for (part, pick) in [(c, 0), (m + c, 1)] {
            let vals: Vec<f64> = draws.iter().map(|d| if pick == 0 { d.re } else { d.im }).collect();
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            out[part] = var.sqrt();
        }
    }
    out
}

/// Diagonal of `W` (variances) with the floor applied.
pub fn weight_diagonal(sigmas: &[f64]) -> Vec<f64> {
    sigmas.iter().map(|s| (s * s).max(WEIGHT_FLOOR)).collect()
}

pub fn build_weights(sigmas: &[f64]) -> Matrix {
    Matrix::from_diag(&weight_diagonal(sigmas))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmittancePart {
    Conductance,
    Susceptance,
}

/// One uncertain parameter `p_k = p0_k + delta ε_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainParameter {
    /// Case branch index.
    pub branch: usize,
    pub part: AdmittancePart,
    pub nominal: f64,
    pub delta: f64,
}

/// Sparse `∂P/∂p_k`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sensitivity {
    pub entries: Vec<(usize, usize, f64)>,
}

impl Sensitivity {
    pub fn to_dense(&self, rows: usize, cols: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct UncertaintySpec {
    pub params: Vec<UncertainParameter>,
    /// `P_k`, aligned with `params`.
    pub sensitivities: Vec<Sensitivity>,
    /// Per-row measurement deviation bound.
    pub delta_y: Vec<f64>,
    /// Induced 2-norm bound on δP.
    pub chi_p: f64,
    /// 2-norm bound on δy.
    pub chi_y: f64,
    /// Largest elementwise bound on δP.
    pub xi: f64,
}

impl UncertaintySpec {
    /// Number of uncertain branches (`2 n_p` parameters in total).
    pub fn n_uncertain_branches(&self) -> usize {
        self.params.len() / 2
    }

    /// `P0 + Σ_k Δp_k P_k ε_k`.
    pub fn expand(&self, p0: &Matrix, eps: &[f64]) -> Matrix {
        let mut p = p0.clone();
        for ((param, sens), e) in self.params.iter().zip(&self.sensitivities).zip(eps) {
            for &(i, j, v) in &sens.entries {
                p[(i, j)] += param.delta * v * e;
            }
        }
        p
    }

    /// Series admittances (by case branch) realized by `eps`.
    pub fn admittances_at(&self, nominal: &[C64], eps: &[f64]) -> Vec<C64> {
        let mut ys = nominal.to_vec();
        for (param, e) in self.params.iter().zip(eps) {
            match param.part {
                AdmittancePart::Conductance => ys[param.branch].re = param.nominal + param.delta * e,
                AdmittancePart::Susceptance => ys[param.branch].im = param.nominal + param.delta * e,
            }
        }
        ys
    }

    /// Matrix of elementwise bounds `Σ_k Δp_k |P_k|`.
    pub fn elementwise_bound(&self, rows: usize, cols: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for (param, sens) in self.params.iter().zip(&self.sensitivities) {
            for &(i, j, v) in &sens.entries {
                m[(i, j)] += param.delta * v.abs();
            }
        }
        m
    }
}

/// Exact range of `1/(r + jx)` over the box `r ∈ [r_lo, r_hi]`,
/// `x ∈ [x_lo, x_hi]`, as `((g_min, g_max), (b_min, b_max))`.
///
/// Neither part has an interior stationary point, so extremes lie on the
/// box edges: at corners, where `|r| = |x|`, or where the other coordinate
/// crosses zero.
pub fn admittance_range(r: (f64, f64), x: (f64, f64)) -> Result<((f64, f64), (f64, f64))> {
    if r.0 <= 0.0 && r.1 >= 0.0 && x.0 <= 0.0 && x.1 >= 0.0 {
        return Err(Error::InvalidInput("impedance box contains zero".into()));
    }
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    let mut points = Vec::with_capacity(16);
    for &rv in &[r.0, r.1] {
        for &xv in &[x.0, x.1] {
            points.push((rv, xv));
        }
        if within(0.0, x) {
            points.push((rv, 0.0));
        }
        for xv in [rv.abs(), -rv.abs()] {
            if within(xv, x) {
                points.push((rv, xv));
            }
        }
    }
    for &xv in &[x.0, x.1] {
        if within(0.0, r) {
            points.push((0.0, xv));
        }
        for rv in [xv.abs(), -xv.abs()] {
            if within(rv, r) {
                points.push((rv, xv));
            }
        }
    }
    let mut g = (f64::INFINITY, f64::NEG_INFINITY);
    let mut b = (f64::INFINITY, f64::NEG_INFINITY);
    for (rv, xv) in points {
        let y = C64::new(rv, xv).inv();
        g = (g.0.min(y.re), g.1.max(y.re));
        b = (b.0.min(y.im), b.1.max(y.im));
    }
    Ok((g, b))
}

fn symmetric_box(v: f64, dev: f64) -> (f64, f64) {
    let (a, b) = (v * (1.0 - dev), v * (1.0 + dev));
    (a.min(b), a.max(b))
}

/// How χ_P is derived for the regularized estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiPMode {
    /// Spectral norm of the elementwise bound matrix `Σ Δp_k |P_k|`.
    Matrix,
    /// Largest absolute (r, x) change between the perturbed and the nominal
    /// case.
    Paper,
}

impl std::str::FromStr for ChiPMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(ChiPMode::Matrix),
            "paper" => Ok(ChiPMode::Paper),
            other => Err(Error::InvalidInput(format!("unknown chi-p mode '{other}'"))),
        }
    }
}

/// How the per-parameter deviations `Δp_k` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaPMode {
    /// Admittance range over the full `±max_rel_dev` box on `r` and `x`.
    #[default]
    Box,
    /// `|p_k(perturbed) - p_k(nominal)|`, the deviation actually realized.
    Realized,
}

impl std::str::FromStr for DeltaPMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(DeltaPMode::Box),
            "realized" => Ok(DeltaPMode::Realized),
            other => Err(Error::InvalidInput(format!("unknown delta-p mode '{other}'"))),
        }
    }
}

/// Replaces every `Δp_k` by the realized admittance change and refreshes the
/// aggregate bounds.
pub fn use_realized_deltas(
    spec: &mut UncertaintySpec,
    perturbed: &NetworkCase,
    n_rows: usize,
    n_states: usize,
) -> Result<()> {
    for p in spec.params.iter_mut() {
        let br = perturbed
            .branches
            .get(p.branch)
            .ok_or_else(|| Error::Dimension(format!("branch {} not in perturbed case", p.branch)))?;
        let y = C64::new(br.r, br.x).inv();
        let v = match p.part {
            AdmittancePart::Conductance => y.re,
            AdmittancePart::Susceptance => y.im,
        };
        p.delta = (v - p.nominal).abs();
    }
    let bound = spec.elementwise_bound(n_rows, n_states);
    spec.xi = bound.max_abs();
    spec.chi_p = linalg::norm2_mat(&bound)?;
    Ok(())
}

/// Largest absolute change of `r` or `x` over in-service branches.
pub fn chi_p_parameter_difference(nominal: &NetworkCase, perturbed: &NetworkCase) -> f64 {
    nominal
        .branches
        .iter()
        .zip(&perturbed.branches)
        .filter(|(a, _)| a.in_service())
        .map(|(a, b)| (a.r - b.r).abs().max((a.x - b.x).abs()))
        .fold(0.0, f64::max)
}

pub fn build_uncertainty_spec(
    case_nominal: &NetworkCase,
    placement: &PmuPlacement,
    max_rel_dev: f64,
    tve_bound: f64,
    y_true: &MeasurementVector,
) -> Result<UncertaintySpec> {
    let model = build_measurement_matrix(case_nominal, placement)?;
    uncertainty_for_model(case_nominal, &model, max_rel_dev, tve_bound, &y_true.true_y)
}

/// Same as [`build_uncertainty_spec`] for an already built model.
pub fn uncertainty_for_model(
    case_nominal: &NetworkCase,
    model: &MeasurementModel,
    max_rel_dev: f64,
    tve_bound: f64,
    true_y: &[f64],
) -> Result<UncertaintySpec> {
    if !(0.0..1.0).contains(&max_rel_dev) {
        return Err(Error::InvalidInput(format!(
            "relative deviation must lie in [0, 1), got {max_rel_dev}"
        )));
    }
    if true_y.len() != model.n_rows() {
        return Err(Error::Dimension(format!(
            "{} true measurements for {} rows",
            true_y.len(),
            model.n_rows()
        )));
    }
    let m = model.channels.len();
    let b = model.n_bus;
    let mut measured: Vec<usize> = model.channels.iter().filter_map(|c| c.branch).collect();
    measured.sort_unstable();
    measured.dedup();

    let mut params = Vec::with_capacity(2 * measured.len());
    let mut sensitivities = Vec::with_capacity(2 * measured.len());
    for &k in &measured {
        let br = &case_nominal.branches[k];
        let ys = model.series[k];
        let (g_range, b_range) = admittance_range(
            symmetric_box(br.r, max_rel_dev),
            symmetric_box(br.x, max_rel_dev),
        )?;
        let dg = (g_range.1 - ys.re).max(ys.re - g_range.0).max(0.0);
        let db = (b_range.1 - ys.im).max(ys.im - b_range.0).max(0.0);
        for (part, nominal, delta, unit) in [
            (AdmittancePart::Conductance, ys.re, dg, C64::new(1.0, 0.0)),
            (AdmittancePart::Susceptance, ys.im, db, C64::new(0.0, 1.0)),
        ] {
            let mut entries: Vec<(usize, usize, f64)> = Vec::new();
            for (i, ch) in model.channels.iter().enumerate() {
                if ch.branch == Some(k) {
                    push_complex(&mut entries, i, m, b, ch.near, ch.near_gain * unit);
                    push_complex(&mut entries, i, m, b, ch.far, ch.far_gain * unit);
                }
            }
            entries.retain(|e| e.2 != 0.0);
            params.push(UncertainParameter {
                branch: k,
                part,
                nominal,
                delta,
            });
            sensitivities.push(Sensitivity { entries });
        }
    }

    let magnitudes: Vec<f64> = (0..2 * m)
        .map(|r| {
            let c = r % m;
            true_y[c].hypot(true_y[m + c])
        })
        .collect();
    let delta_y: Vec<f64> = magnitudes.iter().map(|a| tve_bound * a).collect();
    let mut spec = UncertaintySpec {
        params,
        sensitivities,
        chi_y: linalg::norm2_vec(&delta_y),
        delta_y,
        chi_p: 0.0,
        xi: 0.0,
    };
    let bound = spec.elementwise_bound(2 * m, 2 * b);
    spec.xi = bound.max_abs();
    spec.chi_p = linalg::norm2_mat(&bound)?;
    Ok(spec)
}

/// CSV dump of a measurement vector, one line per row of `P`.
pub fn measurements_csv(model: &MeasurementModel, mv: &MeasurementVector) -> String {
    let mut out = String::from("channel_id,kind,bus,branch_from,branch_to,value,true_value,sigma\n");
    for row in 0..model.n_rows() {
        let (c, part) = model.row_meta(row);
        let ch = &model.channels[c];
        let kind = match (ch.is_current(), part) {
            (false, RowPart::Real) => "voltage_real",
            (false, RowPart::Imag) => "voltage_imag",
            (true, RowPart::Real) => "current_real",
            (true, RowPart::Imag) => "current_imag",
        };
        let (f, t) = ch
            .branch_ends
            .map_or((String::new(), String::new()), |(f, t)| (f.to_string(), t.to_string()));
        let _ = writeln!(
            out,
            "{c},{kind},{},{f},{t},{:e},{:e},{:e}",
            ch.bus, mv.y[row], mv.true_y[row], mv.sigma[row]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::parse_case;
    use crate::powerflow::branch_currents;
    use crate::data;

    fn case14() -> (NetworkCase, PmuPlacement) {
        (
            parse_case(data::CASE14).unwrap(),
            PmuPlacement::parse(data::PLACEMENT14).unwrap(),
        )
    }

    #[test]
    fn voltage_only_placement_is_permutation() {
        let mut case = parse_case(data::CASE5).unwrap();
        case.branches.clear();
        let model = build_measurement_matrix(&case, &PmuPlacement::all_buses(&case)).unwrap();
        assert_eq!(model.p0, Matrix::identity(10));
    }

    #[test]
    fn current_rows_match_complex_evaluation() {
        let (case, placement) = case14();
        let model = build_measurement_matrix(&case, &placement).unwrap();
        let adm = build_admittance(&case).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<C64> = (0..case.bus_count())
            .map(|_| C64::new(rng.random_range(0.8..1.2), rng.random_range(-0.3..0.3)))
            .collect();
        let y = model.p0.matvec(&powerflow::stack(&v)).unwrap();
        let currents = branch_currents(&adm, &v);
        let m = model.channels.len();
        for (i, ch) in model.channels.iter().enumerate() {
            let expect = match ch.kind {
                ChannelKind::Voltage => v[ch.near],
                ChannelKind::CurrentFrom | ChannelKind::CurrentTo => {
                    let pos = adm.branches.iter().position(|p| Some(p.case_index) == ch.branch).unwrap();
                    if ch.kind == ChannelKind::CurrentFrom {
                        currents[pos].from
                    } else {
                        currents[pos].to
                    }
                }
            };
            assert!((y[i] - expect.re).abs() < 1e-12 && (y[m + i] - expect.im).abs() < 1e-12);
        }
    }

    #[test]
    fn bundled_placements_are_observable() {
        for name in data::CASE_NAMES {
            let (ct, pt) = data::bundled(name).unwrap();
            let case = parse_case(ct).unwrap();
            let model = build_measurement_matrix(&case, &PmuPlacement::parse(pt).unwrap()).unwrap();
            assert_eq!(linalg::rank(&model.p0, 1e-10), 2 * case.bus_count(), "{name}");
        }
    }

    #[test]
    fn unobservable_placement_rejected() {
        let (case, _) = case14();
        let err = build_measurement_matrix(&case, &PmuPlacement { buses: vec![1] }).unwrap_err();
        assert!(matches!(err, Error::Unobservable { .. }));
    }

    #[test]
    fn perturbation_bounds_and_determinism() {
        let (case, _) = case14();
        assert_eq!(perturb_parameters(&case, 0.0, 1).unwrap(), case);
        let a = perturb_parameters(&case, 0.3, 42).unwrap();
        let b = perturb_parameters(&case, 0.3, 42).unwrap();
        assert_eq!(a, b);
        for (p, n) in a.branches.iter().zip(&case.branches) {
            if n.r != 0.0 {
                assert!((p.r / n.r - 1.0).abs() <= 0.3 + 1e-15);
            }
            assert!((p.x / n.x - 1.0).abs() <= 0.3 + 1e-15);
        }
        assert_ne!(a, perturb_parameters(&case, 0.3, 43).unwrap());
    }

    #[test]
    fn single_branch_susceptance_deviation() {
        let (g, b) = admittance_range(symmetric_box(0.0, 0.3), symmetric_box(0.1, 0.3)).unwrap();
        assert_eq!(g, (0.0, 0.0));
        assert!((b.0 - (-1.0 / 0.07)).abs() < 1e-12);
        assert!((b.1 - (-1.0 / 0.13)).abs() < 1e-12);
        let delta = (b.1 + 10.0).max(-10.0 - b.0);
        assert!((delta - 4.285_714_285_714_286).abs() < 1e-12);
    }

    #[test]
    fn admittance_range_encloses_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let r0 = rng.random_range(0.0..0.2);
            let x0 = rng.random_range(0.01..0.5);
            let (rb, xb) = (symmetric_box(r0, 0.3), symmetric_box(x0, 0.3));
            let (g, b) = admittance_range(rb, xb).unwrap();
            for i in 0..=20 {
                for j in 0..=20 {
                    let r = rb.0 + (rb.1 - rb.0) * i as f64 / 20.0;
                    let x = xb.0 + (xb.1 - xb.0) * j as f64 / 20.0;
                    let y = C64::new(r, x).inv();
                    assert!(y.re >= g.0 - 1e-12 && y.re <= g.1 + 1e-12);
                    assert!(y.im >= b.0 - 1e-12 && y.im <= b.1 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_deviation_spec_is_zero() {
        let (case, placement) = case14();
        let mv = simulate_measurements(&case, &placement, 0.0, 1).unwrap();
        let spec = build_uncertainty_spec(&case, &placement, 0.0, 0.0, &mv).unwrap();
        assert!(spec.params.iter().all(|p| p.delta == 0.0));
        assert_eq!(spec.chi_p, 0.0);
        assert_eq!(spec.chi_y, 0.0);
    }

    #[test]
    fn affine_expansion_is_exact() {
        let (case, placement) = case14();
        let model = build_measurement_matrix(&case, &placement).unwrap();
        let spec = uncertainty_for_model(&case, &model, 0.3, 0.01, &vec![1.0; model.n_rows()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let eps: Vec<f64> = (0..spec.params.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let expanded = spec.expand(&model.p0, &eps);
            let rebuilt = model.matrix_for(&spec.admittances_at(&model.series, &eps));
            let mut diff = expanded.clone();
            diff.add_scaled(&rebuilt, -1.0).unwrap();
            assert!(diff.max_abs() <= 1e-12, "{}", diff.max_abs());
        }
    }

    #[test]
    fn noise_free_data_is_model_consistent() {
        let (case, placement) = case14();
        let perturbed = perturb_parameters(&case, 0.3, 5).unwrap();
        let mv = simulate_measurements(&perturbed, &placement, 0.01, 6).unwrap();
        let model = build_measurement_matrix(&perturbed, &placement).unwrap();
        let y = model.p0.matvec(&mv.x_true).unwrap();
        for (a, b) in y.iter().zip(&mv.true_y) {
            assert!((a - b).abs() < 1e-10);
        }
        let mags = mv.true_magnitudes();
        for r in 0..mv.y.len() / 2 {
            let m = mv.y.len() / 2;
            let err = (mv.y[r] - mv.true_y[r]).hypot(mv.y[m + r] - mv.true_y[m + r]);
            assert!(err <= 0.01 * mags[r] + 1e-15);
        }
    }

    #[test]
    fn weights_square_and_floor() {
        assert_eq!(weight_diagonal(&[0.01, 0.02]), vec![0.01f64 * 0.01, 0.02f64 * 0.02]);
        let w = build_weights(&[0.0, 0.5]);
        assert_eq!(w[(0, 0)], WEIGHT_FLOOR);
        assert_eq!(w[(1, 1)], 0.25);
        assert_eq!(w[(0, 1)], 0.0);
    }

    #[test]
    fn placement_file_parsing() {
        let p = PmuPlacement::parse("# header\n2\n 7 # inline\n\n11\n").unwrap();
        assert_eq!(p.buses, vec![2, 7, 11]);
        assert!(PmuPlacement::parse("2\n2\n").is_err());
        assert!(PmuPlacement::parse("x\n").is_err());
        assert!(PmuPlacement::parse("# nothing\n").is_err());
    }

    #[test]
    fn empirical_sigma_tracks_nominal() {
        let true_y = vec![1.0, 0.0];
        let s = empirical_sigmas(&true_y, 0.03, 20_000, 3);
        // Per-axis sigma is 0.01; rejection at 3 sigma trims the tails slightly.
        assert!((s[0] - 0.01).abs() < 5e-4, "{s:?}");
    }
}
