//! Outer bounds on the weighted least-squares state under bounded parameter
//! and measurement uncertainty.
//!
//! The WLS estimate solves the augmented square system
//!
//! ```text
//! [ P      -I     ] [ x   ]   [ y ]
//! [ 0   Pᵀ W⁻¹    ] [ y_d ] = [ 0 ]
//! ```
//!
//! With `P(p) = P0 + Σ Δp_k P_k ε_k` the matrix becomes `A0 + Σ A_k Δp_k ε_k`.
//! Writing the solution set as `f0 + u·[-1, 1]` with `C_k = A0⁻¹ A_k Δp_k`,
//! the radius `u` is the fixed point of
//!
//! ```text
//! u ← Σ_i |A0⁻¹ e_i| Δy_i + Σ_k |C_k f0| + Σ_k |C_k| u,
//! ```
//!
//! iterated from `u = 0` in midpoint-radius form. The iteration contracts
//! exactly when the spectral radius of `Σ_k |C_k|` is below one, which is
//! checked before iterating.
//!
//! The enclosure is an outer solution: it contains every WLS solution for
//! parameters and measurement errors inside the box, but may be wider than
//! the exact componentwise optima.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix};
use crate::measmodel::{MeasurementModel, RowPart, UncertaintySpec};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// `C_k` restricted to its nonzero columns.
#[derive(Debug, Clone)]
pub struct ColumnBlock {
    pub cols: Vec<usize>,
    /// `cols.len()` rows, each holding one full column of `C_k`.
    pub columns: Matrix,
}

impl ColumnBlock {
    pub fn to_dense(&self, dim: usize) -> Matrix {
        let mut m = Matrix::zeros(dim, dim);
        for (c, &col) in self.cols.iter().enumerate() {
            for (i, v) in self.columns.row(c).iter().enumerate() {
                m[(i, col)] = *v;
            }
        }
        m
    }

    /// `C_k v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.cols()];
        for (c, &col) in self.cols.iter().enumerate() {
            let s = v[col];
            if s != 0.0 {
                for (o, a) in out.iter_mut().zip(self.columns.row(c)) {
                    *o += a * s;
                }
            }
        }
        out
    }
}

/// How `A0⁻¹` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseRoute {
    /// Block elimination through the normal matrix `Pᵀ W⁻¹ P`.
    #[default]
    Normal,
    /// LU of the full augmented matrix.
    Dense,
}

#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    /// Measurement count `n`.
    pub n_meas: usize,
    /// State count `2B`.
    pub n_states: usize,
    pub a0: Matrix,
    /// Transpose of `A0⁻¹`: row `r` is column `r` of the inverse.
    pub a0_inv_t: Matrix,
    pub b_z: Vec<f64>,
    pub f0: Vec<f64>,
    /// `C_k = A0⁻¹ A_k Δp_k`, one per uncertain parameter.
    pub c: Vec<ColumnBlock>,
    /// Bound on the floating-point error of `f0`.
    pub rounding_radius: Vec<f64>,
    /// Diagonal of `W` (variances).
    pub w_diag: Vec<f64>,
}

impl AugmentedSystem {
    pub fn dim(&self) -> usize {
        self.n_meas + self.n_states
    }

    /// Dense `A_k` (without the `Δp_k` factor).
    pub fn a_k(&self, spec: &UncertaintySpec, k: usize) -> Matrix {
        let dim = self.dim();
        let mut a = Matrix::zeros(dim, dim);
        for &(i, j, v) in &spec.sensitivities[k].entries {
            a[(i, j)] += v;
            a[(self.n_meas + j, self.n_states + i)] += v / self.w_diag[i];
        }
        a
    }
}

fn augmented_matrix(p: &Matrix, w_diag: &[f64]) -> Matrix {
    let (n, s) = (p.rows(), p.cols());
    let mut a = Matrix::zeros(n + s, s + n);
    for i in 0..n {
        for j in 0..s {
            a[(i, j)] = p[(i, j)];
            a[(n + j, s + i)] = p[(i, j)] / w_diag[i];
        }
        a[(i, s + i)] = -1.0;
    }
    a
}

/// `A0⁻¹` from `N = Pᵀ W⁻¹ P`: for right-hand side `[a; b]`,
/// `x = N⁻¹ (b + Pᵀ W⁻¹ a)` and `y_d = P x - a`.
fn inverse_via_normal(p: &Matrix, w_diag: &[f64]) -> Result<Matrix> {
    let (n, s) = (p.rows(), p.cols());
    let mut g = p.transpose();
    for j in 0..s {
        for (i, v) in g.row_mut(j).iter_mut().enumerate() {
            *v /= w_diag[i];
        }
    }
    let normal = g.matmul(p)?;
    let lu = Lu::factor(&normal)?;
    let n_inv = lu.inverse()?;
    // P is sparse, so form products with P on the left; N⁻¹ is symmetric,
    // hence N⁻¹ G = (W⁻¹ P N⁻¹)ᵀ.
    let p_n_inv = p.matmul(&n_inv)?; // n × s
    let mut w_p_n_inv = p_n_inv.clone();
    for i in 0..n {
        w_p_n_inv.row_mut(i).iter_mut().for_each(|v| *v /= w_diag[i]);
    }
    let n_inv_g = w_p_n_inv.transpose(); // s × n
    let p_n_inv_g = p.matmul(&n_inv_g)?; // n × n
    let dim = n + s;
    let mut inv = Matrix::zeros(dim, dim);
    for r in 0..s {
        inv.row_mut(r)[..n].copy_from_slice(n_inv_g.row(r));
        inv.row_mut(r)[n..].copy_from_slice(n_inv.row(r));
    }
    for r in 0..n {
        let row = inv.row_mut(s + r);
        row[..n].copy_from_slice(p_n_inv_g.row(r));
        row[r] -= 1.0;
        row[n..].copy_from_slice(p_n_inv.row(r));
    }
    Ok(inv)
}

pub fn build_augmented(
    model: &MeasurementModel,
    w_diag: &[f64],
    spec: &UncertaintySpec,
    y: &[f64],
) -> Result<AugmentedSystem> {
    build_augmented_with(model, w_diag, spec, y, InverseRoute::default())
}

pub fn build_augmented_with(
    model: &MeasurementModel,
    w_diag: &[f64],
    spec: &UncertaintySpec,
    y: &[f64],
    route: InverseRoute,
) -> Result<AugmentedSystem> {
    let p = &model.p0;
    let (n, s) = (p.rows(), p.cols());
    if y.len() != n || w_diag.len() != n {
        return Err(Error::Dimension(format!(
            "P is {n}x{s} but y has {} entries and W has {}",
            y.len(),
            w_diag.len()
        )));
    }
    if w_diag.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be positive and finite".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurement vector"));
    }
    let dim = n + s;
    let a0 = augmented_matrix(p, w_diag);
    let a0_inv = match route {
        InverseRoute::Normal => inverse_via_normal(p, w_diag)?,
        InverseRoute::Dense => Lu::factor(&a0)?.inverse()?,
    };
    let a0_inv_t = a0_inv.transpose();

    let mut b_z = y.to_vec();
    b_z.resize(dim, 0.0);
    let mut f0 = a0_inv.matvec(&b_z)?;
    // One step of iterative refinement against the true augmented matrix.
    let r = linalg::sub(&b_z, &a0.matvec(&f0)?);
    let correction = a0_inv.matvec(&r)?;
    f0.iter_mut().zip(&correction).for_each(|(f, c)| *f += c);

    // Componentwise error bound |A0⁻¹| (|r| + γ (|A0||f0| + |b|)).
    let r = linalg::sub(&b_z, &a0.matvec(&f0)?);
    let gamma = (dim as f64 + 2.0) * f64::EPSILON;
    let a0_abs_f = a0.abs().matvec(&f0.iter().map(|v| v.abs()).collect::<Vec<_>>())?;
    let slack: Vec<f64> = r
        .iter()
        .zip(&a0_abs_f)
        .zip(&b_z)
        .map(|((ri, af), b)| ri.abs() + gamma * (af + b.abs()))
        .collect();
    let rounding_radius = a0_inv.abs().matvec(&slack)?;

    let mut c = Vec::with_capacity(spec.params.len());
    for (param, sens) in spec.params.iter().zip(&spec.sensitivities) {
        // Nonzero entries of A_k: P_k at (i, j) and P_kᵀ W⁻¹ at (n + j, s + i).
        let mut cols: Vec<usize> = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut add = |row: usize, col: usize, v: f64| {
            let slot = match cols.iter().position(|&c| c == col) {
                Some(pos) => pos,
                None => {
                    cols.push(col);
                    columns.push(vec![0.0; dim]);
                    cols.len() - 1
                }
            };
            let scale = v * param.delta;
            for (o, a) in columns[slot].iter_mut().zip(a0_inv_t.row(row)) {
                *o += a * scale;
            }
        };
        if param.delta != 0.0 {
            for &(i, j, v) in &sens.entries {
                add(i, j, v);
                add(n + j, s + i, v / w_diag[i]);
            }
        }
        let count = cols.len();
        c.push(ColumnBlock {
            cols,
            columns: Matrix::from_vec(count, dim, columns.concat())?,
        });
    }

    Ok(AugmentedSystem {
        n_meas: n,
        n_states: s,
        a0,
        a0_inv_t,
        b_z,
        f0,
        c,
        rounding_radius,
        w_diag: w_diag.to_vec(),
    })
}

/// Midpoint-radius interval vector `center + radius·[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl IntervalVector {
    pub fn lower(&self) -> Vec<f64> {
        self.center.iter().zip(&self.radius).map(|(c, r)| c - r).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.center.iter().zip(&self.radius).map(|(c, r)| c + r).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RadiusSolution {
    pub interval: IntervalVector,
    pub iterations: usize,
    /// Power-iteration estimate of the spectral radius of `Σ |C_k|`.
    pub spectral_radius: f64,
}

/// Radius of `[w]` from the parameter terms alone: `Σ_k |C_k f0|`.
pub fn parameter_radius(sys: &AugmentedSystem) -> Vec<f64> {
    let mut w = vec![0.0; sys.dim()];
    for ck in &sys.c {
        for (o, v) in w.iter_mut().zip(ck.apply(&sys.f0)) {
            *o += v.abs();
        }
    }
    w
}

/// Radius contributed by the measurement errors: `Σ_i |A0⁻¹ e_i| Δy_i`.
pub fn measurement_radius(sys: &AugmentedSystem, delta_y: &[f64]) -> Result<Vec<f64>> {
    if delta_y.len() != sys.n_meas {
        return Err(Error::Dimension(format!(
            "{} measurement bounds for {} measurements",
            delta_y.len(),
            sys.n_meas
        )));
    }
    let mut w = vec![0.0; sys.dim()];
    for (i, &dy) in delta_y.iter().enumerate() {
        if dy < 0.0 || !dy.is_finite() {
            return Err(Error::InvalidInput(format!("measurement bound {dy} at row {i}")));
        }
        if dy == 0.0 {
            continue;
        }
        for (o, a) in w.iter_mut().zip(sys.a0_inv_t.row(i)) {
            *o += a.abs() * dy;
        }
    }
    Ok(w)
}

/// `Σ_k |C_k|`, returned transposed (row `c` holds column `c`).
fn abs_sum_transposed(sys: &AugmentedSystem) -> Matrix {
    let dim = sys.dim();
    let mut mt = Matrix::zeros(dim, dim);
    for ck in &sys.c {
        for (c, &col) in ck.cols.iter().enumerate() {
            for (o, a) in mt.row_mut(col).iter_mut().zip(ck.columns.row(c)) {
                *o += a.abs();
            }
        }
    }
    mt
}

/// Spectral radius of a nonnegative matrix (given transposed) by power
/// iteration, with a Collatz–Wielandt upper bound used to stop early once the
/// radius is certainly below one.
fn spectral_radius_nonneg(mt: &Matrix) -> Result<f64> {
    let dim = mt.rows();
    if dim == 0 || mt.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0; dim];
    let mut estimate = 0.0;
    for _ in 0..2000 {
        // Keep v strictly positive so the ratio bound is defined.
        let mv: Vec<f64> = mt.tr_matvec(&v)?.iter().map(|x| x + 1e-300).collect();
        let ratios = mv.iter().zip(&v).map(|(a, b)| a / b);
        let (lower, upper) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
        let next = linalg::norm2_vec(&mv) / linalg::norm2_vec(&v);
        let scale = linalg::norm_inf_vec(&mv);
        v = mv.iter().map(|x| x / scale + 1e-12).collect();
        // Collatz–Wielandt: lower ≤ ρ ≤ upper, enough to decide either way.
        if upper < 1.0 {
            return Ok(next.min(upper));
        }
        if lower >= 1.0 {
            return Ok(next.max(lower));
        }
        if (next - estimate).abs() <= 1e-9 * next {
            return Ok(next);
        }
        estimate = next;
    }
    Ok(estimate)
}

pub fn iterate_radius(
    sys: &AugmentedSystem,
    delta_y: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<RadiusSolution> {
    let mut w = parameter_radius(sys);
    for (o, v) in w.iter_mut().zip(measurement_radius(sys, delta_y)?) {
        *o += v;
    }
    for (o, v) in w.iter_mut().zip(&sys.rounding_radius) {
        *o += v;
    }
    let mt = abs_sum_transposed(sys);
    let rho = spectral_radius_nonneg(&mt)?;
    if rho >= 1.0 {
        return Err(Error::Divergent(rho));
    }
    let mut u = vec![0.0; sys.dim()];
    for it in 1..=max_iter {
        let mut next = mt.tr_matvec(&u)?;
        next.iter_mut().zip(&w).for_each(|(n, wi)| *n += wi);
        let step = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        if !step.is_finite() {
            break;
        }
        if step <= tol {
            return Ok(RadiusSolution {
                interval: IntervalVector {
                    center: sys.f0.clone(),
                    radius: u,
                },
                iterations: it,
                spectral_radius: rho,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "interval radius iteration",
        iterations: max_iter,
        residual: rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Nominal WLS estimate (center of the enclosure).
    pub center: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl StateBounds {
    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }
}

/// Keeps the state block of the enclosure; the `y_d` block is discarded.
pub fn state_bounds(sys: &AugmentedSystem, radius: &RadiusSolution) -> StateBounds {
    let s = sys.n_states;
    let iv = &radius.interval;
    StateBounds {
        lower: iv.lower()[..s].to_vec(),
        upper: iv.upper()[..s].to_vec(),
        center: iv.center[..s].to_vec(),
        iterations: radius.iterations,
        converged: true,
    }
}

/// Full pipeline: augmented system, radius iteration, state bounds.
pub fn estimate_bounds(
    model: &MeasurementModel,
    w_diag: &[f64],
    spec: &UncertaintySpec,
    y: &[f64],
) -> Result<(StateBounds, RadiusSolution)> {
    let sys = build_augmented(model, w_diag, spec, y)?;
    let rad = iterate_radius(&sys, &spec.delta_y, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok((state_bounds(&sys, &rad), rad))
}

/// CSV dump: `component_index,part,bus_id,lower,center,upper`.
pub fn bounds_csv(model: &MeasurementModel, bounds: &StateBounds) -> String {
    let mut out = String::from("component_index,part,bus_id,lower,center,upper\n");
    for j in 0..bounds.lower.len() {
        let (bus, part) = model.bus_id_of_state(j);
        let part = if part == RowPart::Real { "real" } else { "imag" };
        let _ = writeln!(
            out,
            "{j},{part},{bus},{:e},{:e},{:e}",
            bounds.lower[j], bounds.center[j], bounds.upper[j]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseio::parse_case;
    use crate::data;
    use crate::measmodel::{
        build_measurement_matrix, perturb_parameters, simulate_measurements,
        uncertainty_for_model, weight_diagonal, PmuPlacement, Sensitivity,
        UncertainParameter, AdmittancePart,
    };

    fn setup(name: &str, dev: f64, tve: f64, seed: u64) -> (MeasurementModel, UncertaintySpec, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (ct, pt) = data::bundled(name).unwrap();
        let case = parse_case(ct).unwrap();
        let placement = PmuPlacement::parse(pt).unwrap();
        let perturbed = perturb_parameters(&case, dev, seed).unwrap();
        let mv = simulate_measurements(&perturbed, &placement, tve, seed + 1).unwrap();
        let model = build_measurement_matrix(&case, &placement).unwrap();
        let spec = uncertainty_for_model(&case, &model, dev, tve, &mv.true_y).unwrap();
        let w = weight_diagonal(&mv.sigma);
        (model, spec, w, mv.y, mv.x_true)
    }

    /// Scalar toy system with a chosen C and w radius.
    fn scalar_system(c: f64, w: f64) -> AugmentedSystem {
        AugmentedSystem {
            n_meas: 0,
            n_states: 1,
            a0: Matrix::identity(1),
            a0_inv_t: Matrix::identity(1),
            b_z: vec![0.0],
            f0: vec![1.0],
            c: vec![ColumnBlock {
                cols: vec![0],
                columns: Matrix::from_vec(1, 1, vec![c]).unwrap(),
            }],
            rounding_radius: vec![w - c],
            w_diag: vec![],
        }
    }

    #[test]
    fn geometric_series_fixed_point() {
        // w-radius = |C f0| + rounding = 0.1 + 0.9 = 1.
        let sys = scalar_system(0.1, 1.0);
        let rad = iterate_radius(&sys, &[], 1e-12, 1000).unwrap();
        assert!((rad.interval.radius[0] - 1.0 / 0.9).abs() < 1e-10);
        assert!((rad.spectral_radius - 0.1).abs() < 1e-9);
    }

    #[test]
    fn divergence_detected() {
        let sys = scalar_system(1.5, 2.0);
        assert!(matches!(iterate_radius(&sys, &[], 1e-12, 1000), Err(Error::Divergent(r)) if r >= 1.0));
    }

    #[test]
    fn exactly_determined_system() {
        let model = MeasurementModel {
            p0: Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]).unwrap(),
            channels: vec![],
            n_bus: 1,
            bus_ids: vec![1],
            series: vec![],
        };
        let spec = UncertaintySpec {
            params: vec![],
            sensitivities: vec![],
            delta_y: vec![0.0, 0.0],
            chi_p: 0.0,
            chi_y: 0.0,
            xi: 0.0,
        };
        let y = [1.0, 2.0];
        let sys = build_augmented(&model, &[1.0, 1.0], &spec, &y).unwrap();
        let direct = crate::linalg::Lu::factor(&model.p0).unwrap().solve_vec(&y).unwrap();
        for (a, b) in sys.f0[..2].iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        let rad = iterate_radius(&sys, &spec.delta_y, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(rad.iterations, 1);
        assert!(rad.interval.radius.iter().all(|r| *r < 1e-14));
    }

    #[test]
    fn zero_deltas_give_zero_c() {
        let (model, spec, w, y, _) = setup("case5", 0.0, 0.01, 3);
        let sys = build_augmented(&model, &w, &spec, &y).unwrap();
        assert!(sys.c.iter().all(|c| c.cols.is_empty()));
    }

    #[test]
    fn augmented_blocks_and_normal_equations() {
        let (model, spec, w, y, _) = setup("case14", 0.3, 0.01, 11);
        let sys = build_augmented(&model, &w, &spec, &y).unwrap();
        let (n, s) = (sys.n_meas, sys.n_states);
        for i in 0..n {
            assert_eq!(sys.a0[(i, s + i)], -1.0);
            for j in 0..s {
                assert_eq!(sys.a0[(i, j)], model.p0[(i, j)]);
                assert_eq!(sys.a0[(n + j, j.min(s - 1))], 0.0);
                assert_eq!(sys.a0[(n + j, s + i)], model.p0[(i, j)] / w[i]);
            }
        }
        // Normal equations solved independently.
        let mut wp = model.p0.clone();
        for i in 0..n {
            wp.row_mut(i).iter_mut().for_each(|v| *v /= w[i]);
        }
        let normal = wp.transpose().matmul(&model.p0).unwrap();
        let rhs = wp.tr_matvec(&y).unwrap();
        let x = Lu::factor(&normal).unwrap().solve_vec(&rhs).unwrap();
        for (a, b) in sys.f0[..s].iter().zip(&x) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_routes_agree() {
        let (model, spec, w, y, _) = setup("case14", 0.3, 0.01, 12);
        let a = build_augmented_with(&model, &w, &spec, &y, InverseRoute::Normal).unwrap();
        let b = build_augmented_with(&model, &w, &spec, &y, InverseRoute::Dense).unwrap();
        for (x, z) in a.f0.iter().zip(&b.f0) {
            assert!((x - z).abs() < 1e-9);
        }
        let k = spec.params.iter().position(|p| p.delta > 0.0).unwrap();
        let ca = a.c[k].to_dense(a.dim());
        let cb = b.c[k].to_dense(b.dim());
        let mut d = ca.clone();
        d.add_scaled(&cb, -1.0).unwrap();
        assert!(d.max_abs() < 1e-7 * ca.max_abs().max(1.0));
        // C_k against its definition A0⁻¹ A_k Δp_k.
        let inv = b.a0_inv_t.transpose();
        let direct = inv.matmul(&b.a_k(&spec, k)).unwrap().scale(spec.params[k].delta);
        let mut d = direct.clone();
        d.add_scaled(&cb, -1.0).unwrap();
        assert!(d.max_abs() < 1e-9 * direct.max_abs().max(1.0));
    }

    #[test]
    fn no_uncertainty_collapses_to_wls() {
        let (model, spec, w, y, x_true) = setup("case14", 0.0, 0.0, 5);
        let (bounds, rad) = estimate_bounds(&model, &w, &spec, &y).unwrap();
        assert!(rad.iterations <= 2);
        for j in 0..x_true.len() {
            assert!(bounds.upper[j] - bounds.lower[j] <= 1e-8);
            assert!(bounds.lower[j] <= x_true[j] && x_true[j] <= bounds.upper[j], "component {j}");
        }
    }

    #[test]
    fn measurement_only_path_matches_parameter_path_when_dy_zero() {
        let (model, spec, w, y, _) = setup("case5", 0.1, 0.01, 8);
        let sys = build_augmented(&model, &w, &spec, &y).unwrap();
        let zero = vec![0.0; sys.n_meas];
        let m = measurement_radius(&sys, &zero).unwrap();
        assert!(m.iter().all(|v| *v == 0.0));
        let mut manual = parameter_radius(&sys);
        manual.iter_mut().zip(&sys.rounding_radius).for_each(|(a, b)| *a += b);
        let full = iterate_radius(&sys, &zero, 1e-14, 1000).unwrap();
        // First sweep from u = 0 returns [w] itself.
        let one = match iterate_radius(&sys, &zero, f64::INFINITY, 1) {
            Ok(r) => r,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(one.interval.radius, manual);
        assert!(full.interval.radius.iter().zip(&manual).all(|(a, b)| a >= b));
    }

    #[test]
    fn radius_monotone_in_iterations_and_uncertainty() {
        let (model, spec, w, y, _) = setup("case5", 0.1, 0.01, 9);
        let sys = build_augmented(&model, &w, &spec, &y).unwrap();
        let mut prev = vec![0.0; sys.dim()];
        let mt = abs_sum_transposed(&sys);
        let mut wv = parameter_radius(&sys);
        for (o, v) in wv.iter_mut().zip(measurement_radius(&sys, &spec.delta_y).unwrap()) {
            *o += v;
        }
        let mut u = vec![0.0; sys.dim()];
        for _ in 0..50 {
            let mut next = mt.tr_matvec(&u).unwrap();
            next.iter_mut().zip(&wv).for_each(|(n, w)| *n += w);
            assert!(next.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = next.clone();
            u = next;
        }

        let full = iterate_radius(&sys, &spec.delta_y, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let mut half = spec.clone();
        half.params.iter_mut().for_each(|p| p.delta *= 0.5);
        half.delta_y.iter_mut().for_each(|d| *d *= 0.5);
        let sys_half = build_augmented(&model, &w, &half, &y).unwrap();
        let smaller = iterate_radius(&sys_half, &half.delta_y, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for (a, b) in smaller.interval.radius.iter().zip(&full.interval.radius) {
            assert!(a <= b);
        }
    }

    #[test]
    fn full_box_at_thirty_percent_diverges() {
        let (model, spec, w, y, _) = setup("case5", 0.3, 0.01, 4);
        let sys = build_augmented(&model, &w, &spec, &y).unwrap();
        match iterate_radius(&sys, &spec.delta_y, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            Err(Error::Divergent(rho)) => assert!(rho > 1.0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn realized_deltas_converge_and_contain_truth_on_case5() {
        use crate::measmodel::use_realized_deltas;
        let (ct, pt) = data::bundled("case5").unwrap();
        let case = parse_case(ct).unwrap();
        let placement = PmuPlacement::parse(pt).unwrap();
        let perturbed = perturb_parameters(&case, 0.3, 21).unwrap();
        let mv = simulate_measurements(&perturbed, &placement, 0.01, 22).unwrap();
        let model = build_measurement_matrix(&case, &placement).unwrap();
        let mut spec = uncertainty_for_model(&case, &model, 0.3, 0.01, &mv.true_y).unwrap();
        use_realized_deltas(&mut spec, &perturbed, model.n_rows(), model.n_states()).unwrap();
        let w = weight_diagonal(&mv.sigma);
        let (bounds, rad) = estimate_bounds(&model, &w, &spec, &mv.y).unwrap();
        assert!(rad.iterations <= DEFAULT_MAX_ITER && rad.spectral_radius < 1.0);
        assert!(bounds.widths().iter().all(|w| *w > 0.0));
        for (j, x) in mv.x_true.iter().enumerate() {
            assert!(bounds.lower[j] <= *x && *x <= bounds.upper[j], "component {j}");
        }
    }

    #[test]
    fn enclosure_holds_for_sampled_systems() {
        use rand::{Rng, SeedableRng};
        let (model, spec, w, y, _) = setup("case5", 0.1, 0.01, 13);
        let (bounds, _) = estimate_bounds(&model, &w, &spec, &y).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let (mut inside, mut total) = (0usize, 0usize);
        for _ in 0..200 {
            let eps: Vec<f64> = (0..spec.params.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let p = spec.expand(&model.p0, &eps);
            let yy: Vec<f64> = y
                .iter()
                .zip(&spec.delta_y)
                .map(|(v, d)| v + d * rng.random_range(-1.0..=1.0))
                .collect();
            let mut wp = p.clone();
            for i in 0..p.rows() {
                wp.row_mut(i).iter_mut().for_each(|v| *v /= w[i]);
            }
            let normal = wp.transpose().matmul(&p).unwrap();
            let x = Lu::factor(&normal).unwrap().solve_vec(&wp.tr_matvec(&yy).unwrap()).unwrap();
            for (j, v) in x.iter().enumerate() {
                total += 1;
                if bounds.lower[j] <= *v && *v <= bounds.upper[j] {
                    inside += 1;
                }
            }
        }
        assert!(inside as f64 >= 0.99 * total as f64, "{inside}/{total}");
    }

    #[test]
    fn center_is_contained() {
        let (model, spec, w, y, _) = setup("case5", 0.1, 0.01, 10);
        let (bounds, _) = estimate_bounds(&model, &w, &spec, &y).unwrap();
        for j in 0..bounds.center.len() {
            assert!(bounds.lower[j] <= bounds.center[j] && bounds.center[j] <= bounds.upper[j]);
        }
    }

    #[test]
    fn dense_a_k_matches_sparse_pattern() {
        let model = MeasurementModel {
            p0: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            channels: vec![],
            n_bus: 1,
            bus_ids: vec![1],
            series: vec![],
        };
        let spec = UncertaintySpec {
            params: vec![UncertainParameter {
                branch: 0,
                part: AdmittancePart::Conductance,
                nominal: 1.0,
                delta: 0.5,
            }],
            sensitivities: vec![Sensitivity {
                entries: vec![(2, 1, 2.0)],
            }],
            delta_y: vec![0.0; 3],
            chi_p: 0.0,
            chi_y: 0.0,
            xi: 0.0,
        };
        let sys = build_augmented(&model, &[1.0, 2.0, 4.0], &spec, &[1.0, 1.0, 2.0]).unwrap();
        let a = sys.a_k(&spec, 0);
        assert_eq!(a[(2, 1)], 2.0);
        assert_eq!(a[(3 + 1, 2 + 2)], 0.5);
        assert_eq!(a.as_slice().iter().filter(|v| **v != 0.0).count(), 2);
    }
}
