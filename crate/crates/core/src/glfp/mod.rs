//! Joint estimation of the state and an elementwise uncertainty level by
//! generalized linear-fractional programming (GLFP).
//!
//! With every entry of `P` and `y` perturbed by at most `ξ`, the smallest
//! consistent `ξ` is
//!
//! ```text
//! min_x  max_i |l_iᵀ x − y_i| / (ζᵀ|x| + 1).
//! ```
//!
//! Restricted to the closed orthant `D_s x ≥ 0` the absolute values become
//! linear, and for a fixed level `v` the problem is an LP feasibility check.
//! Each orthant is solved by bisection on `v`, and the best orthant wins.
//!
//! The denominator is positive without an explicit constraint: on the orthant
//! `ζᵀ D_s x ≥ 0` because `ζ ≥ 0` componentwise, so it is at least one.

mod simplex;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use simplex::feasible_point;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_STATES: usize = 24;
const V_HI_LIMIT: f64 = 1e6;
const LP_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GlfpProblem {
    pub p: Matrix,
    pub y: Vec<f64>,
    /// `ζ_j = 1` iff column `j` carries uncertainty.
    pub zeta: Vec<f64>,
}

impl GlfpProblem {
    /// All columns uncertain.
    pub fn new(p: Matrix, y: Vec<f64>) -> Result<Self> {
        let zeta = vec![1.0; p.cols()];
        Self::with_uncertain_columns(p, y, zeta)
    }

    pub fn with_uncertain_columns(p: Matrix, y: Vec<f64>, zeta: Vec<f64>) -> Result<Self> {
        if y.len() != p.rows() || zeta.len() != p.cols() {
            return Err(Error::Dimension(format!(
                "P is {}x{}, y has {} entries, zeta has {}",
                p.rows(),
                p.cols(),
                y.len(),
                zeta.len()
            )));
        }
        if zeta.iter().any(|z| *z != 0.0 && *z != 1.0) {
            return Err(Error::InvalidInput("zeta entries must be 0 or 1".into()));
        }
        p.ensure_finite("GLFP matrix")?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("GLFP measurements"));
        }
        Ok(GlfpProblem { p, y, zeta })
    }

    pub fn n_states(&self) -> usize {
        self.p.cols()
    }

    /// Indices of uncertain columns.
    pub fn lambda_set(&self) -> Vec<usize> {
        (0..self.zeta.len()).filter(|&j| self.zeta[j] == 1.0).collect()
    }

    /// `max_i |l_iᵀx − y_i| / (ζᵀ|x| + 1)`.
    pub fn ratio(&self, x: &[f64]) -> f64 {
        let den = 1.0 + self.zeta.iter().zip(x).map(|(z, v)| z * v.abs()).sum::<f64>();
        let r = self.p.matvec(x).expect("dimension checked");
        r.iter()
            .zip(&self.y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / den
    }

    /// LP rows of `{ |l_iᵀx − y_i| ≤ v(ζᵀD_s x + 1) }` in `z = D_s x ≥ 0`.
    fn constraints(&self, s: &[f64], v: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.p.rows();
        let mut a = Vec::with_capacity(2 * n);
        let mut b = Vec::with_capacity(2 * n);
        for i in 0..n {
            let l = self.p.row(i);
            let plus: Vec<f64> = (0..l.len()).map(|j| s[j] * l[j] - v * self.zeta[j]).collect();
            let minus: Vec<f64> = (0..l.len()).map(|j| -s[j] * l[j] - v * self.zeta[j]).collect();
            a.push(plus);
            b.push(self.y[i] + v);
            a.push(minus);
            b.push(v - self.y[i]);
        }
        (a, b)
    }

    fn feasible(&self, s: &[f64], v: f64) -> Option<Vec<f64>> {
        let (a, b) = self.constraints(s, v);
        feasible_point(&a, &b, self.n_states(), LP_TOL)
            .map(|z| z.iter().zip(s).map(|(zi, si)| zi * si).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedSubproblem {
    pub s: Vec<f64>,
    /// Optimal ratio within the tolerance, or `+∞` when no `v ≤ 1e6` works.
    pub v: f64,
    pub x: Option<Vec<f64>>,
    pub lp_solves: usize,
}

/// Bisection on the ratio level for the orthant `diag(s) x ≥ 0`.
///
/// The upper end starts at `v_hi` and doubles until feasible or beyond
/// `1e6`. Bisection stops once the bracket is narrower than `tol`; `v` is
/// the feasible end and `x` its witness.
pub fn solve_signed(problem: &GlfpProblem, s: &[f64], v_lo: f64, v_hi: f64, tol: f64) -> Result<SignedSubproblem> {
    if s.len() != problem.n_states() || s.iter().any(|v| v.abs() != 1.0) {
        return Err(Error::InvalidInput("sign vector must contain ±1 per state".into()));
    }
    if !(v_lo < v_hi) || !(tol > 0.0) || v_lo < 0.0 {
        return Err(Error::InvalidInput(format!(
            "need 0 <= v_lo < v_hi and tol > 0 (got {v_lo}, {v_hi}, {tol})"
        )));
    }
    let mut solves = 0;
    let mut hi = v_hi;
    let mut witness = loop {
        solves += 1;
        if let Some(x) = problem.feasible(s, hi) {
            break x;
        }
        if hi >= V_HI_LIMIT {
            return Ok(SignedSubproblem {
                s: s.to_vec(),
                v: f64::INFINITY,
                x: None,
                lp_solves: solves,
            });
        }
        hi = (hi * 2.0).min(V_HI_LIMIT);
    };
    let mut lo = v_lo;
    if v_lo > 0.0 {
        solves += 1;
        if let Some(x) = problem.feasible(s, v_lo) {
            hi = v_lo;
            witness = x;
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        solves += 1;
        match problem.feasible(s, mid) {
            Some(x) => {
                hi = mid;
                witness = x;
            }
            None => lo = mid,
        }
    }
    Ok(SignedSubproblem {
        s: s.to_vec(),
        v: hi,
        x: Some(witness),
        lp_solves: solves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlfpSolution {
    pub xi_hat: f64,
    pub x_star: Vec<f64>,
    pub evaluated_signs: usize,
    pub pruned_signs: usize,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlfpOptions {
    pub tol: f64,
    pub max_states: usize,
    /// Worker threads; 1 keeps everything on the calling thread.
    pub jobs: usize,
}

impl Default for GlfpOptions {
    fn default() -> Self {
        GlfpOptions {
            tol: DEFAULT_TOL,
            max_states: DEFAULT_MAX_STATES,
            jobs: 1,
        }
    }
}

/// Sign vector for Gray-code index `k`: bit `j` set means `s_j = -1`.
pub fn gray_signs(k: u64, dim: usize) -> Vec<f64> {
    let g = k ^ (k >> 1);
    (0..dim).map(|j| if g >> j & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Shared best level, stored as `f64` bits (order-preserving for `v ≥ 0`).
struct Incumbent(AtomicU64);

impl Incumbent {
    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }

    fn lower_to(&self, v: f64) {
        self.0.fetch_min(v.to_bits(), Ordering::AcqRel);
    }
}

enum Outcome {
    Pruned,
    Solved(SignedSubproblem),
}

fn evaluate(problem: &GlfpProblem, k: u64, incumbent: &Incumbent, tol: f64) -> Result<Outcome> {
    let s = gray_signs(k, problem.n_states());
    let best = incumbent.get();
    if best.is_finite() && problem.feasible(&s, best).is_none() {
        return Ok(Outcome::Pruned);
    }
    let sub = solve_signed(problem, &s, 0.0, 1.0, tol)?;
    if sub.v.is_finite() {
        incumbent.lower_to(sub.v);
    }
    Ok(Outcome::Solved(sub))
}

pub fn solve_glfp(problem: &GlfpProblem, options: &GlfpOptions) -> Result<GlfpSolution> {
    let dim = problem.n_states();
    if dim > options.max_states || dim >= 64 {
        return Err(Error::DimensionGuard(format!(
            "GLFP enumerates 2^{dim} sign vectors; the limit is {} states",
            options.max_states
        )));
    }
    if !(options.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let start = Instant::now();
    let total: u64 = 1 << dim;
    let incumbent = Incumbent(AtomicU64::new(f64::INFINITY.to_bits()));
    let outcomes: Vec<(u64, Outcome)> = if options.jobs <= 1 {
        (0..total)
            .map(|k| evaluate(problem, k, &incumbent, options.tol).map(|o| (k, o)))
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..total)
                .into_par_iter()
                .map(|k| evaluate(problem, k, &incumbent, options.tol).map(|o| (k, o)))
                .collect::<Result<_>>()
        })?
    };
    let mut pruned = 0;
    let mut evaluated = 0;
    let mut best: Option<(f64, u64, Vec<f64>)> = None;
    for (k, outcome) in outcomes {
        match outcome {
            Outcome::Pruned => pruned += 1,
            Outcome::Solved(sub) => {
                evaluated += 1;
                if let Some(x) = sub.x {
                    let better = match &best {
                        None => true,
                        Some((v, kb, _)) => sub.v < *v || (sub.v == *v && k < *kb),
                    };
                    if better {
                        best = Some((sub.v, k, x));
                    }
                }
            }
        }
    }
    let (xi_hat, _, x_star) = best.ok_or(Error::AllInfeasible)?;
    Ok(GlfpSolution {
        xi_hat,
        x_star,
        evaluated_signs: evaluated,
        pruned_signs: pruned,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(rows: &[f64], y: &[f64]) -> GlfpProblem {
        let p = Matrix::from_vec(rows.len(), 1, rows.to_vec()).unwrap();
        GlfpProblem::new(p, y.to_vec()).unwrap()
    }

    #[test]
    fn consistent_scalar_datum() {
        let prob = scalar(&[1.0], &[1.0]);
        let sub = solve_signed(&prob, &[1.0], 0.0, 1.0, 1e-9).unwrap();
        assert!(sub.v <= 1e-8);
        assert!((sub.x.unwrap()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_inconsistent_data_balance_at_one_third() {
        let prob = scalar(&[1.0, 1.0], &[1.0, 3.0]);
        let sub = solve_signed(&prob, &[1.0], 0.0, 1.0, 1e-10).unwrap();
        assert!((sub.v - 1.0 / 3.0).abs() < 1e-8);
        assert!((sub.x.unwrap()[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_orthant_is_infinite() {
        // Certain column (ζ = 0): |x + 1| <= v with x >= 0 needs v >= 1, but
        // also |x - 1e7| <= v forces v huge.
        let p = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let prob = GlfpProblem::with_uncertain_columns(p, vec![-1e7, 1e7], vec![0.0]).unwrap();
        let sub = solve_signed(&prob, &[1.0], 0.0, 1.0, 1e-6).unwrap();
        assert!(sub.v.is_infinite() && sub.x.is_none());
    }

    #[test]
    fn gray_code_changes_one_sign_at_a_time() {
        for k in 0..63u64 {
            let a = gray_signs(k, 6);
            let b = gray_signs(k + 1, 6);
            assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
        }
        assert_eq!(gray_signs(0, 3), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn consistent_data_recover_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x_true = [0.8, -0.4, 0.3];
        let data: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Matrix::from_vec(6, 3, data).unwrap();
        let y = p.matvec(&x_true).unwrap();
        let prob = GlfpProblem::new(p, y).unwrap();
        let sol = solve_glfp(&prob, &GlfpOptions::default()).unwrap();
        assert!(sol.xi_hat <= 1e-6);
        for (a, b) in sol.x_star.iter().zip(&x_true) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
        assert_eq!(sol.evaluated_signs + sol.pruned_signs, 8);
    }

    #[test]
    fn witness_satisfies_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Matrix::from_vec(6, 2, data).unwrap();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prob = GlfpProblem::new(p, y).unwrap();
        for k in 0..4 {
            let s = gray_signs(k, 2);
            let sub = solve_signed(&prob, &s, 0.0, 1.0, 1e-8).unwrap();
            let x = sub.x.unwrap();
            assert!(x.iter().zip(&s).all(|(a, b)| a * b >= -1e-12));
            assert!(prob.ratio(&x) <= sub.v + 2e-8);
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = Matrix::from_vec(8, 4, data).unwrap();
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let prob = GlfpProblem::new(p, y).unwrap();
        let serial = solve_glfp(&prob, &GlfpOptions::default()).unwrap();
        let par = solve_glfp(&prob, &GlfpOptions { jobs: 4, ..Default::default() }).unwrap();
        assert!((serial.xi_hat - par.xi_hat).abs() <= 1e-12);
        assert!(serial.xi_hat >= 0.0);
    }

    #[test]
    fn dimension_guard() {
        let p = Matrix::zeros(30, 25);
        let prob = GlfpProblem::new(p, vec![0.0; 30]).unwrap();
        assert!(matches!(solve_glfp(&prob, &GlfpOptions::default()), Err(Error::DimensionGuard(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = Matrix::zeros(2, 1);
        assert!(GlfpProblem::new(p.clone(), vec![0.0]).is_err());
        assert!(GlfpProblem::with_uncertain_columns(p.clone(), vec![0.0; 2], vec![0.5]).is_err());
        let prob = GlfpProblem::new(p, vec![0.0; 2]).unwrap();
        assert!(solve_signed(&prob, &[0.5], 0.0, 1.0, 1e-8).is_err());
        assert!(solve_signed(&prob, &[1.0], 1.0, 1.0, 1e-8).is_err());
    }
}
