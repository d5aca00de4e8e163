//! Bounded-data-uncertainty (BDU) estimation.
//!
//! Minimizes the worst-case residual
//! `max ‖(P + δP) x − (y + δy)‖₂` over `‖δP‖₂ ≤ χ_P`, `‖δy‖₂ ≤ χ_y`, which
//! equals `‖P x − y‖₂ + χ_P ‖x‖₂ + χ_y`. The minimizer is a ridge solution
//! `x̂ = (PᵀP + θI)⁻¹ Pᵀy` whose θ solves `θ ‖x̂(θ)‖ = χ_P ‖P x̂(θ) − y‖`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BduConfig {
    pub chi_p: f64,
    pub chi_y: f64,
    pub theta_tol: f64,
    pub max_root_iter: usize,
}

impl BduConfig {
    pub fn new(chi_p: f64, chi_y: f64) -> Self {
        BduConfig {
            chi_p,
            chi_y,
            theta_tol: 1e-10,
            max_root_iter: 200,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.chi_p.is_finite() && self.chi_p >= 0.0) {
            return Err(Error::InvalidInput(format!("chi_p must be finite and >= 0, got {}", self.chi_p)));
        }
        if !(self.chi_y.is_finite() && self.chi_y >= 0.0) {
            return Err(Error::InvalidInput(format!("chi_y must be finite and >= 0, got {}", self.chi_y)));
        }
        if !(self.theta_tol > 0.0) {
            return Err(Error::InvalidInput("theta_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BduSolution {
    pub x_hat: Vec<f64>,
    /// Regularization weight. Infinite when `χ_P` is large enough that the
    /// zero estimate is optimal.
    #[serde(serialize_with = "finite_or_null")]
    pub theta: f64,
    pub residual_norm: f64,
    pub secular_residual: f64,
    pub root_iterations: usize,
}

fn finite_or_null<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// `‖P x − y‖₂ + χ_P ‖x‖₂ + χ_y`.
pub fn bdu_objective(p: &Matrix, y: &[f64], x: &[f64], config: &BduConfig) -> Result<f64> {
    let r = linalg::sub(&p.matvec(x)?, y);
    Ok(linalg::norm2_vec(&r) + config.chi_p * linalg::norm2_vec(x) + config.chi_y)
}

struct Ridge<'a> {
    p: &'a Matrix,
    y: &'a [f64],
    gram: Matrix,
    pty: Vec<f64>,
}

struct RidgePoint {
    x: Vec<f64>,
    residual: f64,
    /// `θ‖x‖ − χ_P‖Px − y‖`.
    g: f64,
}

impl Ridge<'_> {
    fn at(&self, theta: f64, chi_p: f64) -> Result<RidgePoint> {
        let mut a = self.gram.clone();
        for i in 0..a.rows() {
            a[(i, i)] += theta;
        }
        let x = Lu::factor(&a)?.solve_vec(&self.pty)?;
        let residual = linalg::norm2_vec(&linalg::sub(&self.p.matvec(&x)?, self.y));
        let g = theta * linalg::norm2_vec(&x) - chi_p * residual;
        Ok(RidgePoint { x, residual, g })
    }
}

pub fn solve_bdu(p: &Matrix, y: &[f64], config: &BduConfig) -> Result<BduSolution> {
    config.validate()?;
    if y.len() != p.rows() {
        return Err(Error::Dimension(format!(
            "P has {} rows but y has {} entries",
            p.rows(),
            y.len()
        )));
    }
    p.ensure_finite("measurement matrix")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurement vector"));
    }
    if p.rows() < p.cols() {
        return Err(Error::Unobservable {
            rank: p.rows(),
            states: p.cols(),
        });
    }
    let cols = p.cols();
    let y_norm = linalg::norm2_vec(y);
    if y_norm == 0.0 {
        return Ok(BduSolution {
            x_hat: vec![0.0; cols],
            theta: 0.0,
            residual_norm: 0.0,
            secular_residual: 0.0,
            root_iterations: 0,
        });
    }
    let ridge = Ridge {
        p,
        y,
        gram: p.gram(),
        pty: p.tr_matvec(y)?,
    };
    let chi = config.chi_p;
    let ls = ridge.at(0.0, chi)?;
    let tol = |r: f64| config.theta_tol * (1.0 + r);
    if chi == 0.0 || ls.g >= -tol(ls.residual) {
        return Ok(BduSolution {
            secular_residual: ls.g.abs(),
            x_hat: ls.x,
            theta: 0.0,
            residual_norm: ls.residual,
            root_iterations: 0,
        });
    }
    // As θ → ∞, θ‖x̂‖ → ‖Pᵀy‖ and the residual → ‖y‖. If χ_P‖y‖ dominates,
    // g stays negative and the minimizer is x = 0.
    let pty_norm = linalg::norm2_vec(&ridge.pty);
    if chi * y_norm >= pty_norm {
        return Ok(BduSolution {
            x_hat: vec![0.0; cols],
            theta: f64::INFINITY,
            residual_norm: y_norm,
            secular_residual: 0.0,
            root_iterations: 0,
        });
    }

    // g(θ0) < 0 because ‖x̂‖ shrinks and the residual grows from the LS point.
    let x_ls_norm = linalg::norm2_vec(&ls.x);
    let mut lo = chi * ls.residual / x_ls_norm;
    let mut lo_point = ridge.at(lo, chi)?;
    if lo_point.g >= 0.0 {
        lo = 0.0;
        lo_point = ls;
    }
    let mut hi = lo.max(chi).max(1e-12) * 2.0;
    let mut iterations = 0;
    let mut hi_point = ridge.at(hi, chi)?;
    while hi_point.g <= 0.0 {
        iterations += 1;
        if iterations > config.max_root_iter {
            return Err(Error::NonConvergence {
                what: "secular equation bracketing",
                iterations,
                residual: hi_point.g,
            });
        }
        lo = hi;
        lo_point = hi_point;
        hi *= 2.0;
        hi_point = ridge.at(hi, chi)?;
    }
    let mut best = if lo_point.g.abs() < hi_point.g.abs() {
        (lo, lo_point)
    } else {
        (hi, hi_point)
    };
    while best.1.g.abs() > tol(best.1.residual) {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if iterations > config.max_root_iter || mid <= lo || mid >= hi {
            return Err(Error::NonConvergence {
                what: "secular equation bisection",
                iterations,
                residual: best.1.g,
            });
        }
        let point = ridge.at(mid, chi)?;
        let better = point.g.abs() < best.1.g.abs();
        if point.g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if better {
            best = (mid, point);
        }
    }
    let (theta, point) = best;
    Ok(BduSolution {
        secular_residual: point.g.abs(),
        x_hat: point.x,
        theta,
        residual_norm: point.residual,
        root_iterations: iterations,
    })
}
