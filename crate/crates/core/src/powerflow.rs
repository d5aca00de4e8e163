//! Bus admittance matrix and Newton–Raphson AC power flow (polar form).
//!
//! Reactive limits of generators are not enforced; a PV bus stays PV.

use num_complex::Complex64;

use crate::caseio::{BusKind, GenStatus, NetworkCase};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

pub type C64 = Complex64;

/// Two-port admittance parameters of one in-service branch:
/// `I_from = y_ff V_f + y_ft V_t`, `I_to = y_tf V_f + y_tt V_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiBranch {
    /// Position of the branch in `NetworkCase::branches`.
    pub case_index: usize,
    pub from: usize,
    pub to: usize,
    pub y_series: C64,
    pub b_total: f64,
    pub tap: f64,
    /// radians
    pub shift: f64,
    pub y_ff: C64,
    pub y_ft: C64,
    pub y_tf: C64,
    pub y_tt: C64,
}

impl PiBranch {
    pub fn from_parts(
        case_index: usize,
        from: usize,
        to: usize,
        y_series: C64,
        b_total: f64,
        tap: f64,
        shift: f64,
    ) -> Self {
        let (ff, ft, tf, tt) = two_port(y_series, b_total, tap, shift);
        Self {
            case_index,
            from,
            to,
            y_series,
            b_total,
            tap,
            shift,
            y_ff: ff,
            y_ft: ft,
            y_tf: tf,
            y_tt: tt,
        }
    }
}

/// Pi-model two-port entries for series admittance `ys`, total charging `b`
/// and complex ratio `tap∠shift` on the from side.
pub fn two_port(ys: C64, b: f64, tap: f64, shift: f64) -> (C64, C64, C64, C64) {
    let half = C64::new(0.0, b / 2.0);
    let t = C64::from_polar(tap, shift);
    let ff = (ys + half) / (tap * tap);
    let ft = -ys / t.conj();
    let tf = -ys / t;
    let tt = ys + half;
    (ff, ft, tf, tt)
}

#[derive(Debug, Clone)]
pub struct AdmittanceModel {
    pub n_bus: usize,
    /// Row-major dense bus admittance matrix.
    pub y_bus: Vec<C64>,
    pub branches: Vec<PiBranch>,
    /// Bus shunt admittance in p.u.
    pub bus_shunt: Vec<C64>,
}

impl AdmittanceModel {
    pub fn y(&self, i: usize, j: usize) -> C64 {
        self.y_bus[i * self.n_bus + j]
    }

    /// `Y V`.
    pub fn injections(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n_bus)
            .map(|i| {
                self.y_bus[i * self.n_bus..(i + 1) * self.n_bus]
                    .iter()
                    .zip(v)
                    .map(|(y, v)| y * v)
                    .sum()
            })
            .collect()
    }
}

pub fn build_admittance(case: &NetworkCase) -> Result<AdmittanceModel> {
    let n = case.bus_count();
    let mut y_bus = vec![C64::new(0.0, 0.0); n * n];
    let mut branches = Vec::new();
    for (k, br) in case.branches.iter().enumerate() {
        if !br.in_service() {
            continue;
        }
        let z = C64::new(br.r, br.x);
        if z.norm_sqr() == 0.0 {
            return Err(Error::InvalidCase(format!(
                "branch {} ({} -> {}) has zero series impedance",
                k + 1,
                br.from_bus,
                br.to_bus
            )));
        }
        let f = case.bus_index(br.from_bus).expect("validated endpoint");
        let t = case.bus_index(br.to_bus).expect("validated endpoint");
        let pi = PiBranch::from_parts(
            k,
            f,
            t,
            z.inv(),
            br.b_total,
            br.effective_tap(),
            br.shift.to_radians(),
        );
        y_bus[f * n + f] += pi.y_ff;
        y_bus[f * n + t] += pi.y_ft;
        y_bus[t * n + f] += pi.y_tf;
        y_bus[t * n + t] += pi.y_tt;
        branches.push(pi);
    }
    let bus_shunt: Vec<C64> = case
        .buses
        .iter()
        .map(|b| C64::new(b.g_shunt, b.b_shunt) / case.base_mva)
        .collect();
    for (i, s) in bus_shunt.iter().enumerate() {
        y_bus[i * n + i] += s;
    }
    Ok(AdmittanceModel {
        n_bus: n,
        y_bus,
        branches,
        bus_shunt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCurrent {
    pub from: C64,
    pub to: C64,
}

/// From-end and to-end currents of every in-service branch, in the order of
/// `model.branches`.
pub fn branch_currents(model: &AdmittanceModel, v: &[C64]) -> Vec<BranchCurrent> {
    model
        .branches
        .iter()
        .map(|b| BranchCurrent {
            from: b.y_ff * v[b.from] + b.y_ft * v[b.to],
            to: b.y_tf * v[b.from] + b.y_tt * v[b.to],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVoltageProfile {
    pub v: Vec<C64>,
    pub iterations: usize,
    /// Largest absolute power mismatch at exit, p.u.
    pub mismatch: f64,
}

impl ComplexVoltageProfile {
    /// Stacked rectangular state: all real parts, then all imaginary parts.
    pub fn stacked(&self) -> Vec<f64> {
        stack(&self.v)
    }
}

pub fn stack(v: &[C64]) -> Vec<f64> {
    v.iter().map(|c| c.re).chain(v.iter().map(|c| c.im)).collect()
}

pub fn unstack(x: &[f64]) -> Vec<C64> {
    let b = x.len() / 2;
    (0..b).map(|i| C64::new(x[i], x[b + i])).collect()
}

pub const DEFAULT_PF_TOL: f64 = 1e-8;
pub const DEFAULT_PF_MAX_ITER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Slack,
    Pv,
    Pq,
}

/// Scheduled net injection per bus (generation minus load), p.u.
pub fn scheduled_injection(case: &NetworkCase) -> Vec<C64> {
    let mut s: Vec<C64> = case
        .buses
        .iter()
        .map(|b| -C64::new(b.p_demand, b.q_demand) / case.base_mva)
        .collect();
    for g in case.generators.iter().filter(|g| g.status == GenStatus::On) {
        let i = case.bus_index(g.bus).expect("validated generator bus");
        s[i] += C64::new(g.p_gen, g.q_gen) / case.base_mva;
    }
    s
}

fn mismatch(model: &AdmittanceModel, v: &[C64], s_spec: &[C64]) -> Vec<C64> {
    model
        .injections(v)
        .iter()
        .zip(v)
        .zip(s_spec)
        .map(|((i, v), s)| v * i.conj() - s)
        .collect()
}

pub fn solve_power_flow(
    case: &NetworkCase,
    tol: f64,
    max_iter: usize,
) -> Result<ComplexVoltageProfile> {
    case.check_connected()?;
    let model = build_admittance(case)?;
    let n = case.bus_count();

    let mut roles: Vec<Role> = case
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack => Role::Slack,
            BusKind::Pv => Role::Pv,
            BusKind::Pq => Role::Pq,
        })
        .collect();
    let mut vm: Vec<f64> = case.buses.iter().map(|b| b.v_mag_init).collect();
    let va: Vec<f64> = case.buses.iter().map(|b| b.v_ang_init.to_radians()).collect();
    let mut regulated = vec![false; n];
    for g in case.generators.iter().filter(|g| g.status == GenStatus::On) {
        let i = case.bus_index(g.bus).expect("validated generator bus");
        if roles[i] != Role::Pq && !regulated[i] {
            vm[i] = g.v_setpoint;
            regulated[i] = true;
        }
    }
    // A PV bus without an online generator cannot hold its voltage.
    for i in 0..n {
        if roles[i] == Role::Pv && !regulated[i] {
            roles[i] = Role::Pq;
        }
    }
    if vm.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidCase("non-positive voltage setpoint".into()));
    }

    let pvpq: Vec<usize> = (0..n).filter(|&i| roles[i] != Role::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| roles[i] == Role::Pq).collect();
    let s_spec = scheduled_injection(case);
    let mut v: Vec<C64> = vm.iter().zip(&va).map(|(&m, &a)| C64::from_polar(m, a)).collect();

    let residual = |mis: &[C64]| -> f64 {
        pvpq.iter()
            .map(|&i| mis[i].re.abs())
            .chain(pq.iter().map(|&i| mis[i].im.abs()))
            .fold(0.0, f64::max)
    };

    let mut mis = mismatch(&model, &v, &s_spec);
    let mut norm = residual(&mis);
    let dim = pvpq.len() + pq.len();
    for iter in 0..=max_iter {
        if !norm.is_finite() {
            break;
        }
        if norm <= tol {
            return Ok(ComplexVoltageProfile {
                v,
                iterations: iter,
                mismatch: norm,
            });
        }
        if iter == max_iter {
            break;
        }
        let jac = jacobian(&model, &v, &pvpq, &pq);
        let rhs: Vec<f64> = pvpq
            .iter()
            .map(|&i| mis[i].re)
            .chain(pq.iter().map(|&i| mis[i].im))
            .collect();
        debug_assert_eq!(rhs.len(), dim);
        let dx = Lu::factor(&jac)?.solve_vec(&rhs)?;
        let mut vm: Vec<f64> = v.iter().map(|c| c.norm()).collect();
        let mut va: Vec<f64> = v.iter().map(|c| c.arg()).collect();
        for (k, &i) in pvpq.iter().enumerate() {
            va[i] -= dx[k];
        }
        for (k, &i) in pq.iter().enumerate() {
            vm[i] -= dx[pvpq.len() + k];
        }
        v = vm.iter().zip(&va).map(|(&m, &a)| C64::from_polar(m, a)).collect();
        mis = mismatch(&model, &v, &s_spec);
        norm = residual(&mis);
    }
    Err(Error::NonConvergence {
        what: "Newton-Raphson power flow",
        iterations: max_iter,
        residual: norm,
    })
}

/// Real Jacobian of the mismatch with respect to (angles of pvpq, magnitudes
/// of pq).
fn jacobian(model: &AdmittanceModel, v: &[C64], pvpq: &[usize], pq: &[usize]) -> Matrix {
    let ibus = model.injections(v);
    let vnorm: Vec<C64> = v.iter().map(|c| c / c.norm()).collect();
    let j = C64::new(0.0, 1.0);
    // dS_i/dVa_k = j V_i conj(I_i δ_ik - Y_ik V_k)
    // dS_i/dVm_k = V_i conj(Y_ik Vn_k) + δ_ik conj(I_i) Vn_i
    let ds_dva = |i: usize, k: usize| -> C64 {
        let d = if i == k { ibus[i] } else { C64::new(0.0, 0.0) };
        j * v[i] * (d - model.y(i, k) * v[k]).conj()
    };
    let ds_dvm = |i: usize, k: usize| -> C64 {
        let mut s = v[i] * (model.y(i, k) * vnorm[k]).conj();
        if i == k {
            s += ibus[i].conj() * vnorm[i];
        }
        s
    };
    let (npv, npq) = (pvpq.len(), pq.len());
    let mut jac = Matrix::zeros(npv + npq, npv + npq);
    for (r, &i) in pvpq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(r, c)] = ds_dva(i, k).re;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(r, npv + c)] = ds_dvm(i, k).re;
        }
    }
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(npv + r, c)] = ds_dva(i, k).im;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(npv + r, npv + c)] = ds_dvm(i, k).im;
        }
    }
    jac
}

/// Complex power balance at a solved point: (net bus injection, branch plus
/// shunt losses). The two agree at any physically consistent solution.
pub fn power_balance(model: &AdmittanceModel, v: &[C64]) -> (C64, C64) {
    let injected: C64 = model
        .injections(v)
        .iter()
        .zip(v)
        .map(|(i, v)| v * i.conj())
        .sum();
    let branch_losses: C64 = branch_currents(model, v)
        .iter()
        .zip(&model.branches)
        .map(|(c, b)| v[b.from] * c.from.conj() + v[b.to] * c.to.conj())
        .sum();
    let shunt_losses: C64 = model
        .bus_shunt
        .iter()
        .zip(v)
        .map(|(y, v)| v * (y * v).conj())
        .sum();
    (injected, branch_losses + shunt_losses)
}
