//! Solver-independent certification of a primal/dual pair.
//!
//! Every residual is made relative to a natural scale of the quantity it
//! checks, floored at [`SCALE_FLOOR`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dual;
use crate::linalg::{self, CMat};
use crate::model::{total_power, DualSolution, PrimalSolution, ProblemInstance};

pub const SCALE_FLOOR: f64 = 1e-12;
/// Relative eigenvalue cutoff of the generalized Schur complement.
pub const PINV_CUTOFF: f64 = 1e-12;

fn rel(value: f64, scale: f64) -> f64 {
    value.abs() / scale.max(SCALE_FLOOR)
}

/// `|h_k†v_k|² / (Σ_{j≠k} |h_k†v_j|² + h_k†Q h_k + σ_k²)`.
pub fn sinr(inst: &ProblemInstance, sol: &PrimalSolution, k: usize) -> f64 {
    let (signal, interference) = sinr_terms(inst, sol, k);
    signal / interference
}

/// `(signal, interference + compression + noise)` for user `k`.
fn sinr_terms(inst: &ProblemInstance, sol: &PrimalSolution, k: usize) -> (f64, f64) {
    let h = inst.channel(k);
    let mut signal = 0.0;
    let mut rest = inst.noise_powers()[k] + linalg::quad_form(&sol.q, h);
    for (j, v) in sol.beamformers.iter().enumerate() {
        let g = h.dotc(v).norm_sqr();
        if j == k {
            signal = g;
        } else {
            rest += g;
        }
    }
    (signal, rest)
}

/// `Σ_k |v_{k,m}|² + Q^{(m,m)}`.
fn relay_load(sol: &PrimalSolution, m: usize) -> f64 {
    sol.beamformers.iter().map(|v| v[m].norm_sqr()).sum::<f64>() + sol.q[(m, m)].re
}

/// Generalized Schur complement of `Q^{(m+1:M,m+1:M)}` in `Q^{(m:M,m:M)}`.
pub fn compression_residual(q: &CMat, m: usize) -> f64 {
    let n = q.nrows() - m - 1;
    let qmm = q[(m, m)].re;
    if n == 0 {
        return qmm;
    }
    let trailing = q.view((m + 1, m + 1), (n, n)).clone_owned();
    let col = q.view((m + 1, m), (n, 1)).column(0).clone_owned();
    let pinv = linalg::hermitian_pinv(&trailing, PINV_CUTOFF);
    qmm - col.dotc(&(pinv * &col)).re
}

/// Compression rate `log₂(load/q_m)` of relay `m`, with the conventions
/// `0` for an unused relay and `+∞` when `q_m` vanishes under a nonzero load.
pub fn fronthaul_rate(inst: &ProblemInstance, sol: &PrimalSolution, m: usize) -> f64 {
    let _ = inst;
    let load = relay_load(sol, m);
    let qm = compression_residual(&sol.q, m);
    let eps = 1e-12 * load.max(SCALE_FLOOR);
    if qm <= eps {
        if load <= SCALE_FLOOR {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (load / qm).log2()
    }
}

/// `B_m = 2^{C̄_m} (0 ⊕ Q^{(m:M,m:M)}) − (Σ_k V_k^{(m,m)} + Q^{(m,m)}) E_m`.
pub fn fronthaul_matrix(inst: &ProblemInstance, sol: &PrimalSolution, m: usize) -> CMat {
    let m_total = inst.num_relays();
    let eta = inst.fronthaul_caps()[m].exp2();
    let tail = sol.q.view((m, m), (m_total - m, m_total - m)).clone_owned();
    let mut b = linalg::embed_trailing(&tail, m_total).scale(eta);
    b[(m, m)] -= linalg::real(relay_load(sol, m));
    b
}

/// Smallest eigenvalue of the `(m:M, m:M)` block of `B_m`. The leading
/// `m − 1` rows and columns of `B_m` vanish identically and are excluded.
pub fn fronthaul_psd_constraint(inst: &ProblemInstance, sol: &PrimalSolution, m: usize) -> f64 {
    let m_total = inst.num_relays();
    let b = fronthaul_matrix(inst, sol, m);
    linalg::min_eigenvalue(&b.view((m, m), (m_total - m, m_total - m)).clone_owned())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub passed: bool,
    pub tol: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap_rel: f64,
    /// Residual name to relative value; each must be at most `tol`.
    pub residuals: BTreeMap<String, f64>,
    pub failing: Vec<String>,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization")
    }
}

/// Checks the enhanced KKT system of `(primal, dual)` and the duality gap.
///
/// Residuals (all relative):
/// - `sinr_equality`: `max_k |a_k|` over the sum of the magnitudes of its terms
/// - `fronthaul_psd`: `max_m max(0, −λ_min(B_m))` over `2^{C̄_m}‖Q^{(m:M,m:M)}‖ + load_m`
/// - `q_psd`: `max(0, −λ_min(Q)) / tr Q`
/// - `dual_equation`: `‖D‖_F / ‖Γ(β)‖_F`
/// - `dual_cone`: `max_k max(0, −λ_min(C_k − β_k/γ̄_k h_k h_k†)) / ‖C_k‖`
/// - `dual_sign`: most negative `β_k` over `max β`
/// - `slack_fronthaul`: `max_m |tr(Λ_m B_m)|`, same scale times `‖Λ_m‖`
/// - `slack_sinr`: `max_k |v_k†(C_k − β_k/γ̄_k h_k h_k†) v_k|`
/// - `duality_gap`: `|primal − dual| / max(1, dual)`
pub fn certify(inst: &ProblemInstance, primal: &PrimalSolution, dual: &DualSolution, tol: f64) -> Certificate {
    let m_total = inst.num_relays();
    let k_total = inst.num_users();
    let mut residuals = BTreeMap::new();

    let mut sinr_res = 0.0_f64;
    for k in 0..k_total {
        let (signal, rest) = sinr_terms(inst, primal, k);
        let target = inst.sinr_targets()[k];
        let a_k = signal / target - rest;
        sinr_res = sinr_res.max(rel(a_k, signal / target + rest));
    }
    residuals.insert("sinr_equality".to_string(), sinr_res);

    let mut fh_res = 0.0_f64;
    let mut bs = Vec::with_capacity(m_total);
    let mut b_scales = Vec::with_capacity(m_total);
    for m in 0..m_total {
        let b = fronthaul_matrix(inst, primal, m);
        let block = b.view((m, m), (m_total - m, m_total - m)).clone_owned();
        // B_m can vanish at the optimum, so scale by its two terms instead
        let q_tail = primal.q.view((m, m), (m_total - m, m_total - m)).clone_owned();
        let scale = inst.fronthaul_caps()[m].exp2() * linalg::frobenius(&q_tail) + relay_load(primal, m);
        fh_res = fh_res.max(rel((-linalg::min_eigenvalue(&block)).max(0.0), scale));
        bs.push(b);
        b_scales.push(scale);
    }
    residuals.insert("fronthaul_psd".to_string(), fh_res);

    let q_min = linalg::min_eigenvalue(&primal.q);
    residuals.insert(
        "q_psd".to_string(),
        rel((-q_min).max(0.0), primal.q.trace().re),
    );

    let gamma = dual::gamma_matrix(inst, &dual.beta);
    residuals.insert(
        "dual_equation".to_string(),
        rel(
            dual::dual_residual_d(inst, &dual.beta, &dual.lambdas),
            linalg::frobenius(&gamma),
        ),
    );

    let pivots: Vec<f64> = dual.lambdas.iter().enumerate().map(|(m, l)| l[(m, m)].re).collect();
    let mut cone_res = 0.0_f64;
    let mut slack_sinr = 0.0_f64;
    for k in 0..k_total {
        let c = dual::c_matrix(inst, &dual.beta, &pivots, k);
        let c_norm = linalg::hermitian_norm2(&c);
        let h = inst.channel(k);
        let pencil = &c - linalg::outer(h).scale(dual.beta[k] / inst.sinr_targets()[k]);
        cone_res = cone_res.max(rel((-linalg::min_eigenvalue(&pencil)).max(0.0), c_norm));
        let v = &primal.beamformers[k];
        slack_sinr = slack_sinr.max(rel(linalg::quad_form(&pencil, v), c_norm * v.norm_squared()));
    }
    residuals.insert("dual_cone".to_string(), cone_res);
    residuals.insert("slack_sinr".to_string(), slack_sinr);

    let beta_max = dual.beta.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let beta_min = dual.beta.iter().fold(0.0_f64, |a, b| a.min(*b));
    residuals.insert("dual_sign".to_string(), rel(beta_min, beta_max));

    let mut slack_fh = 0.0_f64;
    for ((lam, b), scale) in dual.lambdas.iter().zip(&bs).zip(&b_scales) {
        let value = (lam * b).trace().re;
        slack_fh = slack_fh.max(rel(value, linalg::frobenius(lam) * scale));
    }
    residuals.insert("slack_fronthaul".to_string(), slack_fh);

    let primal_objective = total_power(primal);
    let dual_objective = dual.objective(inst);
    let gap = (primal_objective - dual_objective).abs() / dual_objective.max(1.0);
    residuals.insert("duality_gap".to_string(), gap);

    let failing: Vec<String> = residuals
        .iter()
        .filter(|(_, v)| !(**v <= tol))
        .map(|(k, _)| k.clone())
        .collect();
    Certificate {
        passed: failing.is_empty(),
        tol,
        primal_objective,
        dual_objective,
        duality_gap_rel: gap,
        residuals,
        failing,
    }
}
