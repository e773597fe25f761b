//! Convergence-rate quantities: the Thompson metric, the dual rate bound
//! `λ(β*)/(1+λ(β*))`, the primal contraction factor and measured tail rates.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{self, DualIterConfig, IterStatus};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{DualSolution, ProblemInstance};
use crate::primal::PrimalMap;
use crate::scenario::{self, Scenario};

/// Tolerance of the extra solve that stands in for `β*`.
pub const REFERENCE_TOL: f64 = 1e-13;
/// Ratios averaged by [`practical_dual_rate`].
pub const TAIL_WINDOW: usize = 20;
/// Final ratios dropped as roundoff-dominated.
pub const TAIL_SKIP: usize = 3;

/// `max_k |ln(β1_k / β2_k)|`.
pub fn thompson_metric(beta1: &[f64], beta2: &[f64]) -> Result<f64> {
    if beta1.len() != beta2.len() {
        return Err(Error::Dimension("metric arguments differ in length".into()));
    }
    let mut out = 0.0_f64;
    for (a, b) in beta1.iter().zip(beta2) {
        if !(*a > 0.0 && *b > 0.0) {
            return Err(Error::Domain(format!("thompson metric needs positive entries, got {a} and {b}")));
        }
        out = out.max((a / b).ln().abs());
    }
    Ok(out)
}

/// `max_k ‖C_k(β, {Λ_m(β)}) − I‖₂`.
pub fn lambda_of_beta(inst: &ProblemInstance, beta: &[f64]) -> Result<f64> {
    let lams = dual::lambda_recursion(inst, beta)?;
    let pivots = lams.pivots();
    let m = inst.num_relays();
    Ok((0..inst.num_users())
        .map(|k| linalg::hermitian_norm2(&(dual::c_matrix(inst, beta, &pivots, k) - CMat::identity(m, m))))
        .fold(0.0, f64::max))
}

/// `λ(β*)/(1 + λ(β*))`.
pub fn dual_rate_bound(inst: &ProblemInstance, beta_star: &[f64]) -> Result<f64> {
    let lam = lambda_of_beta(inst, beta_star)?;
    Ok(lam / (1.0 + lam))
}

/// `κ(α, λ) = log_α((1 + αλ)/(1 + λ))`.
pub fn kappa(alpha: f64, lambda: f64) -> f64 {
    ((1.0 + alpha * lambda) / (1.0 + lambda)).ln() / alpha.ln()
}

/// Spectral radii of the probed Jacobian of `J` and of the literal rate matrix.
pub fn primal_rate(inst: &ProblemInstance, dual: &DualSolution, dirs: &[CVec]) -> Result<(f64, f64)> {
    let map = PrimalMap::new(inst, dual, dirs)?;
    let (g, _) = map.affine_parts();
    Ok((linalg::spectral_radius(&g), linalg::spectral_radius(&map.literal_rate_matrix())))
}

/// Mean of `μ(β⁽ⁱ⁺¹⁾, β*) / μ(β⁽ⁱ⁾, β*)` over the last [`TAIL_WINDOW`] ratios,
/// after dropping the final [`TAIL_SKIP`]. Iterates with a zero entry are skipped.
pub fn practical_dual_rate(iterates: &[Vec<f64>], beta_star: &[f64]) -> Option<f64> {
    let mus: Vec<f64> = iterates
        .iter()
        .filter(|b| b.iter().all(|x| *x > 0.0))
        .filter_map(|b| thompson_metric(b, beta_star).ok())
        .collect();
    let ratios: Vec<f64> = mus
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.len() <= TAIL_SKIP {
        return None;
    }
    let usable = &ratios[..ratios.len() - TAIL_SKIP];
    let tail = &usable[usable.len().saturating_sub(TAIL_WINDOW)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub gamma_db: f64,
    pub theoretical_rate: f64,
    pub practical_rate: f64,
    pub iters: usize,
}

/// Solves with recorded iterates, then refines `β*` at [`REFERENCE_TOL`].
pub fn measure_rates(inst: &ProblemInstance, cfg: &DualIterConfig) -> Result<(f64, f64, usize)> {
    let run_cfg = DualIterConfig {
        record_iterates: true,
        ..cfg.clone()
    };
    let run = dual::dual_fpi(inst, &run_cfg)?;
    match run.status {
        IterStatus::Converged => {}
        IterStatus::Infeasible => return Err(Error::Infeasible),
        IterStatus::IterationLimit => return Err(Error::NotConverged(run.iterations)),
    }
    let reference = dual::dual_fpi(
        inst,
        &DualIterConfig {
            tol: REFERENCE_TOL,
            beta0: Some(run.beta.clone()),
            record_iterates: false,
            ..cfg.clone()
        },
    )?;
    let beta_star = reference.beta;
    let bound = dual_rate_bound(inst, &beta_star)?;
    let practical = practical_dual_rate(&run.iterates, &beta_star).unwrap_or(f64::NAN);
    Ok((bound, practical, run.iterations))
}

/// One row per target, all on the channel draw of `sc.seed`.
pub fn rate_table(sc: &Scenario, gamma_list: &[f64], cfg: &DualIterConfig) -> Result<Vec<RateRow>> {
    let base = scenario::generate_instance(sc)?;
    gamma_list
        .par_iter()
        .map(|&g| {
            let inst = base.with_uniform_target_db(g)?;
            let (theoretical_rate, practical_rate, iters) = measure_rates(&inst, cfg)?;
            Ok(RateRow {
                gamma_db: g,
                theoretical_rate,
                practical_rate,
                iters,
            })
        })
        .collect()
}

pub fn write_rate_csv(rows: &[RateRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
