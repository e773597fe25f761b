//! Dual side: the rank-one fronthaul multipliers `Λ_m(β)` obtained by a
//! Schur-type recursion on `Γ(β) = I + Σ_k β_k h_k h_k†`, and the fixed point
//! iteration `β ← I(β)` on the SINR multipliers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, outer, real, CMat, CVec};
use crate::model::{DualSolution, ProblemInstance};

/// Absolute guard on the leading pivot of each Schur step.
pub const PIVOT_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DualIterConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Dual objective above which the instance is declared infeasible.
    pub power_cap: f64,
    /// Starting point; `None` means the zero vector.
    pub beta0: Option<Vec<f64>>,
    /// Share one factorization across users (rank-one downdate of `C_k`).
    pub fast_path: bool,
    /// Keep every iterate (needed for rate diagnostics).
    pub record_iterates: bool,
}

impl Default for DualIterConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            power_cap: 1e8,
            beta0: None,
            fast_path: false,
            record_iterates: false,
        }
    }
}

impl DualIterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("dual tol {} must be positive", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("dual max_iter must be at least 1".into()));
        }
        if !(self.power_cap > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "power_cap {} must be positive",
                self.power_cap
            )));
        }
        Ok(())
    }
}

/// `Γ(β) = I + Σ_k β_k h_k h_k†`.
pub fn gamma_matrix(inst: &ProblemInstance, beta: &[f64]) -> CMat {
    let m = inst.num_relays();
    let mut g = CMat::identity(m, m);
    for (h, &b) in inst.channels().iter().zip(beta) {
        if b != 0.0 {
            g += outer(h).scale(b);
        }
    }
    g
}

/// `S_η(Γ) = Γ₂₂ − Γ₂₁Γ₁₂ / ((η/(η−1)) Γ₁₁)`, an `(n−1)×(n−1)` matrix.
pub fn schur_step(gamma: &CMat, eta: f64) -> Result<CMat> {
    let n = gamma.nrows();
    if !(eta > 1.0) {
        return Err(Error::InvalidParameter(format!("eta {eta} must exceed 1")));
    }
    let pivot = gamma[(0, 0)].re;
    if !(pivot > PIVOT_EPS) {
        return Err(Error::NumericalPivot { pivot });
    }
    if n == 1 {
        return Ok(CMat::zeros(0, 0));
    }
    let col = gamma.view((1, 0), (n - 1, 1)).clone_owned();
    let row = gamma.view((0, 1), (1, n - 1)).clone_owned();
    let denom = eta / (eta - 1.0) * pivot;
    Ok(gamma.view((1, 1), (n - 1, n - 1)).clone_owned() - (col * row).unscale(denom))
}

/// The multipliers `{Λ_m(β)}` together with their rank-one factors.
#[derive(Debug, Clone)]
pub struct LambdaSet {
    pub lambdas: Vec<CMat>,
    pub vectors: Vec<CVec>,
}

impl LambdaSet {
    /// Diagonal pivots `Λ_m^{(m,m)}`.
    pub fn pivots(&self) -> Vec<f64> {
        self.lambdas
            .iter()
            .enumerate()
            .map(|(m, l)| l[(m, m)].re)
            .collect()
    }
}

/// Solves `D(β, {Λ_m}) = 0` for rank-one `Λ_m` supported on `(m.., m..)`.
///
/// Relay `m` consumes the leading row of the current block `Γ_m^{(m:M,m:M)}`:
/// the pivot of `λ_m` is `√(Γ₁₁/(η−1))` and its tail is `Γ₂₁/(η λ_m^{(m)})`.
/// The next block is `S_η` of the current one.
pub fn lambda_recursion(inst: &ProblemInstance, beta: &[f64]) -> Result<LambdaSet> {
    let m_total = inst.num_relays();
    let etas = inst.compression_factors();
    let mut block = gamma_matrix(inst, beta);
    let mut lambdas = Vec::with_capacity(m_total);
    let mut vectors = Vec::with_capacity(m_total);
    for (m, &eta) in etas.iter().enumerate() {
        let n = block.nrows();
        let pivot = block[(0, 0)].re;
        if !(pivot > PIVOT_EPS) {
            return Err(Error::NumericalPivot { pivot });
        }
        let head = (pivot / (eta - 1.0)).sqrt();
        let mut lam = CVec::zeros(m_total);
        lam[m] = real(head);
        for j in 1..n {
            lam[m + j] = block[(j, 0)].unscale(eta * head);
        }
        lambdas.push(outer(&lam));
        vectors.push(lam);
        block = schur_step(&block, eta)?;
    }
    Ok(LambdaSet { lambdas, vectors })
}

/// Frobenius norm of
/// `I + Σ_k β_k h_k h_k† + Σ_m Λ_m^{(m,m)} E_m − Σ_m 2^{C̄_m} (0 ⊕ Λ_m^{(m:M,m:M)})`.
pub fn dual_residual_d(inst: &ProblemInstance, beta: &[f64], lambdas: &[CMat]) -> f64 {
    linalg::frobenius(&d_matrix(inst, beta, lambdas))
}

pub(crate) fn d_matrix(inst: &ProblemInstance, beta: &[f64], lambdas: &[CMat]) -> CMat {
    let m_total = inst.num_relays();
    let mut d = gamma_matrix(inst, beta);
    for (m, (lam, eta)) in lambdas.iter().zip(inst.compression_factors()).enumerate() {
        d[(m, m)] += real(lam[(m, m)].re);
        let tail = lam.view((m, m), (m_total - m, m_total - m)).clone_owned();
        d -= linalg::embed_trailing(&tail, m_total).scale(eta);
    }
    d
}

/// `C_k = I + Σ_{j≠k} β_j h_j h_j† + Σ_m Λ_m^{(m,m)} E_m`.
pub fn c_matrix(inst: &ProblemInstance, beta: &[f64], pivots: &[f64], k: usize) -> CMat {
    let mut c = gamma_matrix(inst, beta);
    c -= outer(inst.channel(k)).scale(beta[k]);
    for (m, &p) in pivots.iter().enumerate() {
        c[(m, m)] += real(p);
    }
    c
}

/// `C_k^{-1} h_k` for every user, one Hermitian factorization per user.
pub fn whitened_channels(inst: &ProblemInstance, beta: &[f64], pivots: &[f64]) -> Result<Vec<CVec>> {
    (0..inst.num_users())
        .map(|k| {
            let c = c_matrix(inst, beta, pivots, k);
            linalg::hpd_solve(&c, inst.channel(k))
                .ok_or_else(|| Error::Domain(format!("C_{k} is not positive definite")))
        })
        .collect()
}

/// `I_k(β) = γ̄_k / (h_k† C_k(β)^{-1} h_k)` with `Λ_m = Λ_m(β)`.
pub fn i_map(inst: &ProblemInstance, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(inst, beta)?;
    let lams = lambda_recursion(inst, beta)?;
    i_map_with(inst, beta, &lams.pivots())
}

fn i_map_with(inst: &ProblemInstance, beta: &[f64], pivots: &[f64]) -> Result<Vec<f64>> {
    let xs = whitened_channels(inst, beta, pivots)?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(k, x)| inst.sinr_targets()[k] / inst.channel(k).dotc(x).re)
        .collect())
}

/// Same map as [`i_map`], but factorizes `A = C_k + β_k h_k h_k†` (common to
/// all users) once and applies the rank-one correction:
/// `h_k† C_k^{-1} h_k = a_k / (1 − β_k a_k)` with `a_k = h_k† A^{-1} h_k`.
pub fn i_map_fast(inst: &ProblemInstance, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(inst, beta)?;
    let lams = lambda_recursion(inst, beta)?;
    i_map_fast_with(inst, beta, &lams.pivots())
}

fn i_map_fast_with(inst: &ProblemInstance, beta: &[f64], pivots: &[f64]) -> Result<Vec<f64>> {
    let mut a = gamma_matrix(inst, beta);
    for (m, &p) in pivots.iter().enumerate() {
        a[(m, m)] += real(p);
    }
    let chol = nalgebra::Cholesky::new(linalg::hermitian_part(&a))
        .ok_or_else(|| Error::Domain("shared dual matrix is not positive definite".into()))?;
    Ok(inst
        .channels()
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let a_k = h.dotc(&chol.solve(h)).re;
            inst.sinr_targets()[k] * (1.0 / a_k - beta[k])
        })
        .collect())
}

fn check_beta(inst: &ProblemInstance, beta: &[f64]) -> Result<()> {
    if beta.len() != inst.num_users() {
        return Err(Error::Dimension(format!(
            "beta has {} entries, expected K = {}",
            beta.len(),
            inst.num_users()
        )));
    }
    if let Some(b) = beta.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::Domain(format!("beta entry {b} must be nonnegative")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterStatus {
    Converged,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DualRun {
    pub status: IterStatus,
    /// Last iterate.
    pub beta: Vec<f64>,
    /// Present only when converged.
    pub solution: Option<DualSolution>,
    /// Objective per iterate, starting with `β^{(0)}`.
    pub trace: Vec<TraceRow>,
    /// All iterates including `β^{(0)}` when `record_iterates` is set.
    pub iterates: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl DualRun {
    pub fn objectives(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }
}

/// Iterates `β^{(i+1)} = I(β^{(i)})` until the largest relative change drops
/// to `cfg.tol`, or the dual objective `Σ_k β_k σ_k²` exceeds `cfg.power_cap`.
pub fn dual_fpi(inst: &ProblemInstance, cfg: &DualIterConfig) -> Result<DualRun> {
    cfg.validate()?;
    let k = inst.num_users();
    let mut beta = cfg.beta0.clone().unwrap_or_else(|| vec![0.0; k]);
    check_beta(inst, &beta)?;
    let sigma2 = inst.noise_powers();
    let objective = |b: &[f64]| b.iter().zip(sigma2).map(|(x, s)| x * s).sum::<f64>();

    let mut trace = vec![TraceRow {
        iteration: 0,
        objective: objective(&beta),
        step_norm: 0.0,
    }];
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(beta.clone());
    }

    for iter in 1..=cfg.max_iter {
        let lams = lambda_recursion(inst, &beta)?;
        let next = if cfg.fast_path {
            i_map_fast_with(inst, &beta, &lams.pivots())?
        } else {
            i_map_with(inst, &beta, &lams.pivots())?
        };
        let obj = objective(&next);
        let mut step_sq = 0.0;
        let mut rel = 0.0_f64;
        for (a, b) in next.iter().zip(&beta) {
            let d = a - b;
            step_sq += d * d;
            rel = rel.max(d.abs() / a);
        }
        trace.push(TraceRow {
            iteration: iter,
            objective: obj,
            step_norm: step_sq.sqrt(),
        });
        beta = next;
        if cfg.record_iterates {
            iterates.push(beta.clone());
        }
        if !(obj <= cfg.power_cap) {
            return Ok(DualRun {
                status: IterStatus::Infeasible,
                beta,
                solution: None,
                trace,
                iterates,
                iterations: iter,
            });
        }
        if rel <= cfg.tol {
            let lams = lambda_recursion(inst, &beta)?;
            let solution = DualSolution {
                beta: beta.clone(),
                lambdas: lams.lambdas,
                lambda_vectors: lams.vectors,
            };
            return Ok(DualRun {
                status: IterStatus::Converged,
                beta,
                solution: Some(solution),
                trace,
                iterates,
                iterations: iter,
            });
        }
    }
    Ok(DualRun {
        status: IterStatus::IterationLimit,
        beta,
        solution: None,
        trace,
        iterates,
        iterations: cfg.max_iter,
    })
}
