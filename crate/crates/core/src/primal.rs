//! Primal side: beam directions from the converged dual, the compression
//! covariance `Q(p)` rebuilt backwards from relay `M` to relay `1`, and the
//! affine fixed point iteration `p ← J(p)` on the beam powers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dual::{self, IterStatus, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::{self, real, CMat, CVec};
use crate::model::{DualSolution, PrimalSolution, ProblemInstance};

/// Smallest admissible `|λ_m^{(m)}|`.
pub const DEGENERATE_PIVOT_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PrimalIterConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; `None` means the zero vector.
    pub p0: Option<Vec<f64>>,
    pub record_iterates: bool,
}

impl Default for PrimalIterConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            p0: None,
            record_iterates: false,
        }
    }
}

impl PrimalIterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("primal tol {} must be positive", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("primal max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// `v̂_k = C_k^{-1} h_k / ‖C_k^{-1} h_k‖`, phase-aligned so `h_k† v̂_k > 0`.
pub fn beam_directions(inst: &ProblemInstance, dual: &DualSolution) -> Result<Vec<CVec>> {
    let pivots: Vec<f64> = dual
        .lambdas
        .iter()
        .enumerate()
        .map(|(m, l)| l[(m, m)].re)
        .collect();
    let xs = dual::whitened_channels(inst, &dual.beta, &pivots)?;
    Ok(xs
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let dir = x.unscale(x.norm());
            let proj = inst.channel(k).dotc(&dir);
            if proj.norm() > 0.0 {
                // h† (c v) = c (h† v); rotate by conj(phase)
                dir * (proj.conj() / proj.norm())
            } else {
                dir
            }
        })
        .collect())
}

/// Evaluator for `Q(·)` and `J(·)` at a fixed dual solution and fixed directions.
#[derive(Debug, Clone)]
pub struct PrimalMap<'a> {
    inst: &'a ProblemInstance,
    lambda_vectors: &'a [CVec],
    etas: Vec<f64>,
    directions: Vec<CVec>,
    /// `gains[(k, j)] = |h_k† v̂_j|²`.
    gains: DMatrix<f64>,
    /// `dir_sq[(k, m)] = |v̂_{k,m}|²`.
    dir_sq: DMatrix<f64>,
}

impl<'a> PrimalMap<'a> {
    pub fn new(inst: &'a ProblemInstance, dual: &'a DualSolution, directions: &[CVec]) -> Result<Self> {
        let (m_total, k_total) = (inst.num_relays(), inst.num_users());
        if directions.len() != k_total || dual.lambda_vectors.len() != m_total {
            return Err(Error::Dimension("directions or dual do not match the instance".into()));
        }
        for (m, lam) in dual.lambda_vectors.iter().enumerate() {
            let pivot = lam[m].norm();
            if !(pivot > DEGENERATE_PIVOT_EPS) {
                return Err(Error::DegenerateDual { relay: m, value: pivot });
            }
        }
        let gains = DMatrix::from_fn(k_total, k_total, |k, j| {
            inst.channel(k).dotc(&directions[j]).norm_sqr()
        });
        for k in 0..k_total {
            let scale = inst.channel(k).norm_squared();
            if !(gains[(k, k)] > 1e-14 * scale) {
                return Err(Error::DegenerateDirection { user: k, gain: gains[(k, k)] });
            }
        }
        let dir_sq = DMatrix::from_fn(k_total, m_total, |k, m| directions[k][m].norm_sqr());
        Ok(Self {
            inst,
            lambda_vectors: &dual.lambda_vectors,
            etas: inst.compression_factors(),
            directions: directions.to_vec(),
            gains,
            dir_sq,
        })
    }

    pub fn directions(&self) -> &[CVec] {
        &self.directions
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    /// Solves `B_m({p_k V̂_k}, Q) λ_m = 0` for `m = M, …, 1`.
    pub fn q_of(&self, p: &[f64]) -> CMat {
        let m_total = self.inst.num_relays();
        let mut q = CMat::zeros(m_total, m_total);
        let signal = |m: usize| -> f64 { p.iter().enumerate().map(|(k, pk)| pk * self.dir_sq[(k, m)]).sum() };

        let last = m_total - 1;
        q[(last, last)] = real(signal(last) / (self.etas[last] - 1.0));
        for m in (0..last).rev() {
            let eta = self.etas[m];
            let lam = &self.lambda_vectors[m];
            let head = lam[m];
            let n = m_total - m - 1;
            let tail = lam.rows(m + 1, n).clone_owned();
            let trailing = q.view((m + 1, m + 1), (n, n)).clone_owned();
            let qt_lt = &trailing * &tail;
            let col = qt_lt.map(|z| -z / head);
            let quad = tail.dotc(&qt_lt).re;
            for i in 0..n {
                q[(m + 1 + i, m)] = col[i];
                q[(m, m + 1 + i)] = col[i].conj();
            }
            q[(m, m)] = real(eta / (eta - 1.0) * quad / head.norm_sqr() + signal(m) / (eta - 1.0));
        }
        q
    }

    /// `J_k(p) = γ̄_k (Σ_{j≠k} p_j |h_k†v̂_j|² + h_k† Q(p) h_k + σ_k²) / |h_k†v̂_k|²`.
    pub fn j_of(&self, p: &[f64]) -> Vec<f64> {
        let q = self.q_of(p);
        self.j_with_q(p, &q)
    }

    fn j_with_q(&self, p: &[f64], q: &CMat) -> Vec<f64> {
        let inst = self.inst;
        (0..inst.num_users())
            .map(|k| {
                let interference: f64 = p
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(j, pj)| pj * self.gains[(k, j)])
                    .sum();
                let comp = linalg::quad_form(q, inst.channel(k));
                inst.sinr_targets()[k] * (interference + comp + inst.noise_powers()[k]) / self.gains[(k, k)]
            })
            .collect()
    }

    /// Affine decomposition `J(p) = G p + c`, probed on unit vectors.
    pub fn affine_parts(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k_total = self.inst.num_users();
        let c = DVector::from_vec(self.j_of(&vec![0.0; k_total]));
        let mut g = DMatrix::zeros(k_total, k_total);
        for j in 0..k_total {
            let mut e = vec![0.0; k_total];
            e[j] = 1.0;
            let col = DVector::from_vec(self.j_of(&e)) - &c;
            g.set_column(j, &col);
        }
        (g, c)
    }

    /// The rate matrix written with `Q(e_k)` in every entry of row `k`.
    pub fn literal_rate_matrix(&self) -> DMatrix<f64> {
        let inst = self.inst;
        let k_total = inst.num_users();
        DMatrix::from_fn(k_total, k_total, |k, j| {
            let mut e = vec![0.0; k_total];
            e[k] = 1.0;
            let comp = linalg::quad_form(&self.q_of(&e), inst.channel(k));
            let cross = if j == k { 0.0 } else { self.gains[(k, j)] };
            inst.sinr_targets()[k] * (cross + comp) / self.gains[(k, k)]
        })
    }
}

/// `Q(p)` for the given dual and directions.
pub fn q_from_p(inst: &ProblemInstance, p: &[f64], dual: &DualSolution, dirs: &[CVec]) -> Result<CMat> {
    check_p(inst, p)?;
    Ok(PrimalMap::new(inst, dual, dirs)?.q_of(p))
}

/// `J(p)` for the given dual and directions.
pub fn j_map(inst: &ProblemInstance, p: &[f64], dual: &DualSolution, dirs: &[CVec]) -> Result<Vec<f64>> {
    check_p(inst, p)?;
    Ok(PrimalMap::new(inst, dual, dirs)?.j_of(p))
}

fn check_p(inst: &ProblemInstance, p: &[f64]) -> Result<()> {
    if p.len() != inst.num_users() {
        return Err(Error::Dimension(format!("p has {} entries, expected {}", p.len(), inst.num_users())));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::Domain(format!("power {x} must be nonnegative")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PrimalRun {
    pub status: IterStatus,
    pub p: Vec<f64>,
    pub q: CMat,
    /// `Σ_k p_k + tr Q(p)` per iterate, starting with `p^{(0)}`.
    pub trace: Vec<TraceRow>,
    pub iterates: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl PrimalRun {
    pub fn objectives(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.objective).collect()
    }
}

/// Iterates `p^{(i+1)} = J(p^{(i)})` until the estimated distance to the fixed point,
/// `rel · ρ / (1 − ρ)` with `ρ` the ratio of successive step norms, is at most `cfg.tol`.
pub fn primal_fpi(
    inst: &ProblemInstance,
    dual: &DualSolution,
    dirs: &[CVec],
    cfg: &PrimalIterConfig,
) -> Result<PrimalRun> {
    cfg.validate()?;
    let map = PrimalMap::new(inst, dual, dirs)?;
    let mut p = cfg.p0.clone().unwrap_or_else(|| vec![0.0; inst.num_users()]);
    check_p(inst, &p)?;

    let objective = |p: &[f64], q: &CMat| p.iter().sum::<f64>() + q.trace().re;
    let mut q = map.q_of(&p);
    let mut trace = vec![TraceRow {
        iteration: 0,
        objective: objective(&p, &q),
        step_norm: 0.0,
    }];
    let mut iterates = Vec::new();
    if cfg.record_iterates {
        iterates.push(p.clone());
    }

    let mut prev_step = f64::INFINITY;
    for iter in 1..=cfg.max_iter {
        let next = map.j_with_q(&p, &q);
        let mut step_sq = 0.0;
        let mut rel = 0.0_f64;
        for (a, b) in next.iter().zip(&p) {
            let d = a - b;
            step_sq += d * d;
            rel = rel.max(d.abs() / a);
        }
        p = next;
        q = map.q_of(&p);
        trace.push(TraceRow {
            iteration: iter,
            objective: objective(&p, &q),
            step_norm: step_sq.sqrt(),
        });
        if cfg.record_iterates {
            iterates.push(p.clone());
        }
        let step = step_sq.sqrt();
        let ratio = step / prev_step;
        prev_step = step;
        let remaining = if ratio < 1.0 { rel * ratio / (1.0 - ratio) } else { rel };
        if rel <= cfg.tol && remaining <= cfg.tol {
            return Ok(PrimalRun {
                status: IterStatus::Converged,
                p,
                q,
                trace,
                iterates,
                iterations: iter,
            });
        }
    }
    Ok(PrimalRun {
        status: IterStatus::IterationLimit,
        p,
        q,
        trace,
        iterates,
        iterations: cfg.max_iter,
    })
}

/// Solves `(I − G) p = c` directly, with `G`, `c` probed from `J`.
pub fn solve_direct_linear(
    inst: &ProblemInstance,
    dual: &DualSolution,
    dirs: &[CVec],
) -> Result<(Vec<f64>, CMat)> {
    let map = PrimalMap::new(inst, dual, dirs)?;
    let (g, c) = map.affine_parts();
    let rho = linalg::spectral_radius(&g);
    if !(rho < 1.0) {
        return Err(Error::NotContractive { rho });
    }
    let k_total = inst.num_users();
    let system = DMatrix::<f64>::identity(k_total, k_total) - g;
    let p = system
        .lu()
        .solve(&c)
        .ok_or(Error::NotContractive { rho })?;
    let p: Vec<f64> = p.iter().copied().collect();
    let q = map.q_of(&p);
    Ok((p, q))
}

/// `v_k = √p_k v̂_k`.
pub fn assemble_solution(p: &[f64], q: CMat, dirs: &[CVec]) -> PrimalSolution {
    let beamformers = p
        .iter()
        .zip(dirs)
        .map(|(pk, d)| d.scale(pk.max(0.0).sqrt()))
        .collect();
    PrimalSolution {
        beamformers,
        q,
        powers: p.to_vec(),
        directions: dirs.to_vec(),
    }
}
