//! Domain types shared by every stage of the solver, plus their JSON forms.
//!
//! Conventions:
//! - `channels[k]` is the vector `h_k`; user `k` receives `h_k† x`.
//! - Relay indices are zero-based here; relay `M-1` is compressed first and
//!   relay `0` last.
//! - Complex numbers are serialized as `[re, im]`, matrices row-major.
//! - SINR targets are canonical in dB. The linear values are always derived
//!   from the dB values, so a save/load cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{outer, CMat, CVec};

pub type ComplexPair = [f64; 2];

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Immutable input to the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    channels: Vec<CVec>,
    noise_powers: Vec<f64>,
    sinr_targets_db: Vec<f64>,
    sinr_targets: Vec<f64>,
    fronthaul_caps: Vec<f64>,
}

impl ProblemInstance {
    /// Builds a validated instance with SINR targets given in dB.
    pub fn new(
        channels: Vec<CVec>,
        noise_powers: Vec<f64>,
        sinr_targets_db: Vec<f64>,
        fronthaul_caps: Vec<f64>,
    ) -> Result<Self> {
        let k = channels.len();
        let m = fronthaul_caps.len();
        if k == 0 {
            return Err(Error::InvalidParameter("user count K must be positive".into()));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("relay count M must be positive".into()));
        }
        for (idx, h) in channels.iter().enumerate() {
            if h.len() != m {
                return Err(Error::Dimension(format!(
                    "channel {idx} has length {}, expected M = {m}",
                    h.len()
                )));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("channel {idx} is not finite")));
            }
            if h.iter().all(|z| z.norm_sqr() == 0.0) {
                return Err(Error::InvalidParameter(format!("channel {idx} is the zero vector")));
            }
        }
        check_len("sigma2", noise_powers.len(), k)?;
        check_len("gamma_db", sinr_targets_db.len(), k)?;
        check_positive("sigma2", &noise_powers)?;
        check_positive("cbar", &fronthaul_caps)?;
        if let Some(bad) = sinr_targets_db.iter().find(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma_db value {bad} is not finite")));
        }
        let sinr_targets = sinr_targets_db.iter().map(|&g| db_to_linear(g)).collect();
        Ok(Self {
            channels,
            noise_powers,
            sinr_targets_db,
            sinr_targets,
            fronthaul_caps,
        })
    }

    /// Same as [`ProblemInstance::new`] but with linear SINR targets.
    pub fn from_linear_targets(
        channels: Vec<CVec>,
        noise_powers: Vec<f64>,
        sinr_targets: Vec<f64>,
        fronthaul_caps: Vec<f64>,
    ) -> Result<Self> {
        check_positive("gamma", &sinr_targets)?;
        let db = sinr_targets.iter().map(|&g| linear_to_db(g)).collect();
        Self::new(channels, noise_powers, db, fronthaul_caps)
    }

    /// Single-relay, single-user instance with real channel `h`.
    pub fn scalar(h: f64, sigma2: f64, gamma: f64, cbar: f64) -> Result<Self> {
        Self::from_linear_targets(
            vec![CVec::from_vec(vec![Complex64::new(h, 0.0)])],
            vec![sigma2],
            vec![gamma],
            vec![cbar],
        )
    }

    pub fn num_relays(&self) -> usize {
        self.fronthaul_caps.len()
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[CVec] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> &CVec {
        &self.channels[k]
    }

    pub fn noise_powers(&self) -> &[f64] {
        &self.noise_powers
    }

    /// Linear SINR targets.
    pub fn sinr_targets(&self) -> &[f64] {
        &self.sinr_targets
    }

    pub fn sinr_targets_db(&self) -> &[f64] {
        &self.sinr_targets_db
    }

    pub fn fronthaul_caps(&self) -> &[f64] {
        &self.fronthaul_caps
    }

    /// `2^{C̄_m}` for every relay.
    pub fn compression_factors(&self) -> Vec<f64> {
        self.fronthaul_caps.iter().map(|c| c.exp2()).collect()
    }

    /// Copy with every SINR target set to `gamma_db`.
    pub fn with_uniform_target_db(&self, gamma_db: f64) -> Result<Self> {
        Self::new(
            self.channels.clone(),
            self.noise_powers.clone(),
            vec![gamma_db; self.num_users()],
            self.fronthaul_caps.clone(),
        )
    }

    /// Copy with every fronthaul capacity set to `cbar`.
    pub fn with_uniform_cap(&self, cbar: f64) -> Result<Self> {
        Self::new(
            self.channels.clone(),
            self.noise_powers.clone(),
            self.sinr_targets_db.clone(),
            vec![cbar; self.num_relays()],
        )
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            m: self.num_relays(),
            k: self.num_users(),
            channels: self.channels.iter().map(vec_to_pairs).collect(),
            sigma2: self.noise_powers.clone(),
            gamma_db: self.sinr_targets_db.clone(),
            cbar: self.fronthaul_caps.clone(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        if file.channels.len() != file.k {
            return Err(Error::Dimension(format!(
                "K = {} but {} channel rows given",
                file.k,
                file.channels.len()
            )));
        }
        if file.cbar.len() != file.m {
            return Err(Error::Dimension(format!(
                "M = {} but {} fronthaul capacities given",
                file.m,
                file.cbar.len()
            )));
        }
        let channels = file.channels.iter().map(|row| pairs_to_vec(row)).collect();
        Self::new(channels, file.sigma2, file.gamma_db, file.cbar)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    ProblemInstance::from_json(&text)
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Dimension(format!("{name} has {got} entries, expected {want}")));
    }
    Ok(())
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(bad) => Err(Error::InvalidParameter(format!("{name} value {bad} must be positive"))),
        None => Ok(()),
    }
}

/// On-disk instance schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub channels: Vec<Vec<ComplexPair>>,
    pub sigma2: Vec<f64>,
    pub gamma_db: Vec<f64>,
    pub cbar: Vec<f64>,
}

pub fn vec_to_pairs(v: &CVec) -> Vec<ComplexPair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn pairs_to_vec(p: &[ComplexPair]) -> CVec {
    CVec::from_iterator(p.len(), p.iter().map(|[re, im]| Complex64::new(*re, *im)))
}

pub fn mat_to_pairs(a: &CMat) -> Vec<Vec<ComplexPair>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

pub fn pairs_to_mat(rows: &[Vec<ComplexPair>]) -> Result<CMat> {
    let n = rows.len();
    let mut out = CMat::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension(format!("matrix row {i} has {} entries, expected {n}", row.len())));
        }
        for (j, [re, im]) in row.iter().enumerate() {
            out[(i, j)] = Complex64::new(*re, *im);
        }
    }
    Ok(out)
}

/// Dual certificate: SINR multipliers and rank-one fronthaul multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub beta: Vec<f64>,
    /// `Λ_m = λ_m λ_m†`, zero outside the trailing `(m.., m..)` block.
    pub lambdas: Vec<CMat>,
    /// `λ_m`, zero in entries `0..m`, real positive pivot at entry `m`.
    pub lambda_vectors: Vec<CVec>,
}

impl DualSolution {
    pub fn from_vectors(beta: Vec<f64>, lambda_vectors: Vec<CVec>) -> Self {
        let lambdas = lambda_vectors.iter().map(outer).collect();
        Self {
            beta,
            lambdas,
            lambda_vectors,
        }
    }

    /// `Σ_k β_k σ_k²`.
    pub fn objective(&self, inst: &ProblemInstance) -> f64 {
        self.beta
            .iter()
            .zip(inst.noise_powers())
            .map(|(b, s)| b * s)
            .sum()
    }

    pub fn to_file(&self) -> DualFile {
        DualFile {
            beta: self.beta.clone(),
            lambda_vectors: self.lambda_vectors.iter().map(vec_to_pairs).collect(),
        }
    }

    pub fn from_file(file: &DualFile) -> Self {
        Self::from_vectors(
            file.beta.clone(),
            file.lambda_vectors.iter().map(|v| pairs_to_vec(v)).collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualFile {
    pub beta: Vec<f64>,
    pub lambda_vectors: Vec<Vec<ComplexPair>>,
}

/// Rank-one beamformers plus compression covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub beamformers: Vec<CVec>,
    pub q: CMat,
    pub powers: Vec<f64>,
    pub directions: Vec<CVec>,
}

impl PrimalSolution {
    /// Builds a solution from raw beamformers, splitting each into power and
    /// unit direction. A zero beamformer gets the first unit vector as direction.
    pub fn from_beamformers(beamformers: Vec<CVec>, q: CMat) -> Self {
        let mut powers = Vec::with_capacity(beamformers.len());
        let mut directions = Vec::with_capacity(beamformers.len());
        for v in &beamformers {
            let norm = v.norm();
            powers.push(norm * norm);
            if norm > 0.0 {
                directions.push(v.unscale(norm));
            } else {
                let mut e = CVec::zeros(v.len());
                if !e.is_empty() {
                    e[0] = Complex64::new(1.0, 0.0);
                }
                directions.push(e);
            }
        }
        Self {
            beamformers,
            q,
            powers,
            directions,
        }
    }

    pub fn to_file(&self, dual: Option<&DualSolution>) -> SolutionFile {
        SolutionFile {
            m: self.q.nrows(),
            k: self.beamformers.len(),
            beamformers: self.beamformers.iter().map(vec_to_pairs).collect(),
            q: mat_to_pairs(&self.q),
            powers: Some(self.powers.clone()),
            directions: Some(self.directions.iter().map(vec_to_pairs).collect()),
            dual: dual.map(DualSolution::to_file),
        }
    }
}

/// `Σ_k ‖v_k‖² + tr(Q)`.
pub fn total_power(sol: &PrimalSolution) -> f64 {
    sol.beamformers.iter().map(|v| v.norm_squared()).sum::<f64>() + sol.q.trace().re
}

/// On-disk solution schema. `powers`, `directions` and `dual` are optional
/// so that externally produced beamformers can be certified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub beamformers: Vec<Vec<ComplexPair>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<ComplexPair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Vec<ComplexPair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualFile>,
}

impl SolutionFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(path.as_ref(), text).map_err(|e| Error::io(path, e))
    }

    /// Validates shapes against `inst` and rebuilds the primal (and dual, if present).
    pub fn decode(&self, inst: &ProblemInstance) -> Result<(PrimalSolution, Option<DualSolution>)> {
        let (m, k) = (inst.num_relays(), inst.num_users());
        if self.m != m || self.k != k || self.beamformers.len() != k {
            return Err(Error::Dimension(format!(
                "solution is {}x{} with {} beamformers, instance is M = {m}, K = {k}",
                self.m,
                self.k,
                self.beamformers.len()
            )));
        }
        let beamformers: Vec<CVec> = self.beamformers.iter().map(|v| pairs_to_vec(v)).collect();
        if beamformers.iter().any(|v| v.len() != m) {
            return Err(Error::Dimension("beamformer length differs from M".into()));
        }
        let q = pairs_to_mat(&self.q)?;
        if q.nrows() != m {
            return Err(Error::Dimension(format!("Q is {}x{}, expected {m}x{m}", q.nrows(), q.nrows())));
        }
        let primal = PrimalSolution::from_beamformers(beamformers, q);
        let dual = match &self.dual {
            Some(d) => {
                if d.beta.len() != k || d.lambda_vectors.len() != m {
                    return Err(Error::Dimension("dual block has wrong shape".into()));
                }
                if d.lambda_vectors.iter().any(|l| l.len() != m) {
                    return Err(Error::Dimension("lambda vector length differs from M".into()));
                }
                Some(DualSolution::from_file(d))
            }
            None => None,
        };
        Ok((primal, dual))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    /// Both iterations converged but the certificate check failed.
    Uncertified,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::IterationLimit => "IterationLimit",
            SolveStatus::Uncertified => "Uncertified",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Auditable record of one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub dual_iters: usize,
    pub primal_iters: usize,
    pub dual_objective: f64,
    pub primal_objective: f64,
    pub duality_gap_rel: f64,
    pub kkt_residuals: BTreeMap<String, f64>,
    pub failing_residuals: Vec<String>,
    pub dual_trace: Vec<f64>,
    pub primal_trace: Vec<f64>,
    pub wall_time: f64,
    pub t_dual: f64,
    pub t_primal: f64,
    pub t_certify: f64,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}
