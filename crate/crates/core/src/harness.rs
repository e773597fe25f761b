//! Experiment sweeps, benchmarks and their CSV artifacts.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::dual::{DualIterConfig, TraceRow};
use crate::error::{Error, Result};
use crate::model::SolveStatus;
use crate::pipeline::{self, PrimalMethod, SolverConfig};
use crate::primal::PrimalIterConfig;
use crate::scenario::{self, Scenario};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub gamma_db_sweep: Vec<f64>,
    pub cbar_sweep: Vec<f64>,
    /// Realization `r` uses seed `scenario.seed + r`.
    pub num_realizations: usize,
    pub dual: DualIterConfig,
    pub primal: PrimalIterConfig,
    pub cert_tol: f64,
    pub primal_method: PrimalMethod,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    /// When false, timing columns are written as 0 so reruns are bit-identical.
    pub record_timings: bool,
    /// Measure the practical dual rate (one extra tight solve per run).
    pub compute_rates: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            gamma_db_sweep: vec![4.0],
            cbar_sweep: vec![3.0],
            num_realizations: 200,
            dual: DualIterConfig::default(),
            primal: PrimalIterConfig::default(),
            cert_tol: 1e-7,
            primal_method: PrimalMethod::Fpi,
            output_dir: PathBuf::from("out"),
            parallelism: 0,
            record_timings: true,
            compute_rates: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_realizations < 1 {
            return Err(Error::InvalidParameter("num_realizations must be at least 1".into()));
        }
        if self.gamma_db_sweep.is_empty() || self.cbar_sweep.is_empty() {
            return Err(Error::InvalidParameter("sweeps must be non-empty".into()));
        }
        if !(self.cert_tol > 0.0) {
            return Err(Error::InvalidParameter("cert_tol must be positive".into()));
        }
        self.scenario.validate()?;
        self.dual.validate()?;
        self.primal.validate()
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dual: self.dual.clone(),
            primal: self.primal.clone(),
            cert_tol: self.cert_tol,
            primal_method: self.primal_method,
        }
    }

    /// `(seed, gamma_db, cbar)` for every run, grid-major.
    pub fn jobs(&self) -> Vec<(u64, f64, f64)> {
        let mut out = Vec::new();
        for &g in &self.gamma_db_sweep {
            for &c in &self.cbar_sweep {
                for r in 0..self.num_realizations {
                    out.push((self.scenario.seed + r as u64, g, c));
                }
            }
        }
        out
    }
}

/// One line of the per-run CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub gamma_db: f64,
    pub cbar: f64,
    pub status: String,
    pub total_power: f64,
    pub dual_obj: f64,
    pub gap_rel: f64,
    pub dual_iters: usize,
    pub primal_iters: usize,
    pub rate_bound: f64,
    pub rate_practical: f64,
    pub t_dual_s: f64,
    pub t_primal_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub gamma_db: f64,
    pub cbar: f64,
    pub runs: usize,
    pub optimal: usize,
    pub infeasible: usize,
    pub feasible_fraction: f64,
    pub mean_power: f64,
    pub std_power: f64,
    pub mean_dual_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub gamma_db: f64,
    pub cbar: f64,
    pub status: String,
    pub dual_iters: usize,
    pub primal_iters: usize,
    pub t_dual_s: f64,
    pub t_primal_s: f64,
    pub t_certify_s: f64,
    pub t_total_s: f64,
}

/// Status label of a run that errored before producing a report.
pub const ERROR_STATUS: &str = "Error";

fn run_one(cfg: &ExperimentConfig, solver: &SolverConfig, seed: u64, g: f64, c: f64) -> RunRow {
    let mut row = RunRow {
        seed,
        gamma_db: g,
        cbar: c,
        status: ERROR_STATUS.to_string(),
        total_power: f64::NAN,
        dual_obj: f64::NAN,
        gap_rel: f64::NAN,
        dual_iters: 0,
        primal_iters: 0,
        rate_bound: f64::NAN,
        rate_practical: f64::NAN,
        t_dual_s: 0.0,
        t_primal_s: 0.0,
    };
    let sc = Scenario { seed, gamma_db: g, cbar: c, ..cfg.scenario.clone() };
    let inst = match scenario::generate_instance(&sc) {
        Ok(inst) => inst,
        Err(_) => return row,
    };
    let out = match pipeline::solve(&inst, solver) {
        Ok(out) => out,
        Err(_) => return row,
    };
    let rep = &out.report;
    row.status = rep.status.to_string();
    row.dual_iters = rep.dual_iters;
    row.primal_iters = rep.primal_iters;
    if cfg.record_timings {
        row.t_dual_s = rep.t_dual;
        row.t_primal_s = rep.t_primal;
    }
    // only certified numbers leave the harness
    if rep.status == SolveStatus::Optimal {
        row.total_power = rep.primal_objective;
        row.dual_obj = rep.dual_objective;
        row.gap_rel = rep.duality_gap_rel;
        if let Some(d) = &out.dual {
            row.rate_bound = diagnostics::dual_rate_bound(&inst, &d.beta).unwrap_or(f64::NAN);
        }
        if cfg.compute_rates {
            if let Ok((_, practical, _)) = diagnostics::measure_rates(&inst, &solver.dual) {
                row.rate_practical = practical;
            }
        }
    }
    row
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Solves every grid point and realization; results keep job order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRow>> {
    cfg.validate()?;
    let solver = cfg.solver();
    let jobs = cfg.jobs();
    Ok(pool(cfg.parallelism)?.install(|| {
        jobs.par_iter()
            .map(|&(seed, g, c)| run_one(cfg, &solver, seed, g, c))
            .collect()
    }))
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Groups rows by `(gamma_db, cbar)` in order of first appearance.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.gamma_db && k.1 == r.cbar) {
            keys.push((r.gamma_db, r.cbar));
        }
    }
    keys.into_iter()
        .map(|(g, c)| {
            let group: Vec<&RunRow> = rows.iter().filter(|r| r.gamma_db == g && r.cbar == c).collect();
            let opt: Vec<&RunRow> = group.iter().copied().filter(|r| r.status == "Optimal").collect();
            let powers: Vec<f64> = opt.iter().map(|r| r.total_power).collect();
            let iters: Vec<f64> = opt.iter().map(|r| r.dual_iters as f64).collect();
            let (mean_power, std_power) = mean_std(&powers);
            AggregateRow {
                gamma_db: g,
                cbar: c,
                runs: group.len(),
                optimal: opt.len(),
                infeasible: group.iter().filter(|r| r.status == "Infeasible").count(),
                feasible_fraction: opt.len() as f64 / group.len() as f64,
                mean_power,
                std_power,
                mean_dual_iters: mean_std(&iters).0,
            }
        })
        .collect()
}

/// Sequential timed solves over the grid, one phase breakdown per run.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let solver = cfg.solver();
    let mut rows = Vec::new();
    for (seed, g, c) in cfg.jobs() {
        let sc = Scenario { seed, gamma_db: g, cbar: c, ..cfg.scenario.clone() };
        let inst = scenario::generate_instance(&sc)?;
        let row = match pipeline::solve(&inst, &solver) {
            Ok(out) => {
                let r = out.report;
                BenchRow {
                    seed,
                    gamma_db: g,
                    cbar: c,
                    status: r.status.to_string(),
                    dual_iters: r.dual_iters,
                    primal_iters: r.primal_iters,
                    t_dual_s: r.t_dual,
                    t_primal_s: r.t_primal,
                    t_certify_s: r.t_certify,
                    t_total_s: r.wall_time,
                }
            }
            Err(_) => BenchRow {
                seed,
                gamma_db: g,
                cbar: c,
                status: ERROR_STATUS.to_string(),
                dual_iters: 0,
                primal_iters: 0,
                t_dual_s: 0.0,
                t_primal_s: 0.0,
                t_certify_s: 0.0,
                t_total_s: 0.0,
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(trace, path)
}

pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
