//! The full solve: dual iteration, beam directions, primal iteration,
//! assembly and certification.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dual::{self, DualIterConfig, IterStatus};
use crate::error::Result;
use crate::model::{DualSolution, PrimalSolution, ProblemInstance, SolveReport, SolveStatus};
use crate::primal::{self, PrimalIterConfig};
use crate::verify::{self, Certificate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimalMethod {
    #[default]
    Fpi,
    Direct,
}

impl std::str::FromStr for PrimalMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fpi" => Ok(PrimalMethod::Fpi),
            "direct" => Ok(PrimalMethod::Direct),
            other => Err(format!("unknown primal method '{other}' (expected fpi or direct)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dual: DualIterConfig,
    pub primal: PrimalIterConfig,
    /// Tolerance of every certificate residual, duality gap included.
    pub cert_tol: f64,
    pub primal_method: PrimalMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dual: DualIterConfig::default(),
            primal: PrimalIterConfig::default(),
            cert_tol: 1e-7,
            primal_method: PrimalMethod::Fpi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    pub primal: Option<PrimalSolution>,
    pub dual: Option<DualSolution>,
    pub certificate: Option<Certificate>,
    pub dual_run: dual::DualRun,
    pub primal_trace: Vec<dual::TraceRow>,
}

fn empty_report(status: SolveStatus, run: &dual::DualRun) -> SolveReport {
    SolveReport {
        status,
        dual_iters: run.iterations,
        primal_iters: 0,
        dual_objective: run.trace.last().map_or(f64::NAN, |r| r.objective),
        primal_objective: f64::NAN,
        duality_gap_rel: f64::NAN,
        kkt_residuals: Default::default(),
        failing_residuals: Vec::new(),
        dual_trace: run.objectives(),
        primal_trace: Vec::new(),
        wall_time: 0.0,
        t_dual: 0.0,
        t_primal: 0.0,
        t_certify: 0.0,
    }
}

pub fn solve(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveOutcome> {
    let start = Instant::now();
    let run = dual::dual_fpi(inst, &cfg.dual)?;
    let t_dual = start.elapsed().as_secs_f64();

    let dual_sol = match (run.status, &run.solution) {
        (IterStatus::Converged, Some(sol)) => sol.clone(),
        (status, _) => {
            let status = if status == IterStatus::Infeasible {
                SolveStatus::Infeasible
            } else {
                SolveStatus::IterationLimit
            };
            let mut report = empty_report(status, &run);
            report.t_dual = t_dual;
            report.wall_time = start.elapsed().as_secs_f64();
            return Ok(SolveOutcome {
                report,
                primal: None,
                dual: None,
                certificate: None,
                dual_run: run,
                primal_trace: Vec::new(),
            });
        }
    };

    let t1 = Instant::now();
    let dirs = primal::beam_directions(inst, &dual_sol)?;
    let (p, q, primal_trace, primal_iters, converged) = match cfg.primal_method {
        PrimalMethod::Fpi => {
            let prun = primal::primal_fpi(inst, &dual_sol, &dirs, &cfg.primal)?;
            let ok = prun.status == IterStatus::Converged;
            (prun.p, prun.q, prun.trace, prun.iterations, ok)
        }
        PrimalMethod::Direct => {
            let (p, q) = primal::solve_direct_linear(inst, &dual_sol, &dirs)?;
            (p, q, Vec::new(), 0, true)
        }
    };
    let solution = primal::assemble_solution(&p, q, &dirs);
    let t_primal = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let cert = verify::certify(inst, &solution, &dual_sol, cfg.cert_tol);
    let t_certify = t2.elapsed().as_secs_f64();

    let status = if !converged {
        SolveStatus::IterationLimit
    } else if cert.passed {
        SolveStatus::Optimal
    } else {
        SolveStatus::Uncertified
    };
    let report = SolveReport {
        status,
        dual_iters: run.iterations,
        primal_iters,
        dual_objective: cert.dual_objective,
        primal_objective: cert.primal_objective,
        duality_gap_rel: cert.duality_gap_rel,
        kkt_residuals: cert.residuals.clone(),
        failing_residuals: cert.failing.clone(),
        dual_trace: run.objectives(),
        primal_trace: primal_trace.iter().map(|r| r.objective).collect(),
        wall_time: start.elapsed().as_secs_f64(),
        t_dual,
        t_primal,
        t_certify,
    };
    Ok(SolveOutcome {
        report,
        primal: Some(solution),
        dual: Some(dual_sol),
        certificate: Some(cert),
        dual_run: run,
        primal_trace,
    })
}
