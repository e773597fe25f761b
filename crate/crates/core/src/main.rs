use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fronthaul_fpi::diagnostics;
use fronthaul_fpi::dual::{self, DualIterConfig, IterStatus};
use fronthaul_fpi::harness::{self, ExperimentConfig};
use fronthaul_fpi::model::{load_instance, SolutionFile};
use fronthaul_fpi::pipeline::{self, PrimalMethod};
use fronthaul_fpi::scenario;
use fronthaul_fpi::verify;
use fronthaul_fpi::{Error, Result, SolveStatus};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_ITERATION_LIMIT: u8 = 3;
const EXIT_UNCERTIFIED: u8 = 4;

#[derive(Parser)]
#[command(name = "fronthaul-fpi", version, about = "Joint beamforming and fronthaul compression solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance file and certify the result.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the (gamma, cbar) sweep of an experiment config.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Certify an externally supplied solution.
    Verify {
        instance: PathBuf,
        solution: PathBuf,
        /// Tolerance applied to every residual.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Write the certificate JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the dual, primal and certify phases over the config grid.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Emit instances drawn from the configured scenario.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        num_relays: Option<usize>,
        #[arg(long)]
        num_users: Option<usize>,
        #[arg(long)]
        gamma_db: Option<f64>,
        #[arg(long)]
        cbar: Option<f64>,
        /// Number of consecutive seeds; with more than one, --out is a directory.
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Theoretical vs measured dual convergence rate on one channel draw.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Comma-separated SINR targets in dB.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment config JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_dual: Option<f64>,
    #[arg(long)]
    tol_primal: Option<f64>,
    /// Iteration cap of both fixed point iterations.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Dual objective above which the instance is declared infeasible.
    #[arg(long)]
    power_cap: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// fpi or direct.
    #[arg(long)]
    primal_method: Option<PrimalMethod>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.scenario.seed = s;
        }
        if let Some(t) = self.tol_dual {
            cfg.dual.tol = t;
        }
        if let Some(t) = self.tol_primal {
            cfg.primal.tol = t;
        }
        if let Some(n) = self.max_iter {
            cfg.dual.max_iter = n;
            cfg.primal.max_iter = n;
        }
        if let Some(c) = self.power_cap {
            cfg.dual.power_cap = c;
        }
        if let Some(w) = self.workers {
            cfg.parallelism = w;
        }
        if let Some(m) = self.primal_method {
            cfg.primal_method = m;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn cmd_solve(instance: &Path, common: &Common) -> Result<u8> {
    let inst = load_instance(instance)?;
    let cfg = common.config()?;
    let out_dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    create_dir(&out_dir)?;

    let outcome = pipeline::solve(&inst, &cfg.solver())?;
    let report = &outcome.report;
    write_text(&out_dir.join("report.json"), &report.to_json())?;
    harness::write_trace_csv(&outcome.dual_run.trace, out_dir.join("dual_trace.csv"))?;
    harness::write_trace_csv(&outcome.primal_trace, out_dir.join("primal_trace.csv"))?;
    if let Some(sol) = &outcome.primal {
        sol.to_file(outcome.dual.as_ref()).save(out_dir.join("solution.json"))?;
    }
    println!(
        "status={} total_power={:.12e} dual_objective={:.12e} gap_rel={:.3e} dual_iters={} primal_iters={}",
        report.status,
        report.primal_objective,
        report.dual_objective,
        report.duality_gap_rel,
        report.dual_iters,
        report.primal_iters
    );
    if !report.failing_residuals.is_empty() {
        eprintln!("failing residuals: {}", report.failing_residuals.join(", "));
    }
    Ok(match report.status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::IterationLimit => EXIT_ITERATION_LIMIT,
        SolveStatus::Uncertified => EXIT_UNCERTIFIED,
    })
}

fn cmd_verify(instance: &Path, solution: &Path, tol: f64, out: Option<&Path>) -> Result<u8> {
    let inst = load_instance(instance)?;
    let (primal, dual) = SolutionFile::load(solution)?.decode(&inst)?;
    let dual = match dual {
        Some(d) => d,
        None => {
            let run = dual::dual_fpi(&inst, &DualIterConfig::default())?;
            match (run.status, run.solution) {
                (IterStatus::Converged, Some(d)) => d,
                _ => return Err(Error::Domain("no dual certificate: the dual iteration did not converge".into())),
            }
        }
    };
    let cert = verify::certify(&inst, &primal, &dual, tol);
    match out {
        Some(path) => write_text(path, &cert.to_json())?,
        None => println!("{}", cert.to_json()),
    }
    if cert.passed {
        Ok(0)
    } else {
        eprintln!("certification failed: {}", cert.failing.join(", "));
        Ok(EXIT_UNCERTIFIED)
    }
}

fn cmd_sweep(common: &Common) -> Result<u8> {
    let cfg = common.config()?;
    create_dir(&cfg.output_dir)?;
    let rows = harness::run_sweep(&cfg)?;
    harness::write_csv(&rows, cfg.output_dir.join("runs.csv"))?;
    let agg = harness::aggregate(&rows);
    harness::write_csv(&agg, cfg.output_dir.join("aggregate.csv"))?;
    for a in &agg {
        println!(
            "gamma_db={} cbar={} optimal={}/{} mean_power={:.6e}",
            a.gamma_db, a.cbar, a.optimal, a.runs, a.mean_power
        );
    }
    Ok(0)
}

fn cmd_bench(common: &Common) -> Result<u8> {
    let cfg = common.config()?;
    create_dir(&cfg.output_dir)?;
    let rows = harness::run_bench(&cfg)?;
    harness::write_csv(&rows, cfg.output_dir.join("bench.csv"))?;
    let total: f64 = rows.iter().map(|r| r.t_total_s).sum();
    println!("runs={} mean_time_s={:.6}", rows.len(), total / rows.len().max(1) as f64);
    Ok(0)
}

struct GenOverrides {
    num_relays: Option<usize>,
    num_users: Option<usize>,
    gamma_db: Option<f64>,
    cbar: Option<f64>,
    count: u64,
}

fn cmd_gen(common: &Common, ov: GenOverrides) -> Result<u8> {
    let cfg = common.config()?;
    let mut sc = cfg.scenario.clone();
    if let Some(m) = ov.num_relays {
        sc.num_relays = m;
    }
    if let Some(k) = ov.num_users {
        sc.num_users = k;
    }
    if let Some(g) = ov.gamma_db {
        sc.gamma_db = g;
    }
    if let Some(c) = ov.cbar {
        sc.cbar = c;
    }
    let out = common
        .out
        .clone()
        .ok_or_else(|| Error::InvalidParameter("gen needs --out".into()))?;
    if ov.count <= 1 {
        scenario::generate_instance(&sc)?.save(&out)?;
        return Ok(0);
    }
    create_dir(&out)?;
    for i in 0..ov.count {
        let s = sc.with_seed(sc.seed + i);
        scenario::generate_instance(&s)?.save(out.join(format!("instance_{}.json", s.seed)))?;
    }
    Ok(0)
}

fn cmd_rates(common: &Common, gammas: &[f64]) -> Result<u8> {
    let cfg = common.config()?;
    let rows = diagnostics::rate_table(&cfg.scenario, gammas, &cfg.dual)?;
    match &common.out {
        Some(path) => diagnostics::write_rate_csv(&rows, path)?,
        None => {
            println!("gamma_db,theoretical_rate,practical_rate,iters");
            for r in &rows {
                println!("{},{},{},{}", r.gamma_db, r.theoretical_rate, r.practical_rate, r.iters);
            }
        }
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { instance, common } => cmd_solve(&instance, &common),
        Command::Sweep { common } => cmd_sweep(&common),
        Command::Verify { instance, solution, tol, out } => cmd_verify(&instance, &solution, tol, out.as_deref()),
        Command::Bench { common } => cmd_bench(&common),
        Command::Gen {
            common,
            num_relays,
            num_users,
            gamma_db,
            cbar,
            count,
        } => cmd_gen(
            &common,
            GenOverrides {
                num_relays,
                num_users,
                gamma_db,
                cbar,
                count,
            },
        ),
        Command::Rates { common, gammas } => cmd_rates(&common, &gammas),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
