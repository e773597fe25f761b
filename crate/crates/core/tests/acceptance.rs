//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{check_i_suite, check_j_suite, check_lambda_pivots, check_q_map, cn, feasible, layout_instance};
use fronthaul_fpi::diagnostics;
use fronthaul_fpi::dual::DualIterConfig;
use fronthaul_fpi::linalg::{self, CMat};
use fronthaul_fpi::model::{PrimalSolution, ProblemInstance};
use fronthaul_fpi::pipeline::{self, SolveOutcome, SolverConfig};
use fronthaul_fpi::primal;
use fronthaul_fpi::scenario::{generate_instance, Scenario};
use fronthaul_fpi::verify;
use fronthaul_fpi::SolveStatus;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn nonincreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn nondecreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn scalar_oracle() -> Verdict {
    let inst = ProblemInstance::scalar(1.0, 1.0, 1.0, 2.0).unwrap();
    let start = Instant::now();
    let out = pipeline::solve(&inst, &SolverConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let (Some(p), Some(d)) = (&out.primal, &out.dual) else {
        return (false, format!("status {}", out.report.status));
    };
    let errs = [
        ("beta", (d.beta[0] - 2.0).abs()),
        ("p", (p.powers[0] - 1.5).abs()),
        ("Q", (p.q[(0, 0)].re - 0.5).abs()),
        ("primal", (out.report.primal_objective - 2.0).abs()),
        ("dual", (out.report.dual_objective - 2.0).abs()),
        ("sinr", (verify::sinr(&inst, p, 0) - 1.0).abs()),
        ("rate", (verify::fronthaul_rate(&inst, p, 0) - 2.0).abs()),
    ];
    let worst = errs.iter().fold(("", 0.0_f64), |a, e| if e.1 > a.1 { *e } else { a });
    let ok = out.report.status == SolveStatus::Optimal && worst.1 <= 1e-9 && elapsed < Duration::from_millis(10);
    (ok, format!("worst abs error {}={:.1e}, runtime {:.3} ms", worst.0, worst.1, elapsed.as_secs_f64() * 1e3))
}

struct Batch {
    outcomes: Vec<(ProblemInstance, SolveOutcome)>,
    statuses: std::collections::BTreeMap<String, usize>,
    elapsed: Duration,
}

/// 200 draws cycling through M in {2,3,7} and K in {2,4,8}.
fn strong_duality_batch() -> Batch {
    let combos: Vec<(usize, usize)> = [2, 3, 7].iter().flat_map(|&m| [2, 4, 8].map(|k| (m, k))).collect();
    let cfg = SolverConfig::default();
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let mut statuses = std::collections::BTreeMap::new();
    for i in 0..200u64 {
        let (m, k) = combos[i as usize % combos.len()];
        let inst = layout_instance(m, k, i, 4.0, 3.0);
        match pipeline::solve(&inst, &cfg) {
            Ok(out) => {
                *statuses.entry(out.report.status.to_string()).or_insert(0) += 1;
                outcomes.push((inst, out));
            }
            Err(e) => *statuses.entry(format!("Error({e})")).or_insert(0) += 1,
        }
    }
    Batch { outcomes, statuses, elapsed: start.elapsed() }
}

fn strong_duality(batch: &Batch) -> Verdict {
    let mut worst_gap = 0.0_f64;
    let mut worst_res = (String::new(), 0.0_f64);
    let mut optimal = 0;
    for (_, out) in &batch.outcomes {
        if out.report.status != SolveStatus::Optimal {
            continue;
        }
        optimal += 1;
        worst_gap = worst_gap.max(out.report.duality_gap_rel);
        for (name, v) in &out.report.kkt_residuals {
            if name != "duality_gap" && *v > worst_res.1 {
                worst_res = (name.clone(), *v);
            }
        }
    }
    let clean = batch.statuses.keys().all(|s| s == "Optimal" || s == "Infeasible");
    let ok = optimal > 0 && worst_gap <= 1e-6 && worst_res.1 <= 1e-7 && clean && batch.elapsed < Duration::from_secs(300);
    (
        ok,
        format!(
            "statuses {:?}; max gap {:.1e}; max residual {}={:.1e}; {:.1} s",
            batch.statuses,
            worst_gap,
            worst_res.0,
            worst_res.1,
            batch.elapsed.as_secs_f64()
        ),
    )
}

fn si_suites() -> Verdict {
    let draws = 200u64;
    let suites: [(&str, fn(u64) -> common::Check); 4] = [
        ("I", check_i_suite),
        ("J", check_j_suite),
        ("Lambda pivots", check_lambda_pivots),
        ("Q", check_q_map),
    ];
    for (name, suite) in suites {
        for seed in 0..draws {
            if let Err(e) = suite(seed) {
                return (false, format!("{name} suite, draw {seed}: {e}"));
            }
        }
    }
    (true, format!("{draws} draws each for I, J, Lambda pivots, Q; alphas 1.1, 2, 10"))
}

fn rate_bound() -> Verdict {
    let gammas = [3.6, 3.7, 3.8, 3.9, 4.0];
    let seeds: Vec<u64> = feasible(7, 8, 4.0, 3.0, 0, 20).into_iter().map(|f| f.0).collect();
    let cfg = DualIterConfig::default();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let (mut lo_t, mut hi_t, mut lo_p, mut hi_p) = (1.0_f64, 0.0_f64, 1.0_f64, 0.0_f64);
    for seed in &seeds {
        let sc = Scenario { seed: *seed, ..Scenario::default() };
        let rows = match diagnostics::rate_table(&sc, &gammas, &cfg) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let th: Vec<f64> = rows.iter().map(|r| r.theoretical_rate).collect();
        let pr: Vec<f64> = rows.iter().map(|r| r.practical_rate).collect();
        for (t, p) in th.iter().zip(&pr) {
            worst_excess = worst_excess.max(p - t);
            lo_t = lo_t.min(*t);
            hi_t = hi_t.max(*t);
            lo_p = lo_p.min(*p);
            hi_p = hi_p.max(*p);
        }
        if !pr.iter().all(|p| p.is_finite()) || pr.iter().zip(&th).any(|(p, t)| *p > t + 0.01) {
            failures.push(format!("seed {seed}: practical above bound"));
        }
        if !nondecreasing(&th) || !nondecreasing(&pr) {
            failures.push(format!("seed {seed}: not nondecreasing in gamma"));
        }
    }
    (
        failures.is_empty(),
        format!(
            "{} seeds x {} targets; theoretical {:.4}..{:.4}, practical {:.4}..{:.4}, max(practical - bound) {:.4}{}",
            seeds.len(),
            gammas.len(),
            lo_t,
            hi_t,
            lo_p,
            hi_p,
            worst_excess,
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn infeasibility_detection() -> Verdict {
    let mut failures = Vec::new();
    let scalar = ProblemInstance::scalar(1.0, 1.0, 3.0, 2.0).unwrap();
    let mut cfg = SolverConfig::default();
    cfg.dual.power_cap = 1e4;
    let out = pipeline::solve(&scalar, &cfg).unwrap();
    let trace = &out.report.dual_trace;
    if out.report.status != SolveStatus::Infeasible || !strictly_increasing(trace) || !(*trace.last().unwrap() > 1e4) {
        failures.push(format!("scalar: {}", out.report.status));
    }
    let scalar_iters = out.report.dual_iters;
    let cfg = SolverConfig::default();
    for seed in 0..10 {
        let sc = Scenario { seed, gamma_db: 10.0, cbar: 1.0, ..Scenario::default() };
        let out = pipeline::solve(&generate_instance(&sc).unwrap(), &cfg).unwrap();
        let trace = &out.report.dual_trace;
        if out.report.status != SolveStatus::Infeasible
            || !strictly_increasing(trace)
            || !(*trace.last().unwrap() > cfg.dual.power_cap)
        {
            failures.push(format!("seed {seed}: {}", out.report.status));
        }
    }
    (
        failures.is_empty(),
        format!(
            "scalar (gamma 3, cbar 2, cap 1e4) stopped after {scalar_iters} iterations; 10 draws at 10 dB, cbar 1{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

fn monotone_traces(sets: &[&[(ProblemInstance, SolveOutcome)]]) -> Verdict {
    let mut checked = 0;
    for set in sets {
        for (_, out) in set.iter() {
            if out.report.status != SolveStatus::Optimal {
                continue;
            }
            checked += 1;
            if !strictly_increasing(&out.report.dual_trace) {
                return (false, "dual trace not strictly increasing".into());
            }
            if !strictly_increasing(&out.report.primal_trace) {
                return (false, "primal trace not strictly increasing".into());
            }
        }
    }
    (checked > 0, format!("{checked} feasible instances, dual and primal traces from zero"))
}

fn feasible_mix(count: usize) -> Vec<(ProblemInstance, SolveOutcome)> {
    let combos = [(7, 8), (7, 4), (7, 2), (3, 2), (2, 2)];
    let per = count / combos.len();
    combos
        .iter()
        .enumerate()
        .flat_map(|(i, &(m, k))| feasible(m, k, 4.0, 3.0, 10_000 * (i as u64 + 1), per))
        .map(|(_, inst, out)| (inst, out))
        .collect()
}

/// Random candidate around an optimal point: beams and `Q` perturbed independently.
fn perturbed(sol: &PrimalSolution, rng: &mut ChaCha8Rng) -> PrimalSolution {
    let m = sol.q.nrows();
    let vs = sol
        .beamformers
        .iter()
        .map(|v| v.map(|z| z * (1.0 + 0.3 * rng.random_range(-1.0..1.0)) + cn(rng) * 0.05 * v.norm() / (m as f64).sqrt()))
        .collect();
    let a = CMat::from_fn(m, m, |_, _| cn(rng));
    let q = sol.q.scale(rng.random_range(0.5..1.5)) + (&a * a.adjoint()).scale(0.05 * sol.q.trace().re / m as f64);
    PrimalSolution::from_beamformers(vs, q)
}

fn cross_oracles(mix: &[(ProblemInstance, SolveOutcome)]) -> Verdict {
    let mut worst = 0.0_f64;
    for (inst, out) in mix {
        let dual = out.dual.as_ref().unwrap();
        let dirs = primal::beam_directions(inst, dual).unwrap();
        let (p_direct, _) = match primal::solve_direct_linear(inst, dual, &dirs) {
            Ok(x) => x,
            Err(e) => return (false, format!("direct solve failed: {e}")),
        };
        let p_fpi = &out.primal.as_ref().unwrap().powers;
        for (a, b) in p_fpi.iter().zip(&p_direct) {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut agree, mut total, mut feasible_verdicts, mut skipped) = (0, 0, 0, 0);
    for i in 0..100 {
        let (inst, out) = &mix[i % mix.len()];
        let cand = perturbed(out.primal.as_ref().unwrap(), &mut rng);
        let mut all_agree = true;
        for m in 0..inst.num_relays() {
            let rate = verify::fronthaul_rate(inst, &cand, m);
            let cap = inst.fronthaul_caps()[m];
            if rate.is_finite() && (rate - cap).abs() < 1e-9 {
                skipped += 1;
                continue;
            }
            let by_rate = rate <= cap;
            let by_psd = verify::fronthaul_psd_constraint(inst, &cand, m) >= 0.0;
            feasible_verdicts += by_rate as usize;
            total += 1;
            all_agree &= by_rate == by_psd;
        }
        agree += all_agree as usize;
    }
    let ok = worst <= 1e-8 && agree == 100 && mix.len() >= 100;
    (
        ok,
        format!(
            "{} instances, max rel power diff {:.1e}; {agree}/100 candidates agree ({total} relay verdicts, {feasible_verdicts} feasible, {skipped} on the boundary skipped)",
            mix.len(),
            worst
        ),
    )
}

fn sweep_means(seeds: &[u64], points: &[(f64, f64)], cfg: &SolverConfig) -> (Vec<f64>, Vec<f64>, usize) {
    // power[p][s], None when not certified
    let table: Vec<Vec<Option<f64>>> = points
        .iter()
        .map(|&(g, c)| {
            seeds
                .iter()
                .map(|&seed| {
                    let sc = Scenario { seed, gamma_db: g, cbar: c, ..Scenario::default() };
                    let out = pipeline::solve(&generate_instance(&sc).unwrap(), cfg).unwrap();
                    (out.report.status == SolveStatus::Optimal).then_some(out.report.primal_objective)
                })
                .collect()
        })
        .collect();
    let common: Vec<usize> = (0..seeds.len()).filter(|&s| table.iter().all(|row| row[s].is_some())).collect();
    let means = table
        .iter()
        .map(|row| common.iter().map(|&s| row[s].unwrap()).sum::<f64>() / common.len() as f64)
        .collect();
    let fractions = table
        .iter()
        .map(|row| row.iter().filter(|x| x.is_some()).count() as f64 / seeds.len() as f64)
        .collect();
    (means, fractions, common.len())
}

fn trend_reproduction() -> Verdict {
    let start = Instant::now();
    let seeds: Vec<u64> = (0..50).collect();
    let cfg = SolverConfig::default();
    let cbars: Vec<(f64, f64)> = (1..=6).map(|c| (-3.0, c as f64)).collect();
    let gammas: Vec<(f64, f64)> = (0..=6).map(|g| (g as f64, 6.0)).collect();
    let gammas_default: Vec<(f64, f64)> = (0..=6).map(|g| (g as f64, 3.0)).collect();
    let (pc, _, nc) = sweep_means(&seeds, &cbars, &cfg);
    let (pg, fg, ng) = sweep_means(&seeds, &gammas, &cfg);
    let (_, fd, _) = sweep_means(&seeds, &gammas_default, &cfg);
    let elapsed = start.elapsed();
    let ok = nc > 0
        && ng > 0
        && nonincreasing(&pc)
        && nondecreasing(&pg)
        && nonincreasing(&fg)
        && nonincreasing(&fd)
        && elapsed < Duration::from_secs(600);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    (
        ok,
        format!(
            "cbar 1..6 @ -3 dB ({nc} seeds): {}; gamma 0..6 dB @ cbar 6 ({ng} seeds): {}; feasible fraction @ cbar 6: {}; @ cbar 3: {}; {:.1} s",
            fmt(&pc),
            fmt(&pg),
            fmt(&fg),
            fmt(&fd),
            elapsed.as_secs_f64()
        ),
    )
}

fn positive_definite_q(batch: &Batch) -> Verdict {
    let mut worst = f64::INFINITY;
    let mut count = 0;
    for (inst, out) in &batch.outcomes {
        if out.report.status != SolveStatus::Optimal {
            continue;
        }
        let q = &out.primal.as_ref().unwrap().q;
        let m = inst.num_relays() as f64;
        let ratio = linalg::min_eigenvalue(q) / (q.trace().re / m);
        worst = worst.min(ratio);
        count += 1;
    }
    (count > 0 && worst > 1e-10, format!("{count} solutions; min over instances of min-eig / (tr Q / M) = {worst:.3e}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |name: &'static str, v: Verdict| {
        println!("{} [{}] {}", if v.0 { "PASS" } else { "FAIL" }, name, v.1);
        results.push((name, v));
    };

    report("1 scalar oracle", scalar_oracle());
    let batch = strong_duality_batch();
    report("2 strong duality", strong_duality(&batch));
    report("3 SI-mapping suites", si_suites());
    report("4 rate bound", rate_bound());
    report("5 infeasibility detection", infeasibility_detection());
    let mix = feasible_mix(100);
    report("6 monotone traces", monotone_traces(&[&batch.outcomes, &mix]));
    report("7 cross-oracle agreement", cross_oracles(&mix));
    report("8 trend reproduction", trend_reproduction());
    report("9 positive definite Q", positive_definite_q(&batch));

    let failed = results.iter().filter(|r| !r.1 .0).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
