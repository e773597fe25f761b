#![allow(dead_code)]

use fronthaul_fpi::linalg::CVec;
use fronthaul_fpi::pipeline::{self, SolveOutcome, SolverConfig};
use fronthaul_fpi::scenario::{generate_instance, Scenario};
use fronthaul_fpi::{ProblemInstance, SolveStatus};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Layout instance on the 7-site grid, keeping the first `m` relays when `m < 7`.
pub fn layout_instance(m: usize, k: usize, seed: u64, gamma_db: f64, cbar: f64) -> ProblemInstance {
    let sites = if m <= 7 { 7 } else { 19 };
    let sc = Scenario {
        num_relays: sites,
        num_users: k,
        seed,
        gamma_db,
        cbar,
        ..Scenario::default()
    };
    let full = generate_instance(&sc).unwrap();
    if m == sites {
        return full;
    }
    let channels: Vec<CVec> = full.channels().iter().map(|h| h.rows(0, m).clone_owned()).collect();
    ProblemInstance::new(channels, vec![1.0; k], vec![gamma_db; k], vec![cbar; m]).unwrap()
}

/// First `count` seeds (from `start`) whose default solve is certified optimal.
pub fn feasible(
    m: usize,
    k: usize,
    gamma_db: f64,
    cbar: f64,
    start: u64,
    count: usize,
) -> Vec<(u64, ProblemInstance, SolveOutcome)> {
    let cfg = SolverConfig::default();
    let mut out = Vec::new();
    let mut seed = start;
    while out.len() < count {
        let inst = layout_instance(m, k, seed, gamma_db, cbar);
        if let Ok(o) = pipeline::solve(&inst, &cfg) {
            if o.report.status == SolveStatus::Optimal {
                out.push((seed, inst, o));
            }
        }
        seed += 1;
        assert!(seed < start + 100_000, "not enough feasible seeds");
    }
    out
}

pub fn cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * 0.5f64.sqrt()
}

/// Random nonnegative multipliers scaled to each user's channel energy.
pub fn random_beta(inst: &ProblemInstance, rng: &mut ChaCha8Rng) -> Vec<f64> {
    inst.channels()
        .iter()
        .map(|h| (rng.random_range(-3.0..3.0f64)).exp() / h.norm_squared())
        .collect()
}

pub fn random_powers(inst: &ProblemInstance, rng: &mut ChaCha8Rng) -> Vec<f64> {
    inst.channels()
        .iter()
        .map(|h| (rng.random_range(-3.0..3.0f64)).exp() * 100.0 / h.norm_squared().sqrt())
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

use fronthaul_fpi::dual;
use fronthaul_fpi::linalg::{self, CMat};
use fronthaul_fpi::model::DualSolution;
use fronthaul_fpi::primal::{self, PrimalMap};
use rand::SeedableRng;

pub const ALPHAS: [f64; 3] = [1.1, 2.0, 10.0];
pub const REL_TOL: f64 = 1e-10;
pub const STRICT_MARGIN: f64 = 1e-12;

/// Either a layout instance or one with i.i.d. channels and random targets.
pub fn draw_instance(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let m = [1, 2, 3, 7][rng.random_range(0..4)];
    let k = rng.random_range(1..=8);
    if rng.random_bool(0.5) && m > 1 {
        return layout_instance(m, k, seed, rng.random_range(0.0..6.0), rng.random_range(1.0..6.0));
    }
    let channels = (0..k)
        .map(|_| {
            let scale = rng.random_range(-1.0..3.0f64).exp();
            CVec::from_iterator(m, (0..m).map(|_| cn(&mut rng) * scale))
        })
        .collect();
    let sigma2 = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    let gamma_db = (0..k).map(|_| rng.random_range(-3.0..6.0)).collect();
    let cbar = (0..m).map(|_| rng.random_range(0.5..6.0)).collect();
    ProblemInstance::new(channels, sigma2, gamma_db, cbar).unwrap()
}

pub fn dual_at(inst: &ProblemInstance, beta: &[f64]) -> DualSolution {
    let l = dual::lambda_recursion(inst, beta).unwrap();
    DualSolution::from_vectors(beta.to_vec(), l.vectors)
}

pub fn pivots(inst: &ProblemInstance, beta: &[f64]) -> Vec<f64> {
    dual::lambda_recursion(inst, beta).unwrap().pivots()
}

pub fn scaled(x: &[f64], a: f64) -> Vec<f64> {
    x.iter().map(|v| v * a).collect()
}

/// Componentwise larger vector, some entries left unchanged.
pub fn bumped(x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    x.iter()
        .map(|v| if rng.random_bool(0.3) { *v } else { v * (1.0 + rng.random_range(0.0..1.0)) })
        .collect()
}

pub type Check = Result<(), String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `f(x) > 0` and `f(αx) < αf(x)` by a relative margin.
pub fn strictly_subhomogeneous(fx: &[f64], fax: &[f64], alpha: f64) -> Check {
    for (a, b) in fx.iter().zip(fax) {
        check(*a > 0.0, || format!("value {a} not positive"))?;
        check(alpha * a - b > STRICT_MARGIN * alpha * a, || format!("alpha={alpha}: f(ax)={b} vs a f(x)={}", alpha * a))?;
    }
    Ok(())
}

pub fn monotone(lo: &[f64], hi: &[f64]) -> Check {
    for (a, b) in lo.iter().zip(hi) {
        check(*b >= *a * (1.0 - REL_TOL), || format!("{b} < {a}"))?;
    }
    Ok(())
}

/// Nonnegativity, strict subhomogeneity and monotonicity of a map on `R_+^n`.
fn si_suite(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], rng: &mut ChaCha8Rng) -> Check {
    let f0 = f(x);
    for alpha in ALPHAS {
        strictly_subhomogeneous(&f0, &f(&scaled(x, alpha)), alpha)?;
    }
    let at_zero = f(&vec![0.0; x.len()]);
    check(at_zero.iter().all(|v| *v >= 0.0), || "negative value at zero".into())?;
    monotone(&f0, &f(&bumped(x, rng)))?;
    monotone(&at_zero, &f0)
}

pub fn check_i_suite(seed: u64) -> Check {
    let inst = draw_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = random_beta(&inst, &mut rng);
    si_suite(&|b| dual::i_map(&inst, b).unwrap(), &beta, &mut rng)
}

pub fn check_j_suite(seed: u64) -> Check {
    let inst = draw_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = random_beta(&inst, &mut rng);
    let d = dual_at(&inst, &beta);
    let dirs = primal::beam_directions(&inst, &d).unwrap();
    let map = PrimalMap::new(&inst, &d, &dirs).unwrap();
    let p = random_powers(&inst, &mut rng);
    si_suite(&|x| map.j_of(x), &p, &mut rng)
}

/// Positivity, strict subhomogeneity and monotonicity of each `Λ_m^{(m,m)}(β)`.
pub fn check_lambda_pivots(seed: u64) -> Check {
    let inst = draw_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = random_beta(&inst, &mut rng);
    si_suite(&|b| pivots(&inst, b), &beta, &mut rng)?;
    check(pivots(&inst, &vec![0.0; inst.num_users()]).iter().all(|v| *v > 0.0), || "pivot at zero not positive".into())
}

/// `Q(·)` is PSD-valued, linear and monotone in the Loewner order.
pub fn check_q_map(seed: u64) -> Check {
    let inst = draw_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = random_beta(&inst, &mut rng);
    let d = dual_at(&inst, &beta);
    let dirs = primal::beam_directions(&inst, &d).unwrap();
    let map = PrimalMap::new(&inst, &d, &dirs).unwrap();
    let p1 = random_powers(&inst, &mut rng);
    let p2 = random_powers(&inst, &mut rng);
    let q1 = map.q_of(&p1);
    let q2 = map.q_of(&p2);
    let tr = q1.trace().re;
    let min_eig = linalg::min_eigenvalue(&q1);
    check(min_eig >= -REL_TOL * tr, || format!("Q not PSD: {min_eig:e}"))?;
    let (a, b) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
    let mix: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| a * x + b * y).collect();
    let lin = q1.scale(a) + q2.scale(b);
    let err = linalg::frobenius(&(map.q_of(&mix) - &lin));
    check(err <= REL_TOL * linalg::frobenius(&lin), || format!("Q not linear: {err:e}"))?;
    let diff = map.q_of(&bumped(&p1, &mut rng)) - &q1;
    let min_diff = linalg::min_eigenvalue(&diff);
    check(min_diff >= -REL_TOL * tr, || format!("Q not monotone: {min_diff:e}"))?;
    let m = inst.num_relays();
    check(map.q_of(&vec![0.0; inst.num_users()]) == CMat::zeros(m, m), || "Q(0) != 0".into())
}
