//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is always printed.
//! The process fails when the set of failing criteria differs from
//! `KNOWN_FAILURES`, so a regression and an unexpected fix both surface.

use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::beta_reg;

use probcon::bregman::{cyclic_project, logdet_divergence, project_single, TraceConstraint};
use probcon::constraints::{ordering, ConstraintSet};
use probcon::dirichlet::{prob_leq_edgeworth, prob_leq_exact, prob_leq_montecarlo, EdgeworthOrder};
use probcon::estimators::multinomial::{map_log_posterior, polya_log_likelihood};
use probcon::estimators::{eb_dirichlet_multinomial, map_dirichlet_multinomial, DirichletFitConfig, MultinomialData};
use probcon::gaussian::{prob_leq, soc_margin};
use probcon::harness::{builtin_spec, mean_metric, run_experiment, Family, Scenario, ERROR_METRIC};
use probcon::stats::std_normal_quantile;
use probcon::{
    DirichletHyper, GaussianHyper, LinearConstraint, ProbabilisticConstraint, ProbabilityMethod, QuadratureConfig,
    RngHandle,
};

/// Criteria that fail for reasons analysed in the project notes.
const KNOWN_FAILURES: &[u32] = &[5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn random_spd(n: usize, rng: &mut RngHandle) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
    &l * l.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_vec(n: usize, lo: f64, hi: f64, rng: &mut RngHandle) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(lo, hi)).collect()
}

/// Exact vs Monte Carlo vs Edgeworth on random Dirichlet instances.
fn criterion_1() -> Outcome {
    const INSTANCES: usize = 200;
    const SAMPLES: usize = 100_000;
    let mut gen = RngHandle::new(101);
    let mut mc_rng = RngHandle::new(102);
    let cfg = QuadratureConfig::default();
    let (mut mc_ok, mut ew_ok) = (0, 0);
    for _ in 0..INSTANCES {
        let n = 2 + gen.index(5);
        let hyper = DirichletHyper::new(random_vec(n, 0.5, 10.0, &mut gen)).unwrap();
        let a = random_vec(n, -1.0, 1.0, &mut gen);
        let (lo, hi) = a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        let b = gen.uniform_range(lo, hi);
        let c = LinearConstraint::new(a, b).unwrap();
        let exact = prob_leq_exact(&hyper, &c, &cfg).unwrap();
        let mc = prob_leq_montecarlo(&hyper, &c, SAMPLES, &mut mc_rng).unwrap();
        let ew = prob_leq_edgeworth(&hyper, &c, EdgeworthOrder::Two).unwrap();
        // all samples on one side: use the standard error of a single event
        let floor = ((1.0 - 1.0 / SAMPLES as f64) / (SAMPLES as f64).powi(2)).sqrt();
        mc_ok += usize::from((exact - mc.estimate).abs() <= 3.0 * mc.std_err.max(floor));
        ew_ok += usize::from((ew - exact).abs() <= 0.02);
    }
    let mc_frac = mc_ok as f64 / INSTANCES as f64;
    let ew_frac = ew_ok as f64 / INSTANCES as f64;
    Outcome {
        pass: mc_frac >= 0.99 && ew_frac >= 0.95,
        detail: format!("exact~MC within 3se {mc_frac:.3} (need 0.99), Edgeworth2 within 0.02 {ew_frac:.3} (need 0.95)"),
    }
}

/// Single-coordinate constraints against the regularized incomplete beta.
fn criterion_2() -> Outcome {
    let mut rng = RngHandle::new(201);
    let cfg = QuadratureConfig::default();
    let mut worst = 0.0_f64;
    for k in 0..50 {
        let n = 2 + rng.index(5);
        let alpha = random_vec(n, 0.5, 10.0, &mut rng);
        let i = rng.index(n);
        let x = rng.uniform_range(0.02, 0.98);
        let rest: f64 = alpha.iter().sum::<f64>() - alpha[i];
        let cdf = beta_reg(alpha[i], rest, x);
        // alternate θᵢ ≤ x and θᵢ ≥ x
        let mut a = vec![0.0; n];
        let (c, want) = if k % 2 == 0 {
            a[i] = 1.0;
            (LinearConstraint::new(a, x).unwrap(), cdf)
        } else {
            a[i] = -1.0;
            (LinearConstraint::new(a, -x).unwrap(), 1.0 - cdf)
        };
        let got = prob_leq_exact(&DirichletHyper::new(alpha).unwrap(), &c, &cfg).unwrap();
        worst = worst.max((got - want).abs());
    }
    let dir21 = prob_leq_exact(
        &DirichletHyper::new(vec![2.0, 1.0]).unwrap(),
        &LinearConstraint::new(vec![1.0, 0.0], 0.5).unwrap(),
        &cfg,
    )
    .unwrap();
    Outcome {
        pass: worst <= 1e-4 && (dir21 - 0.25).abs() <= 1e-4,
        detail: format!("max |exact - I_x| {worst:.2e} (need 1e-4), Dir(2,1) b=0.5 gives {dir21:.8}"),
    }
}

/// SOC margin sign against the Gaussian probability, and boundary exactness.
fn criterion_3() -> Outcome {
    let mut rng = RngHandle::new(301);
    let (mut mismatches, mut worst_boundary) = (0, 0.0_f64);
    for _ in 0..500 {
        let n = 1 + rng.index(5);
        let mu = DVector::from_vec(random_vec(n, -3.0, 3.0, &mut rng));
        let sigma = random_spd(n, &mut rng);
        let h = GaussianHyper::new(mu.clone(), sigma.clone()).unwrap();
        let a = random_vec(n, -1.0, 1.0, &mut rng);
        let b = rng.uniform_range(-4.0, 4.0);
        let eta = rng.uniform_range(0.01, 0.999);
        let c = LinearConstraint::new(a.clone(), b).unwrap();
        let margin = soc_margin(&h, &ProbabilisticConstraint::new(c.clone(), eta).unwrap()).unwrap();
        let p = prob_leq(&h, &c).unwrap();
        if margin.abs() > 1e-12 && (margin >= 0.0) != (p >= eta) {
            mismatches += 1;
        }
        // move b onto the boundary of the feasible set
        let av = DVector::from_column_slice(&a);
        let b0 = av.dot(&mu) + std_normal_quantile(eta).unwrap() * av.dot(&(&sigma * &av)).sqrt();
        let c0 = LinearConstraint::new(a, b0).unwrap();
        worst_boundary = worst_boundary.max((prob_leq(&h, &c0).unwrap() - eta).abs());
    }
    Outcome {
        pass: mismatches == 0 && worst_boundary <= 1e-10,
        detail: format!("{mismatches} sign mismatches in 500, boundary |P - eta| max {worst_boundary:.2e} (need 1e-10)"),
    }
}

/// `(X⁻¹ + λaaᵀ)⁻¹` with `λ` found by bisection on `aᵀΣ(λ)a = z`; the
/// stationarity condition of the LogDet projection solved without the rank-one formula.
fn dual_bisection_projection(x: &DMatrix<f64>, a: &DVector<f64>, z: f64) -> DMatrix<f64> {
    let prec = x.clone().try_inverse().unwrap();
    let sigma_at = |lam: f64| (&prec + a * a.transpose() * lam).try_inverse().unwrap();
    let quad = |lam: f64| a.dot(&(sigma_at(lam) * a));
    let (mut lo, mut hi) = (0.0, 1.0);
    while quad(hi) > z {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quad(mid) > z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sigma_at(0.5 * (lo + hi))
}

/// Single projections against the closed form and a dual oracle, then cyclic suites.
fn criterion_4() -> Outcome {
    let mut rng = RngHandle::new(401);
    let (mut closed_worst, mut oracle_worst, mut optimality_failures) = (0.0_f64, 0.0_f64, 0);
    for k in 0..100 {
        let n = 2 + k % 2;
        let x = random_spd(n, &mut rng);
        let a = DVector::from_vec(random_vec(n, -1.0, 1.0, &mut rng));
        let p = a.dot(&(&x * &a));
        let z = p * rng.uniform_range(0.05, 0.95);
        let tc = TraceConstraint::new(a.as_slice().to_vec(), z).unwrap();
        let proj = project_single(&x, &tc).unwrap();
        let nu = (p - z) / (z * p);
        let xa = &x * &a;
        let closed = &x - &xa * xa.transpose() * (nu / (1.0 + nu * p));
        closed_worst = closed_worst
            .max((proj.nu - nu).abs() / nu)
            .max((&proj.sigma - &closed).amax() / closed.amax());
        let oracle = dual_bisection_projection(&x, &a, z);
        oracle_worst = oracle_worst.max((&proj.sigma - &oracle).amax());
        // no feasible symmetric perturbation on the boundary does better
        let base = logdet_divergence(&proj.sigma, &x).unwrap();
        for _ in 0..20 {
            let e = DMatrix::from_fn(n, n, |_, _| rng.standard_normal()) * 1e-3;
            let mut cand = &proj.sigma + (&e + e.transpose()) * 0.5;
            let q = a.dot(&(&cand * &a));
            cand *= z / q;
            if let Ok(d) = logdet_divergence(&cand, &x) {
                if d < base - 1e-12 {
                    optimality_failures += 1;
                }
            }
        }
    }
    let (mut cyc_worst, mut min_eig) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let n = 2 + rng.index(4);
        let x = random_spd(n, &mut rng);
        let tcs: Vec<TraceConstraint> = (0..2 + rng.index(5))
            .map(|_| {
                let a = DVector::from_vec(random_vec(n, -1.0, 1.0, &mut rng));
                let z = a.dot(&(&x * &a)) * rng.uniform_range(0.05, 1.2);
                TraceConstraint::new(a.as_slice().to_vec(), z).unwrap()
            })
            .collect();
        let res = cyclic_project(&x, &tcs, 100, 1e-12).unwrap();
        cyc_worst = cyc_worst.max(res.max_violation);
        min_eig = min_eig.min(res.sigma.symmetric_eigen().eigenvalues.min());
    }
    Outcome {
        pass: closed_worst <= 1e-12 && oracle_worst <= 1e-6 && optimality_failures == 0 && cyc_worst <= 1e-8 && min_eig > 0.0,
        detail: format!(
            "closed-form rel dev {closed_worst:.1e}, dual oracle dev {oracle_worst:.1e}, \
             {optimality_failures} better perturbations, cyclic max violation {cyc_worst:.1e}, min eigenvalue {min_eig:.2e}"
        ),
    }
}

/// Ordinal error patterns of MAP, MLE and hard estimates at small training sizes, on the parameter L² error.
fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for family in [Family::Multinomial, Family::GaussianMeans, Family::Regression] {
        let mut spec = builtin_spec(family, 7);
        spec.n_replicates = 20;
        spec.train_sizes = match family {
            Family::Regression => vec![20],
            _ => vec![10, 20, 50],
        };
        spec.scenarios = vec![Scenario::Correct, Scenario::Incorrect];
        let rows = run_experiment(&spec, None).unwrap();
        let errors = rows.iter().filter(|r| r.metric == ERROR_METRIC).count();
        let (mle, hard) = match family {
            Family::Regression => ("ridge", "hard_ridge"),
            _ => ("mle", "hard"),
        };
        for &m in &spec.train_sizes {
            let mean = |est: &str, sc| mean_metric(&rows, est, sc, m, "l2_error").unwrap_or(f64::NAN);
            let (mle_c, map_c) = (mean(mle, Scenario::Correct), mean("map", Scenario::Correct));
            let (mle_i, hard_i, map_i) = (
                mean(mle, Scenario::Incorrect),
                mean(hard, Scenario::Incorrect),
                mean("map", Scenario::Incorrect),
            );
            let a = map_c <= mle_c;
            let b_hard = hard_i >= 1.2 * mle_i;
            let b_map = map_i <= 1.1 * mle_i;
            let ok = a && b_hard && b_map && errors == 0;
            pass &= ok;
            parts.push(format!(
                "{} m={m} {} [map/mle correct {:.3}, hard/mle incorrect {:.3}, map/mle incorrect {:.3}]",
                family.name(),
                if ok { "ok" } else { "x" },
                map_c / mle_c,
                hard_i / mle_i,
                map_i / mle_i
            ));
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Feasibility of `P(θ₁ ≤ θ₂) ≥ η` (or the reverse) for two categories via the Beta CDF.
fn beta_feasible(a1: f64, a2: f64, first_smaller: bool) -> bool {
    let p = beta_reg(a1, a2, 0.5);
    (if first_smaller { p } else { 1.0 - p }) >= 0.95
}

fn map_grid_optimum(d: &MultinomialData, alphas: &[f64], feasible: impl Fn(f64, f64) -> bool) -> f64 {
    let thetas: Vec<f64> = (1..1000).map(|i| i as f64 * 1e-3).collect();
    let mut best = f64::NEG_INFINITY;
    for &a1 in alphas {
        for &a2 in alphas {
            if feasible(a1, a2) {
                for &t in &thetas {
                    best = best.max(map_log_posterior(d, &[t, 1.0 - t], &[a1, a2]));
                }
            }
        }
    }
    best
}

fn eb_grid_optimum(reps: &[MultinomialData], alphas: &[f64], feasible: impl Fn(f64, f64) -> bool) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for &a1 in alphas {
        for &a2 in alphas {
            if feasible(a1, a2) {
                best = best.max(polya_log_likelihood(reps, &[a1, a2]));
            }
        }
    }
    best
}

/// Two-category MAP and EB objectives against exhaustive grids.
///
/// The named problems must agree with the grid to 1e-2 either way. A wider
/// set, including constraints the data contradict, must never fall below the
/// grid by more than 1e-2; there the curved feasibility boundary sits between
/// grid nodes, so the continuous optimum may legitimately exceed the grid.
fn criterion_6() -> Outcome {
    let (lo, hi) = (0.5, 20.0);
    let alphas = grid(lo, hi, 0.25);
    let cfg = DirichletFitConfig {
        alpha_lo: lo,
        alpha_hi: hi,
        method: ProbabilityMethod::Exact,
        ..Default::default()
    };
    let cs = |order: Option<bool>| match order {
        None => ConstraintSet::default(),
        Some(first_smaller) => {
            let c = if first_smaller { ordering(0, 1, 2) } else { ordering(1, 0, 2) };
            ConstraintSet::with_confidence(vec![c.unwrap()], 0.95).unwrap()
        }
    };
    let feasible = |order: Option<bool>| move |a1: f64, a2: f64| order.map_or(true, |f| beta_feasible(a1, a2, f));
    let data = |c: &[u64]| MultinomialData::new(c.to_vec()).unwrap();

    // (gap = ours - grid, gated two-sided)
    let mut named = Vec::new();
    let mut wide = Vec::new();
    for (counts, order, two_sided) in [
        ([2u64, 8], Some(true), true),
        ([2, 8], None, true),
        ([5, 5], Some(true), false),
        ([7, 3], Some(true), false),
        ([1, 9], Some(false), false),
        ([7, 3], Some(false), false),
    ] {
        let d = data(&counts);
        let fit = map_dirichlet_multinomial(&d, &cs(order), &cfg).unwrap();
        let gap = fit.objective_trace.last().unwrap() - map_grid_optimum(&d, &alphas, feasible(order));
        if two_sided { named.push(gap) } else { wide.push(gap) }
    }
    let named_reps = [[3u64, 7], [2, 8], [4, 6]];
    let other_reps = [[6u64, 4], [5, 5], [8, 2], [7, 3]];
    for (reps, order, two_sided) in [
        (&named_reps[..], None, true),
        (&named_reps[..], Some(true), true),
        (&named_reps[..], Some(false), false),
        (&other_reps[..], Some(true), false),
        (&other_reps[..], Some(false), false),
    ] {
        let reps: Vec<MultinomialData> = reps.iter().map(|c| data(c)).collect();
        let fit = eb_dirichlet_multinomial(&reps, &cs(order), &cfg).unwrap();
        let gap = fit.objective_trace.last().unwrap() - eb_grid_optimum(&reps, &alphas, feasible(order));
        if two_sided { named.push(gap) } else { wide.push(gap) }
    }
    let named_worst = named.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    let wide_min = wide.iter().fold(f64::INFINITY, |m, g| m.min(*g));
    let wide_max = wide.iter().fold(f64::NEG_INFINITY, |m, g| m.max(*g));
    Outcome {
        pass: named_worst <= 1e-2 && wide_min >= -1e-2,
        detail: format!(
            "{} named problems max |objective - grid optimum| {named_worst:.2e} (need 1e-2); \
             {} further problems objective - grid in [{wide_min:.2e}, {wide_max:.2e}] (need >= -1e-2)",
            named.len(),
            wide.len()
        ),
    }
}

/// The built-in multinomial experiment twice through the binary.
fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_probcon"))
            .args(["experiment", "--builtin", "multinomial", "--seed", "7", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let (first, second) = (run("a.csv"), run("b.csv"));
    let rows = first.iter().filter(|b| **b == b'\n').count();
    Outcome {
        pass: first == second && rows > 1,
        detail: format!("{} bytes, {rows} lines, identical: {}", first.len(), first == second),
    }
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut failing = Vec::new();
    for (id, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {verdict} ({:.1}s) {}", start.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass {
            failing.push(id);
        }
    }
    if failing != KNOWN_FAILURES {
        eprintln!("failing criteria {failing:?} differ from the known set {KNOWN_FAILURES:?}");
        std::process::exit(1);
    }
}
