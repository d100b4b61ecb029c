//! Multinomial–Dirichlet estimators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::alpha_search::{ascend, AlphaObjective, FeasibleRegion};
use super::{EstimationResult, Hyper, FEASIBILITY_SLACK};
use crate::constraints::{ConstraintSet, LinearConstraint};
use crate::dirichlet::{DirichletHyper, ProbabilityMethod};
use crate::error::{check_dim, Error, Result};
use crate::qp::QuadraticProgram;
use crate::stats::special::{digamma, ln_gamma, trigamma};
use crate::stats::QuadratureConfig;

/// Category counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct MultinomialData {
    counts: Vec<u64>,
}

impl TryFrom<Vec<u64>> for MultinomialData {
    type Error = Error;
    fn try_from(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts)
    }
}

impl From<MultinomialData> for Vec<u64> {
    fn from(d: MultinomialData) -> Self {
        d.counts
    }
}

impl MultinomialData {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Domain("need at least one category".into()));
        }
        Ok(Self { counts })
    }

    /// Tallies category indices in `0..n`.
    pub fn from_draws(draws: &[usize], n: usize) -> Result<Self> {
        let mut counts = vec![0; n];
        for &d in draws {
            *counts
                .get_mut(d)
                .ok_or_else(|| Error::Domain(format!("category {d} out of range 0..{n}")))? += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::Domain("all counts are zero".into()));
        }
        Ok(())
    }

    /// `Σ cᵢ ln θᵢ`, with `0·ln 0 = 0`.
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.counts
            .iter()
            .zip(theta)
            .filter(|(c, _)| **c > 0)
            .map(|(&c, &t)| c as f64 * t.ln())
            .sum()
    }
}

/// `θᵢ = cᵢ / Σc`.
pub fn mle_multinomial(d: &MultinomialData) -> Result<Vec<f64>> {
    d.require_nonempty()?;
    let total = d.total() as f64;
    Ok(d.counts.iter().map(|&c| c as f64 / total).collect())
}

fn simplex_rows(hard: &[LinearConstraint], n: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = hard.len() + n;
    let mut g = DMatrix::zeros(m, n);
    let mut h = DVector::zeros(m);
    for (k, c) in hard.iter().enumerate() {
        check_dim(n, c.dim())?;
        g.row_mut(k).copy_from_slice(c.a());
        h[k] = c.b();
    }
    for i in 0..n {
        g[(hard.len() + i, i)] = -1.0;
    }
    Ok((g, h))
}

/// Maximizes `Σ cᵢ ln θᵢ` over the simplex intersected with `hard`.
///
/// Newton–SQP: each step solves a QP with the diagonal Hessian `cᵢ/θᵢ²`
/// over the polytope and backtracks on the true log-likelihood.
pub fn constrained_mle_multinomial(d: &MultinomialData, hard: &[LinearConstraint]) -> Result<Vec<f64>> {
    d.require_nonempty()?;
    let n = d.dim();
    let counts = d.as_f64();
    let (g, h) = simplex_rows(hard, n)?;
    let ones = DMatrix::from_element(1, n, 1.0);
    let one = DVector::from_element(1, 1.0);

    // start at the feasible point nearest the MLE, kept off zero where counts are positive
    let mle = DVector::from_vec(mle_multinomial(d)?);
    let nearest = |floor: f64| {
        let mut hf = h.clone();
        for i in 0..n {
            if counts[i] > 0.0 {
                hf[hard.len() + i] = -floor;
            }
        }
        QuadraticProgram::new(DMatrix::identity(n, n), -&mle)
            .with_inequalities(g.clone(), hf)
            .with_equalities(ones.clone(), one.clone())
            .solve(None)
    };
    let mut theta = match nearest(1e-6 / n as f64) {
        Ok(sol) => sol.x,
        Err(Error::Infeasible(_)) => {
            let x = nearest(0.0)?.x;
            if (0..n).any(|i| counts[i] > 0.0 && x[i] <= 0.0) {
                return Err(Error::Infeasible(
                    "constraints force zero probability on an observed category".into(),
                ));
            }
            x
        }
        Err(e) => return Err(e),
    };

    let mut value = d.log_likelihood(theta.as_slice());
    for _ in 0..200 {
        let grad = DVector::from_fn(n, |i, _| if counts[i] > 0.0 { counts[i] / theta[i] } else { 0.0 });
        let curv_scale = (0..n)
            .filter(|&i| counts[i] > 0.0)
            .map(|i| counts[i] / (theta[i] * theta[i]))
            .fold(0.0, f64::max);
        let hess = DMatrix::from_fn(n, n, |i, j| {
            if i != j {
                0.0
            } else if counts[i] > 0.0 {
                counts[i] / (theta[i] * theta[i])
            } else {
                1e-8 * curv_scale
            }
        });
        // minimize ½(y−θ)ᵀH(y−θ) − gᵀ(y−θ)
        let qp = QuadraticProgram::new(hess.clone(), -&grad - &hess * &theta)
            .with_inequalities(g.clone(), h.clone())
            .with_equalities(ones.clone(), one.clone());
        let y = qp.solve(Some(&theta))?.x;
        let dir = &y - &theta;
        let predicted = grad.dot(&dir);
        if predicted <= 1e-13 * (1.0 + value.abs()) {
            break;
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = &theta + &dir * t;
            let ok = (0..n).all(|i| counts[i] == 0.0 || cand[i] > 0.0);
            if ok {
                let v = d.log_likelihood(cand.as_slice());
                if v >= value + 1e-4 * t * predicted {
                    theta = cand;
                    value = v;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    // clean rounding residue on the bounds
    let mut out: Vec<f64> = theta.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    Ok(out)
}

/// Settings shared by the Dirichlet MAP and empirical Bayes fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirichletFitConfig {
    /// Per-coordinate box for `α`; the uniform hyperprior lives on it.
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub method: ProbabilityMethod,
    pub quadrature: QuadratureConfig,
    /// Lower bound for every `θᵢ` in the MAP θ-step.
    pub theta_floor: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub tol: f64,
    /// Random probes, on top of the deterministic ones, when searching for a feasible start.
    pub probe_samples: usize,
    pub seed: u64,
    /// Skip the α-step and keep these concentrations.
    pub fixed_alpha: Option<Vec<f64>>,
}

impl Default for DirichletFitConfig {
    fn default() -> Self {
        Self {
            alpha_lo: 0.5,
            alpha_hi: 50.0,
            method: ProbabilityMethod::Edgeworth2,
            quadrature: QuadratureConfig::default(),
            theta_floor: 1e-8,
            max_outer: 200,
            max_inner: 50,
            tol: 1e-10,
            probe_samples: 512,
            seed: 0x5eed,
            fixed_alpha: None,
        }
    }
}

impl DirichletFitConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha_lo > 0.0 && self.alpha_lo < self.alpha_hi && self.alpha_hi.is_finite()) {
            return Err(Error::Config(format!(
                "alpha box must satisfy 0 < lo < hi < ∞, got [{}, {}]",
                self.alpha_lo, self.alpha_hi
            )));
        }
        if !(self.theta_floor > 0.0 && self.theta_floor * n as f64 <= 1e-3) {
            return Err(Error::Config(format!("theta floor {} out of range", self.theta_floor)));
        }
        if let Some(a) = &self.fixed_alpha {
            check_dim(n, a.len())?;
        }
        self.quadrature.validate()
    }

    fn region<'a>(&'a self, cs: &'a ConstraintSet) -> FeasibleRegion<'a> {
        FeasibleRegion {
            constraints: cs,
            method: self.method,
            quadrature: &self.quadrature,
            lo: self.alpha_lo,
            hi: self.alpha_hi,
        }
    }
}

/// Maximizer of `Σ wᵢ ln θᵢ` over `{θ : θᵢ ≥ ε, Σθ = 1}`.
///
/// With `w = c + α − 1` this is the MAP θ-step. Coordinates with `wᵢ ≤ 0`
/// sit on the floor; the rest are proportional to `w` above it.
pub fn dirichlet_theta_step(weights: &[f64], floor: f64) -> Result<Vec<f64>> {
    let n = weights.len();
    if n == 0 || floor * n as f64 >= 1.0 || floor < 0.0 {
        return Err(Error::Domain(format!("floor {floor} infeasible for {n} categories")));
    }
    let mut pinned: Vec<bool> = weights.iter().map(|w| *w <= 0.0).collect();
    if pinned.iter().all(|p| *p) {
        return Ok(vec![1.0 / n as f64; n]);
    }
    loop {
        let free_mass = 1.0 - floor * pinned.iter().filter(|p| **p).count() as f64;
        let free_weight: f64 = weights.iter().zip(&pinned).filter(|(_, p)| !**p).map(|(w, _)| w).sum();
        let scale = free_mass / free_weight;
        let mut changed = false;
        for i in 0..n {
            if !pinned[i] && weights[i] * scale < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            return Ok(weights
                .iter()
                .zip(&pinned)
                .map(|(w, p)| if *p { floor } else { w * scale })
                .collect());
        }
    }
}

/// `ln Γ(Σα) − Σ ln Γ(αᵢ) + Σ (αᵢ − 1) ln θᵢ`
fn log_dirichlet_density(alpha: &[f64], log_theta: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    ln_gamma(total) + alpha.iter().zip(log_theta).map(|(a, l)| (a - 1.0) * l - ln_gamma(*a)).sum::<f64>()
}

struct MapAlphaObjective {
    log_theta: Vec<f64>,
}

impl AlphaObjective for MapAlphaObjective {
    fn value(&self, alpha: &[f64]) -> f64 {
        log_dirichlet_density(alpha, &self.log_theta)
    }

    fn gradient(&self, alpha: &[f64]) -> DVector<f64> {
        let psi_total = digamma(alpha.iter().sum());
        DVector::from_fn(alpha.len(), |i, _| psi_total - digamma(alpha[i]) + self.log_theta[i])
    }

    fn curvature(&self, alpha: &[f64]) -> DMatrix<f64> {
        // Fisher information of the Dirichlet, positive definite
        let t = trigamma(alpha.iter().sum());
        DMatrix::from_fn(alpha.len(), alpha.len(), |i, j| {
            if i == j {
                trigamma(alpha[i]) - t
            } else {
                -t
            }
        })
    }
}

/// Joint MAP of `(θ, α)` under a uniform hyperprior on the box intersected
/// with the inverted constraint sets, by alternating exact θ-steps with
/// feasible ascent in `α`.
pub fn map_dirichlet_multinomial(
    d: &MultinomialData,
    cs: &ConstraintSet,
    cfg: &DirichletFitConfig,
) -> Result<EstimationResult> {
    d.require_nonempty()?;
    let n = d.dim();
    cs.check_dim(n)?;
    cfg.validate(n)?;
    let counts = d.as_f64();
    let region = cfg.region(cs);

    let theta_for = |alpha: &[f64]| {
        let w: Vec<f64> = counts.iter().zip(alpha).map(|(c, a)| c + a - 1.0).collect();
        dirichlet_theta_step(&w, cfg.theta_floor)
    };
    let objective = |theta: &[f64], alpha: &[f64]| {
        let log_theta: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
        d.log_likelihood(theta) + log_dirichlet_density(alpha, &log_theta)
    };

    let mut alpha = match &cfg.fixed_alpha {
        Some(a) => DirichletHyper::new(a.clone())?.alpha().to_vec(),
        None => {
            let smoothed = dirichlet_theta_step(&counts, cfg.theta_floor)?;
            let obj = MapAlphaObjective {
                log_theta: smoothed.iter().map(|t| t.ln()).collect(),
            };
            region.probe(&obj, n, cfg.probe_samples, cfg.seed)?
        }
    };
    let mut theta = theta_for(&alpha)?;
    let mut value = objective(&theta, &alpha);
    let mut trace = vec![value];
    let mut converged = cfg.fixed_alpha.is_some();
    let mut iterations = 0;
    if cfg.fixed_alpha.is_none() {
        for _ in 0..cfg.max_outer {
            iterations += 1;
            let obj = MapAlphaObjective {
                log_theta: theta.iter().map(|t| t.ln()).collect(),
            };
            alpha = ascend(&obj, &region, alpha, cfg.max_inner, cfg.tol)?.alpha;
            theta = theta_for(&alpha)?;
            let next = objective(&theta, &alpha);
            trace.push(next);
            let gain = next - value;
            value = next;
            if gain <= cfg.tol * (1.0 + value.abs()) {
                converged = true;
                break;
            }
        }
    }
    let feasibility = region.margins(&alpha)?;
    converged &= feasibility.iter().all(|m| *m >= -FEASIBILITY_SLACK);
    Ok(EstimationResult {
        theta,
        hyper: Some(Hyper::Dirichlet(DirichletHyper::new(alpha)?)),
        objective_trace: trace,
        feasibility,
        iterations,
        converged,
    })
}

/// Summed Dirichlet-multinomial (Polya) log-likelihood, up to terms free of `α`.
struct PolyaObjective {
    replicates: Vec<Vec<f64>>,
}

impl PolyaObjective {
    fn totals(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.iter().sum()).collect()
    }
}

impl AlphaObjective for PolyaObjective {
    fn value(&self, alpha: &[f64]) -> f64 {
        let a_total: f64 = alpha.iter().sum();
        self.replicates
            .iter()
            .zip(self.totals())
            .map(|(c, n)| {
                ln_gamma(a_total) - ln_gamma(a_total + n)
                    + alpha.iter().zip(c).map(|(a, c)| ln_gamma(a + c) - ln_gamma(*a)).sum::<f64>()
            })
            .sum()
    }

    fn gradient(&self, alpha: &[f64]) -> DVector<f64> {
        let a_total: f64 = alpha.iter().sum();
        let mut g = DVector::zeros(alpha.len());
        for (c, n) in self.replicates.iter().zip(self.totals()) {
            let shared = digamma(a_total) - digamma(a_total + n);
            for i in 0..alpha.len() {
                g[i] += shared + digamma(alpha[i] + c[i]) - digamma(alpha[i]);
            }
        }
        g
    }

    fn curvature(&self, alpha: &[f64]) -> DMatrix<f64> {
        let n = alpha.len();
        let a_total: f64 = alpha.iter().sum();
        let mut neg_hess = DMatrix::<f64>::zeros(n, n);
        for (c, total) in self.replicates.iter().zip(self.totals()) {
            let shared = trigamma(a_total) - trigamma(a_total + total);
            for i in 0..n {
                for j in 0..n {
                    neg_hess[(i, j)] -= shared;
                }
                neg_hess[(i, i)] += trigamma(alpha[i]) - trigamma(alpha[i] + c[i]);
            }
        }
        // the Polya likelihood is not concave everywhere: lift the spectrum
        let eig = neg_hess.symmetric_eigen();
        let floor = 1e-6 * (1.0 + eig.eigenvalues.amax());
        let vals = eig.eigenvalues.map(|v: f64| v.max(floor));
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
    }
}

/// Empirical Bayes: maximizes the marginal likelihood of the replicates
/// over the feasible `α`, then predicts `θ̂ = (c + α)/Σ(c + α)` from pooled counts.
pub fn eb_dirichlet_multinomial(
    replicates: &[MultinomialData],
    cs: &ConstraintSet,
    cfg: &DirichletFitConfig,
) -> Result<EstimationResult> {
    let first = replicates
        .first()
        .ok_or_else(|| Error::Domain("need at least one replicate".into()))?;
    let n = first.dim();
    for r in replicates {
        check_dim(n, r.dim())?;
    }
    let pooled: Vec<f64> = (0..n).map(|i| replicates.iter().map(|r| r.counts[i] as f64).sum()).collect();
    if pooled.iter().sum::<f64>() == 0.0 {
        return Err(Error::Domain("all counts are zero".into()));
    }
    cs.check_dim(n)?;
    cfg.validate(n)?;
    let region = cfg.region(cs);
    let obj = PolyaObjective {
        replicates: replicates.iter().map(|r| r.as_f64()).collect(),
    };
    let (alpha, trace, converged) = match &cfg.fixed_alpha {
        Some(a) => (a.clone(), vec![obj.value(a)], true),
        None => {
            let start = region.probe(&obj, n, cfg.probe_samples, cfg.seed)?;
            let out = ascend(&obj, &region, start, cfg.max_outer * cfg.max_inner, cfg.tol)?;
            (out.alpha, out.trace, out.converged)
        }
    };
    let feasibility = region.margins(&alpha)?;
    let total: f64 = pooled.iter().zip(&alpha).map(|(c, a)| c + a).sum();
    let theta = pooled.iter().zip(&alpha).map(|(c, a)| (c + a) / total).collect();
    Ok(EstimationResult {
        theta,
        hyper: Some(Hyper::Dirichlet(DirichletHyper::new(alpha)?)),
        iterations: trace.len() - 1,
        objective_trace: trace,
        converged: converged && feasibility.iter().all(|m| *m >= -FEASIBILITY_SLACK),
        feasibility,
    })
}

/// The Polya objective used by [`eb_dirichlet_multinomial`], exposed for oracles.
pub fn polya_log_likelihood(replicates: &[MultinomialData], alpha: &[f64]) -> f64 {
    PolyaObjective {
        replicates: replicates.iter().map(|r| r.as_f64()).collect(),
    }
    .value(alpha)
}

/// The joint objective maximized by [`map_dirichlet_multinomial`].
pub fn map_log_posterior(d: &MultinomialData, theta: &[f64], alpha: &[f64]) -> f64 {
    let log_theta: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    d.log_likelihood(theta) + log_dirichlet_density(alpha, &log_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ordering, ordering_chain};
    use proptest::prelude::*;

    fn data(c: &[u64]) -> MultinomialData {
        MultinomialData::new(c.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn mle_examples() {
        assert_eq!(mle_multinomial(&data(&[3, 7])).unwrap(), vec![0.3, 0.7]);
        assert_eq!(mle_multinomial(&data(&[0, 5])).unwrap(), vec![0.0, 1.0]);
        assert_eq!(mle_multinomial(&data(&[1, 1, 2])).unwrap(), vec![0.25, 0.25, 0.5]);
        assert!(matches!(mle_multinomial(&data(&[0, 0])), Err(Error::Domain(_))));
    }

    #[test]
    fn constrained_mle_examples() {
        let le = [ordering(0, 1, 2).unwrap()];
        let out = constrained_mle_multinomial(&data(&[7, 3]), &le).unwrap();
        assert!(close(&out, &[0.5, 0.5], 1e-9), "{out:?}");
        let out = constrained_mle_multinomial(&data(&[3, 7]), &le).unwrap();
        assert!(close(&out, &[0.3, 0.7], 1e-9), "{out:?}");
    }

    #[test]
    fn constrained_mle_matches_simplex_grid() {
        let d = data(&[5, 3, 2]);
        let chain = ordering_chain(&[0, 1, 2], 3).unwrap();
        let ours = constrained_mle_multinomial(&d, &chain).unwrap();
        let (mut best, mut arg) = (f64::NEG_INFINITY, [0.0; 3]);
        let steps = 1000;
        for i in 1..steps {
            for j in i..steps - i {
                let k = steps - i - j;
                if k < j {
                    continue;
                }
                let t = [i as f64 / 1e3, j as f64 / 1e3, k as f64 / 1e3];
                let v = d.log_likelihood(&t);
                if v > best {
                    best = v;
                    arg = t;
                }
            }
        }
        assert!(close(&ours, &arg, 2e-3), "{ours:?} vs {arg:?}");
        assert!(d.log_likelihood(&ours) >= best - 1e-9);
        // pooling all three gives the uniform vector
        assert!(close(&ours, &[1.0 / 3.0; 3], 1e-9));
    }

    #[test]
    fn constrained_mle_infeasible() {
        let c = [
            LinearConstraint::new(vec![1.0, 0.0], 0.2).unwrap(),
            LinearConstraint::new(vec![0.0, 1.0], 0.2).unwrap(),
        ];
        assert!(matches!(
            constrained_mle_multinomial(&data(&[1, 1]), &c),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn theta_step_floor() {
        let out = dirichlet_theta_step(&[-0.5, 2.0, 2.0], 1e-8).unwrap();
        assert_eq!(out[0], 1e-8);
        assert!((out[1] - 0.5 * (1.0 - 1e-8)).abs() < 1e-15);
        let out = dirichlet_theta_step(&[4.0, 8.0], 1e-8).unwrap();
        assert!(close(&out, &[1.0 / 3.0, 2.0 / 3.0], 1e-15));
    }

    #[test]
    fn map_with_fixed_alpha() {
        let cfg = DirichletFitConfig {
            fixed_alpha: Some(vec![2.0, 2.0]),
            ..Default::default()
        };
        let out = map_dirichlet_multinomial(&data(&[3, 7]), &ConstraintSet::empty(), &cfg).unwrap();
        assert!(close(&out.theta, &[4.0 / 12.0, 8.0 / 12.0], 1e-12));
    }

    #[test]
    fn map_is_monotone_and_feasible() {
        let cs = ConstraintSet::with_confidence(vec![ordering(0, 1, 2).unwrap()], 0.95).unwrap();
        let out = map_dirichlet_multinomial(&data(&[2, 8]), &cs, &DirichletFitConfig::default()).unwrap();
        assert!(out.trace_is_monotone(1e-9), "{:?}", out.objective_trace);
        assert!(out.converged);
        assert!(out.feasibility[0] >= 0.0);
    }

    #[test]
    fn contradicting_constraint_keeps_theta_near_mle() {
        // θ₁ ≥ θ₂ against data that say otherwise
        let cs = ConstraintSet::with_confidence(vec![ordering(1, 0, 2).unwrap()], 0.95).unwrap();
        let d = data(&[40, 160]);
        let cfg = DirichletFitConfig {
            method: ProbabilityMethod::Exact,
            ..Default::default()
        };
        let out = map_dirichlet_multinomial(&d, &cs, &cfg).unwrap();
        let mle = mle_multinomial(&d).unwrap();
        let l1: f64 = out.theta.iter().zip(&mle).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 0.1, "{:?}", out.theta);
        // the constraint binds
        assert!(out.feasibility[0] >= 0.0 && out.feasibility[0] < 1e-3, "{:?}", out.feasibility);
    }

    #[test]
    fn eb_symmetric_single_replicate() {
        let out = eb_dirichlet_multinomial(&[data(&[1, 1])], &ConstraintSet::empty(), &DirichletFitConfig::default())
            .unwrap();
        let Some(Hyper::Dirichlet(h)) = &out.hyper else { panic!() };
        assert!((h.alpha()[0] - h.alpha()[1]).abs() < 1e-6, "{:?}", h.alpha());
    }

    #[test]
    fn eb_matches_grid_and_constraint_lowers_optimum() {
        let reps = [data(&[3, 7]), data(&[2, 8]), data(&[4, 6])];
        let cfg = DirichletFitConfig {
            alpha_lo: 0.1,
            ..Default::default()
        };
        let free = eb_dirichlet_multinomial(&reps, &ConstraintSet::empty(), &cfg).unwrap();
        let ours = *free.objective_trace.last().unwrap();
        let mut grid = f64::NEG_INFINITY;
        for i in 0..=499 {
            for j in 0..=499 {
                let a = [0.1 + 0.1 * f64::from(i), 0.1 + 0.1 * f64::from(j)];
                grid = grid.max(polya_log_likelihood(&reps, &a));
            }
        }
        assert!((ours - grid).abs() < 1e-2 || ours > grid, "ours {ours} grid {grid}");
        assert!(free.trace_is_monotone(1e-9));

        let cs = ConstraintSet::with_confidence(vec![ordering(0, 1, 2).unwrap()], 0.95).unwrap();
        let held = eb_dirichlet_multinomial(&reps, &cs, &cfg).unwrap();
        assert!(held.feasibility[0] >= 0.0);
        assert!(*held.objective_trace.last().unwrap() <= ours + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hard_constraints_hold(c in proptest::collection::vec(0u64..20, 4)) {
            prop_assume!(c.iter().sum::<u64>() > 0);
            let chain = ordering_chain(&[0, 1, 2, 3], 4).unwrap();
            let d = MultinomialData::new(c).unwrap();
            let out = constrained_mle_multinomial(&d, &chain).unwrap();
            for h in &chain {
                prop_assert!(h.slack(&out).unwrap() >= -1e-10);
            }
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn inactive_constraints_do_not_move_mle(c in proptest::collection::vec(1u64..30, 3)) {
            let d = MultinomialData::new(c).unwrap();
            let mle = mle_multinomial(&d).unwrap();
            // a constraint with positive slack at the MLE
            let loose = LinearConstraint::new(vec![1.0, 0.0, 0.0], mle[0] + 0.05).unwrap();
            let out = constrained_mle_multinomial(&d, &[loose]).unwrap();
            prop_assert!(close(&out, &mle, 1e-6));
        }

        #[test]
        fn theta_step_is_optimal(w in proptest::collection::vec(-1.0f64..10.0, 2..6)) {
            prop_assume!(w.iter().any(|v| *v > 0.1));
            let floor = 1e-4;
            let t = dirichlet_theta_step(&w, floor).unwrap();
            let value = |t: &[f64]| t.iter().zip(&w).map(|(t, w)| w * t.ln()).sum::<f64>();
            prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // no feasible pairwise transfer improves the objective
            let base = value(&t);
            for i in 0..t.len() {
                for j in 0..t.len() {
                    if i == j { continue; }
                    let eps = 1e-6;
                    if t[j] - eps < floor { continue; }
                    let mut u = t.clone();
                    u[i] += eps;
                    u[j] -= eps;
                    prop_assert!(value(&u) <= base + 1e-12);
                }
            }
        }
    }
}
