//! Prior probability of a linear constraint under a Dirichlet prior.
//!
//! For `θ ~ Dir(α)` the event `aᵀθ ≤ b` equals `Σ_j (a_j − b) Y_j ≤ 0` with
//! independent `Y_j ~ χ²(2α_j)`. Grouping equal coefficients gives
//! `Σ_k λ_k T_k ≤ 0`, `T_k ~ χ²(r_k)`, whose probability is evaluated three ways:
//!
//! * a CDF-level Edgeworth expansion in the standardized cumulants,
//! * numerical inversion of the characteristic function (an Imhof-type integral),
//! * Monte Carlo over Dirichlet draws.
//!
//! Degrees of freedom `r_k = 2 Σ α_j` need not be integers; every formula treats
//! `χ²(r)` as `Gamma(r/2, 2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constraints::{LinearConstraint, ProbabilisticConstraint};
use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::stats::quadrature::{adaptive_quadrature_panels, QuadratureConfig};
use crate::stats::random::{dirichlet_into, RngHandle};
use crate::stats::special::{hermite_unchecked, norm_cdf, std_normal_pdf};

/// Below this `t` the integrand is replaced by its limit `½ Σ r_k λ_k`.
const SMALL_T: f64 = 1e-8;

/// Concentration vector of a Dirichlet prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletHyper {
    alpha: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DirichletHyper {
    type Error = Error;
    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        DirichletHyper::new(alpha)
    }
}

impl From<DirichletHyper> for Vec<f64> {
    fn from(h: DirichletHyper) -> Self {
        h.alpha
    }
}

impl DirichletHyper {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Domain("Dirichlet needs at least one component".into()));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Domain(format!(
                "Dirichlet concentration must be positive and finite, got {a}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum();
        self.alpha.iter().map(|a| a / total).collect()
    }
}

/// Distinct nonzero values `λ_k` of `a_j − b` and their pooled degrees of freedom `r_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCoefficients {
    pub lambdas: Vec<f64>,
    pub dofs: Vec<f64>,
}

impl GroupedCoefficients {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lambdas.iter().copied().zip(self.dofs.iter().copied())
    }

    /// `Some(p)` when the probability is fixed by the signs alone: an empty
    /// grouping or a single-signed combination of positive variables.
    fn trivial_probability(&self) -> Option<f64> {
        if self.lambdas.iter().all(|l| *l < 0.0) {
            // includes the empty case: aᵀθ = b surely
            Some(1.0)
        } else if self.lambdas.iter().all(|l| *l > 0.0) {
            Some(0.0)
        } else {
            None
        }
    }
}

/// Groups `a_j − b` by exact value, in order of first appearance. Zero entries are dropped.
pub fn group_coefficients(a: &[f64], b: f64, hyper: &DirichletHyper) -> Result<GroupedCoefficients> {
    check_dim(hyper.dim(), a.len())?;
    let mut lambdas: Vec<f64> = Vec::new();
    let mut dofs: Vec<f64> = Vec::new();
    for (&aj, &alpha) in a.iter().zip(hyper.alpha()) {
        let d = aj - b;
        if d == 0.0 {
            continue;
        }
        match lambdas.iter().position(|l| *l == d) {
            Some(k) => dofs[k] += 2.0 * alpha,
            None => {
                lambdas.push(d);
                dofs.push(2.0 * alpha);
            }
        }
    }
    Ok(GroupedCoefficients { lambdas, dofs })
}

/// First four cumulants of `Σ λ_k T_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantVector {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
}

impl CumulantVector {
    /// κ₃ / κ₂^{3/2}
    pub fn skewness(&self) -> f64 {
        self.kappa3 / self.kappa2.powf(1.5)
    }

    /// κ₄ / κ₂²
    pub fn excess_kurtosis(&self) -> f64 {
        self.kappa4 / (self.kappa2 * self.kappa2)
    }
}

/// κ_m = 2^{m−1}(m−1)! Σ λ_kᵐ r_k for m = 1..4.
pub fn cumulants(g: &GroupedCoefficients) -> Result<CumulantVector> {
    if g.is_empty() {
        return Err(Error::Degenerate("no nonzero coefficients: aᵀθ = b surely".into()));
    }
    let mut k = CumulantVector {
        kappa1: 0.0,
        kappa2: 0.0,
        kappa3: 0.0,
        kappa4: 0.0,
    };
    for (l, r) in g.iter() {
        let l2 = l * l;
        k.kappa1 += l * r;
        k.kappa2 += 2.0 * l2 * r;
        k.kappa3 += 8.0 * l2 * l * r;
        k.kappa4 += 48.0 * l2 * l2 * r;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeworthOrder {
    /// Skewness correction only.
    One,
    /// Skewness, kurtosis and squared-skewness corrections.
    Two,
}

/// How `P(aᵀθ ≤ b)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityMethod {
    Edgeworth1,
    #[default]
    Edgeworth2,
    Exact,
}

impl std::str::FromStr for ProbabilityMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edgeworth1" => Ok(Self::Edgeworth1),
            "edgeworth2" => Ok(Self::Edgeworth2),
            "exact" => Ok(Self::Exact),
            other => Err(Error::Config(format!("unknown probability method '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProbabilityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Edgeworth1 => "edgeworth1",
            Self::Edgeworth2 => "edgeworth2",
            Self::Exact => "exact",
        })
    }
}

fn grouped(hyper: &DirichletHyper, c: &LinearConstraint) -> Result<GroupedCoefficients> {
    group_coefficients(c.a(), c.b(), hyper)
}

/// Edgeworth approximation of `P(aᵀθ ≤ b)`, clamped to `[0, 1]`.
///
/// With `s = −κ₁/√κ₂`, skewness `γ₁` and excess kurtosis `γ₂`:
/// order one gives `Φ(s) − φ(s)·γ₁/6·He₂(s)`, order two further subtracts
/// `φ(s)·[γ₂/24·He₃(s) + γ₁²/72·He₅(s)]`.
pub fn prob_leq_edgeworth(
    hyper: &DirichletHyper,
    c: &LinearConstraint,
    order: EdgeworthOrder,
) -> Result<f64> {
    let g = grouped(hyper, c)?;
    if let Some(p) = g.trivial_probability() {
        return Ok(p);
    }
    let k = cumulants(&g)?;
    if !(k.kappa2 > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(edgeworth_cdf(&k, order).clamp(0.0, 1.0))
}

/// Unclamped Edgeworth CDF of `Σ λ_k T_k` evaluated at zero.
pub fn edgeworth_cdf(k: &CumulantVector, order: EdgeworthOrder) -> f64 {
    let s = -k.kappa1 / k.kappa2.sqrt();
    let g1 = k.skewness();
    let pdf = std_normal_pdf(s);
    let mut p = norm_cdf(s) - pdf * g1 / 6.0 * hermite_unchecked(2, s);
    if order == EdgeworthOrder::Two {
        let g2 = k.excess_kurtosis();
        p -= pdf * (g2 / 24.0 * hermite_unchecked(3, s) + g1 * g1 / 72.0 * hermite_unchecked(5, s));
    }
    p
}

/// `sin(½ Σ r_k atan(λ_k t)) / (t Π (1 + λ_k² t²)^{r_k/4})`
fn inversion_integrand(g: &GroupedCoefficients, t: f64) -> f64 {
    if t < SMALL_T {
        return 0.5 * g.iter().map(|(l, r)| r * l).sum::<f64>();
    }
    let mut phase = 0.0;
    let mut log_rho = 0.0;
    for (l, r) in g.iter() {
        let lt = l * t;
        phase += r * lt.atan();
        log_rho += 0.25 * r * (lt * lt).ln_1p();
    }
    (0.5 * phase).sin() / t * (-log_rho).exp()
}

/// `∫_T^∞ t^{−1−R/2} Π|λ_k|^{−r_k/2} dt`, which dominates the integrand's tail.
fn log_tail_bound(g: &GroupedCoefficients, t: f64) -> f64 {
    let half_r: f64 = g.dofs.iter().sum::<f64>() / 2.0;
    let log_scale: f64 = g.iter().map(|(l, r)| 0.5 * r * l.abs().ln()).sum();
    (1.0 / half_r).ln() - half_r * t.ln() - log_scale
}

/// Exact `P(aᵀθ ≤ b)` by numerical inversion of the characteristic function:
/// `½ − (1/π) ∫₀^∞ sin(½ Σ r_k atan(λ_k t)) / (t Π (1+λ_k²t²)^{r_k/4}) dt`.
///
/// The upper limit is the smallest `T` whose closed-form tail bound is below a
/// tenth of the tolerance, capped at `cfg.truncation_t`. The range is split into
/// geometrically growing panels before adaptive refinement.
pub fn prob_leq_exact(
    hyper: &DirichletHyper,
    c: &LinearConstraint,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    cfg.validate()?;
    let g = grouped(hyper, c)?;
    if let Some(p) = g.trivial_probability() {
        return Ok(p);
    }
    // errors below are on the integral, which is scaled by 1/π
    let integral_tol = PI * cfg.abs_tol;
    let half_r: f64 = g.dofs.iter().sum::<f64>() / 2.0;
    let log_scale: f64 = g.iter().map(|(l, r)| 0.5 * r * l.abs().ln()).sum();
    let log_t = ((1.0 / half_r).ln() - log_scale - (0.1 * integral_tol).ln()) / half_r;
    let upper = log_t.exp().min(cfg.truncation_t);
    let tail = log_tail_bound(&g, upper).exp();

    let max_lambda = g.lambdas.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let mut breakpoints = vec![0.0];
    let mut edge = 0.25 / max_lambda;
    while edge < upper {
        breakpoints.push(edge);
        edge *= 2.0;
    }
    breakpoints.push(upper);

    let quad_cfg = QuadratureConfig {
        abs_tol: (integral_tol - tail).max(0.5 * integral_tol),
        ..*cfg
    };
    let q = adaptive_quadrature_panels(|t| inversion_integrand(&g, t), &breakpoints, &quad_cfg)?;
    let total_error = q.abs_error + tail;
    if !q.converged || total_error > integral_tol {
        return Err(Error::QuadratureFailed {
            estimated_error: total_error / PI,
            subdivisions: q.subdivisions,
        });
    }
    Ok((0.5 - q.value / PI).clamp(0.0, 1.0))
}

/// Monte Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    pub(crate) fn from_hits(hits: usize, samples: usize) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            estimate: p,
            std_err: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }
}

/// Fraction of `n_samples` Dirichlet draws satisfying `aᵀθ ≤ b`.
pub fn prob_leq_montecarlo(
    hyper: &DirichletHyper,
    c: &LinearConstraint,
    n_samples: usize,
    rng: &mut RngHandle,
) -> Result<McEstimate> {
    check_dim(hyper.dim(), c.dim())?;
    if n_samples == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one sample".into()));
    }
    let mut theta = Vec::with_capacity(hyper.dim());
    let mut hits = 0;
    for _ in 0..n_samples {
        dirichlet_into(hyper.alpha(), rng, &mut theta);
        if dot(c.a(), &theta) <= c.b() {
            hits += 1;
        }
    }
    Ok(McEstimate::from_hits(hits, n_samples))
}

/// `P(aᵀθ ≤ b)` by the selected deterministic evaluator.
pub fn prob_leq(
    hyper: &DirichletHyper,
    c: &LinearConstraint,
    method: ProbabilityMethod,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    match method {
        ProbabilityMethod::Edgeworth1 => prob_leq_edgeworth(hyper, c, EdgeworthOrder::One),
        ProbabilityMethod::Edgeworth2 => prob_leq_edgeworth(hyper, c, EdgeworthOrder::Two),
        ProbabilityMethod::Exact => prob_leq_exact(hyper, c, cfg),
    }
}

/// `P(aᵀθ ≤ b) − η`; nonnegative exactly when `α` lies in the feasible set.
pub fn feasibility_margin(
    hyper: &DirichletHyper,
    pc: &ProbabilisticConstraint,
    method: ProbabilityMethod,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    Ok(prob_leq(hyper, pc.linear(), method, cfg)? - pc.eta())
}

/// Whether `α` belongs to `{α : P(aᵀθ ≤ b | α) ≥ η}`.
pub fn in_feasible_set(
    hyper: &DirichletHyper,
    pc: &ProbabilisticConstraint,
    method: ProbabilityMethod,
) -> Result<bool> {
    Ok(feasibility_margin(hyper, pc, method, &QuadratureConfig::default())? >= 0.0)
}
