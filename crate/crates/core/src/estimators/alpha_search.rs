//! Feasible sequential-QP ascent over Dirichlet concentrations.
//!
//! The feasible set `{α : P(aᵀθ ≤ b | α) ≥ η}` has no closed form, so each
//! iteration linearizes the constraint margins by central differences,
//! solves a QP for the step inside the hyperprior box, and backtracks until
//! the new point is both feasible and better. Every accepted iterate is
//! feasible, which keeps the objective trace monotone.

use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintSet;
use crate::dirichlet::{feasibility_margin, DirichletHyper, ProbabilityMethod};
use crate::error::{Error, Result};
use crate::qp::QuadraticProgram;
use crate::stats::{QuadratureConfig, RngHandle};

/// Concave-ish objective in `α` with a positive definite curvature model.
pub(crate) trait AlphaObjective {
    fn value(&self, alpha: &[f64]) -> f64;
    fn gradient(&self, alpha: &[f64]) -> DVector<f64>;
    /// Positive definite approximation of the negative Hessian.
    fn curvature(&self, alpha: &[f64]) -> DMatrix<f64>;
}

pub(crate) struct FeasibleRegion<'a> {
    pub constraints: &'a ConstraintSet,
    pub method: ProbabilityMethod,
    pub quadrature: &'a QuadratureConfig,
    pub lo: f64,
    pub hi: f64,
}

/// Linearized margins are kept this far inside the feasible set.
const LINEARIZATION_BUFFER: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

impl FeasibleRegion<'_> {
    pub fn margins(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let hyper = DirichletHyper::new(alpha.to_vec())?;
        self.constraints
            .iter()
            .map(|pc| feasibility_margin(&hyper, pc, self.method, self.quadrature))
            .collect()
    }

    fn is_feasible(&self, alpha: &[f64]) -> Result<bool> {
        Ok(self.margins(alpha)?.iter().all(|m| *m >= 0.0))
    }

    /// Central differences with step `10⁻⁴·(1 + |αᵢ|)`.
    fn jacobian(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        let n = alpha.len();
        let mut jac = DMatrix::zeros(self.constraints.len(), n);
        let mut probe = alpha.to_vec();
        for i in 0..n {
            let h = 1e-4 * (1.0 + alpha[i].abs());
            probe[i] = alpha[i] + h;
            let up = self.margins(&probe)?;
            probe[i] = alpha[i] - h;
            let down = self.margins(&probe)?;
            probe[i] = alpha[i];
            for k in 0..up.len() {
                jac[(k, i)] = (up[k] - down[k]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Deterministic and random candidate points in the box, best objective
    /// first among the feasible ones.
    pub fn probe(&self, objective: &dyn AlphaObjective, n: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
        let mut candidates = Vec::new();
        // push mass away from coordinates with positive constraint weight
        let mut tilt = vec![0.0; n];
        for pc in self.constraints {
            let scale = pc.a().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (t, a) in tilt.iter_mut().zip(pc.a()) {
                *t += a / scale;
            }
        }
        let tilt_scale = tilt.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let (llo, lhi) = (self.lo.ln(), self.hi.ln());
        for s in 0..=8 {
            let level = llo + (lhi - llo) * f64::from(s) / 8.0;
            for kappa in [0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0] {
                let alpha: Vec<f64> = tilt
                    .iter()
                    .map(|t| (level - kappa * t / tilt_scale).exp().clamp(self.lo, self.hi))
                    .collect();
                candidates.push(alpha);
            }
        }
        let mut rng = RngHandle::new(seed);
        for _ in 0..samples {
            candidates.push((0..n).map(|_| rng.uniform_range(llo, lhi).exp()).collect());
        }
        let mut scored: Vec<(f64, Vec<f64>)> = candidates
            .into_iter()
            .map(|a| (objective.value(&a), a))
            .filter(|(v, _)| v.is_finite())
            .collect();
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut best_margin = f64::NEG_INFINITY;
        for (_, alpha) in &scored {
            let margins = self.margins(alpha)?;
            let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= 0.0 {
                return Ok(alpha.clone());
            }
            best_margin = best_margin.max(worst);
        }
        Err(Error::Infeasible(format!(
            "no feasible concentration found among {} probes in [{}, {}]^{n}; best worst-case margin {best_margin:.4}",
            scored.len(),
            self.lo,
            self.hi
        )))
    }
}

pub(crate) struct AscentOutcome {
    pub alpha: Vec<f64>,
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Ascends `objective` from the feasible point `start`.
pub(crate) fn ascend(
    objective: &dyn AlphaObjective,
    region: &FeasibleRegion<'_>,
    start: Vec<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<AscentOutcome> {
    let n = start.len();
    let mut alpha = start;
    let mut value = objective.value(&alpha);
    let mut trace = vec![value];
    let mut converged = false;
    for _ in 0..max_iter {
        let grad = objective.gradient(&alpha);
        let curv = objective.curvature(&alpha);
        let a = DVector::from_column_slice(&alpha);

        let l = region.constraints.len();
        let mut g = DMatrix::zeros(l + 2 * n, n);
        let mut h = DVector::zeros(l + 2 * n);
        if l > 0 {
            let margins = region.margins(&alpha)?;
            let jac = region.jacobian(&alpha)?;
            for k in 0..l {
                // m + ∇m·(y − α) ≥ min(buffer, m/2)
                let row = jac.row(k);
                g.row_mut(k).copy_from(&(-row));
                h[k] = margins[k] - LINEARIZATION_BUFFER.min(0.5 * margins[k]) - row.dot(&a.transpose());
            }
        }
        for i in 0..n {
            g[(l + i, i)] = 1.0;
            h[l + i] = region.hi;
            g[(l + n + i, i)] = -1.0;
            h[l + n + i] = -region.lo;
        }
        let qp = QuadraticProgram::new(curv.clone(), -&grad - &curv * &a).with_inequalities(g, h);
        let y = qp.solve(Some(&a))?.x;
        let d = &y - &a;
        let predicted = grad.dot(&d);
        if predicted <= tol * (1.0 + value.abs()) {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand: Vec<f64> = (&a + &d * t).iter().map(|v| v.clamp(region.lo, region.hi)).collect();
            let v = objective.value(&cand);
            if v >= value + 1e-4 * t * predicted && region.is_feasible(&cand)? {
                accepted = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, v)) => {
                let gain = v - value;
                alpha = cand;
                value = v;
                trace.push(value);
                if gain <= tol * (1.0 + value.abs()) {
                    converged = true;
                    break;
                }
            }
            // no feasible improving step along the model direction
            None => {
                converged = true;
                break;
            }
        }
    }
    Ok(AscentOutcome { alpha, trace, converged })
}
