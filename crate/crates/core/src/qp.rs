//! Dense convex quadratic programming by a primal active-set method.
//!
//! Solves `min ½xᵀHx + fᵀx  s.t.  Gx ≤ h, Ax = e` with `H` positive definite.
//! When no feasible start is supplied, a regularized phase-one problem over
//! `(x, s)` with `Gx − s ≤ h, s ≥ 0` finds one or proves there is none.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PHASE_ONE_MAX_PENALTY: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the inequality rows, zero for inactive rows.
    pub ineq_multipliers: DVector<f64>,
    pub iterations: usize,
}

impl QuadraticProgram {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.ineq_matrix = g;
        self.ineq_rhs = h;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, e: DVector<f64>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = e;
        self
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let ok = self.hessian.nrows() == n
            && self.hessian.ncols() == n
            && self.ineq_matrix.ncols() == n
            && self.ineq_matrix.nrows() == self.ineq_rhs.len()
            && self.eq_matrix.ncols() == n
            && self.eq_matrix.nrows() == self.eq_rhs.len();
        if !ok {
            return Err(Error::Domain("quadratic program blocks have inconsistent shapes".into()));
        }
        Ok(())
    }

    fn feas_tol(&self) -> f64 {
        1e-9 * (1.0 + self.ineq_rhs.amax().max(self.eq_rhs.amax()))
    }

    /// Largest constraint violation at `x`.
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        let ineq = (&self.ineq_matrix * x - &self.ineq_rhs).max().max(0.0);
        let eq = if self.eq_rhs.is_empty() {
            0.0
        } else {
            (&self.eq_matrix * x - &self.eq_rhs).amax()
        };
        if self.ineq_rhs.is_empty() {
            eq
        } else {
            ineq.max(eq)
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    /// Solves the program, starting from `start` when it is feasible.
    pub fn solve(&self, start: Option<&DVector<f64>>) -> Result<QpSolution> {
        self.validate()?;
        let x0 = match start {
            Some(x) if x.len() == self.dim() && self.violation(x) <= self.feas_tol() => x.clone(),
            _ => self.phase_one()?,
        };
        active_set(self, x0)
    }

    fn phase_one(&self) -> Result<DVector<f64>> {
        let n = self.dim();
        let m = self.ineq_rhs.len();
        let x0 = least_norm_solution(&self.eq_matrix, &self.eq_rhs, n)?;
        if m == 0 {
            return Ok(x0);
        }
        let s0 = (&self.ineq_matrix * &x0 - &self.ineq_rhs).max().max(0.0);
        if s0 <= self.feas_tol() {
            return Ok(x0);
        }
        // min ½‖x − x₀‖² + ½s² + ρs  s.t.  Gx − s ≤ h, s ≥ 0, Ax = e;
        // ρ grows until the slack vanishes or exceeds any plausible multiplier
        let h = DMatrix::identity(n + 1, n + 1);
        let mut g = DMatrix::zeros(m + 1, n + 1);
        g.view_mut((0, 0), (m, n)).copy_from(&self.ineq_matrix);
        g.view_mut((0, n), (m, 1)).fill(-1.0);
        g[(m, n)] = -1.0;
        let mut hv = DVector::zeros(m + 1);
        hv.rows_mut(0, m).copy_from(&self.ineq_rhs);
        let mut a = DMatrix::zeros(self.eq_rhs.len(), n + 1);
        a.view_mut((0, 0), (self.eq_rhs.len(), n)).copy_from(&self.eq_matrix);
        let mut y = DVector::zeros(n + 1);
        y.rows_mut(0, n).copy_from(&x0);
        y[n] = s0;
        let mut rho = 1.0;
        let mut residual = s0;
        while rho <= PHASE_ONE_MAX_PENALTY {
            let mut f = DVector::zeros(n + 1);
            f.rows_mut(0, n).copy_from(&(-&x0));
            f[n] = rho;
            let aux = QuadraticProgram::new(h.clone(), f)
                .with_inequalities(g.clone(), hv.clone())
                .with_equalities(a.clone(), self.eq_rhs.clone());
            y = active_set(&aux, y)?.x;
            let x = y.rows(0, n).into_owned();
            residual = self.violation(&x);
            if residual <= self.feas_tol() {
                return Ok(x);
            }
            rho *= 100.0;
        }
        Err(Error::Infeasible(format!(
            "linear constraints have empty intersection (residual {residual:.3e})"
        )))
    }
}

fn least_norm_solution(a: &DMatrix<f64>, e: &DVector<f64>, n: usize) -> Result<DVector<f64>> {
    if e.is_empty() {
        return Ok(DVector::zeros(n));
    }
    // x = Aᵀ(AAᵀ)⁻¹e
    let aat = a * a.transpose();
    let w = aat
        .lu()
        .solve(e)
        .ok_or_else(|| Error::Rank("equality constraints are linearly dependent".into()))?;
    Ok(a.transpose() * w)
}

fn active_set(qp: &QuadraticProgram, mut x: DVector<f64>) -> Result<QpSolution> {
    let n = qp.dim();
    let m = qp.ineq_rhs.len();
    let p_eq = qp.eq_rhs.len();
    let mut working: Vec<usize> = (0..m)
        .filter(|&i| qp.ineq_rhs[i] - qp.ineq_matrix.row(i).dot(&x.transpose()) <= 0.0)
        .collect();
    // keep the initial working set linearly independent
    working = independent_subset(qp, &working);
    let max_iter = 50 * (n + m + 1);
    let scale = 1.0 + qp.hessian.amax();
    let bland_after = 5 * (n + m + 1);
    for iter in 0..max_iter {
        let k = p_eq + working.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
        for r in 0..p_eq {
            for c in 0..n {
                kkt[(n + r, c)] = qp.eq_matrix[(r, c)];
                kkt[(c, n + r)] = qp.eq_matrix[(r, c)];
            }
        }
        for (w, &i) in working.iter().enumerate() {
            for c in 0..n {
                kkt[(n + p_eq + w, c)] = qp.ineq_matrix[(i, c)];
                kkt[(c, n + p_eq + w)] = qp.ineq_matrix[(i, c)];
            }
        }
        let grad = &qp.hessian * &x + &qp.linear;
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&grad));
        let lu = kkt.clone().full_piv_lu();
        let singular = || Error::Decomposition("singular KKT system in active-set QP".into());
        let mut sol = lu.solve(&rhs).ok_or_else(singular)?;
        // one round of iterative refinement
        let resid = &rhs - &kkt * &sol;
        sol += lu.solve(&resid).ok_or_else(singular)?;
        let step = sol.rows(0, n).into_owned();

        if step.amax() <= 1e-13 * (1.0 + x.amax()) * scale.max(1.0).sqrt() {
            let lambdas = sol.rows(n + p_eq, working.len());
            let (worst, min_lambda) = lambdas
                .iter()
                .enumerate()
                .fold((usize::MAX, 0.0), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
            if worst == usize::MAX || min_lambda >= -1e-12 * (1.0 + grad.amax()) {
                let mut mult = DVector::zeros(m);
                for (w, &i) in working.iter().enumerate() {
                    mult[i] = lambdas[w].max(0.0);
                }
                return Ok(QpSolution {
                    x,
                    ineq_multipliers: mult,
                    iterations: iter,
                });
            }
            // past the cycling threshold switch to Bland's rule: drop the
            // lowest-index row with a negative multiplier
            let drop = if iter >= bland_after {
                let tol = -1e-12 * (1.0 + grad.amax());
                (0..working.len())
                    .filter(|&w| lambdas[w] < tol)
                    .min_by_key(|&w| working[w])
                    .unwrap_or(worst)
            } else {
                worst
            };
            working.remove(drop);
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..m {
            if working.contains(&i) || depends_on_working(qp, &working, i) {
                continue;
            }
            let row = qp.ineq_matrix.row(i);
            let ap = row.dot(&step.transpose());
            if ap > 1e-14 * row.amax().max(1e-300) * step.amax() {
                let slack = (qp.ineq_rhs[i] - row.dot(&x.transpose())).max(0.0);
                let t = slack / ap;
                if t < alpha {
                    alpha = t;
                    blocking = Some(i);
                }
            }
        }
        x += &step * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(Error::NotConverged(format!(
        "active-set QP exceeded {max_iter} iterations"
    )))
}

/// Whether row `i` of `G` lies in the span of the working and equality rows.
/// Such a row cannot block a step in exact arithmetic; adding it would make
/// the KKT matrix singular.
fn depends_on_working(qp: &QuadraticProgram, working: &[usize], i: usize) -> bool {
    if working.len() + qp.eq_rhs.len() == 0 {
        return false;
    }
    let mut rows = working.to_vec();
    rows.push(i);
    independent_subset(qp, &rows).len() < rows.len()
}

/// Greedy maximal subset of `rows` whose constraint normals, together with
/// the equality rows, are linearly independent.
fn independent_subset(qp: &QuadraticProgram, rows: &[usize]) -> Vec<usize> {
    let n = qp.dim();
    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let push = |v: DVector<f64>, basis: &mut Vec<DVector<f64>>| -> bool {
        let mut r = v.clone();
        for b in basis.iter() {
            let c = r.dot(b);
            r -= b * c;
        }
        let norm = r.norm();
        if norm > 1e-10 * v.norm().max(1e-300) {
            basis.push(r / norm);
            true
        } else {
            false
        }
    };
    for r in 0..qp.eq_rhs.len() {
        push(qp.eq_matrix.row(r).transpose(), &mut basis);
    }
    for &i in rows {
        if basis.len() >= n {
            break;
        }
        if push(qp.ineq_matrix.row(i).transpose(), &mut basis) {
            kept.push(i);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RngHandle;
    use proptest::prelude::*;

    #[test]
    fn unconstrained_minimum() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = DVector::from_column_slice(&[-1.0, 1.0]);
        let sol = QuadraticProgram::new(h.clone(), f.clone()).solve(None).unwrap();
        let want = h.lu().solve(&(-f)).unwrap();
        assert!((sol.x - want).amax() < 1e-12);
    }

    #[test]
    fn projection_onto_simplex_face() {
        // closest point to (0.9, 0.9, -0.5) on {x ≥ 0, Σx = 1}
        let n = 3;
        let target = DVector::from_column_slice(&[0.9, 0.9, -0.5]);
        let qp = QuadraticProgram::new(DMatrix::identity(n, n), -&target)
            .with_inequalities(-DMatrix::identity(n, n), DVector::zeros(n))
            .with_equalities(DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0));
        let sol = qp.solve(None).unwrap();
        assert!((sol.x - DVector::from_column_slice(&[0.5, 0.5, 0.0])).amax() < 1e-12);
        assert!(sol.ineq_multipliers[2] > 0.0);
    }

    #[test]
    fn detects_infeasibility() {
        let g = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let h = DVector::from_column_slice(&[0.0, -1.0]);
        let qp = QuadraticProgram::new(DMatrix::identity(1, 1), DVector::zeros(1)).with_inequalities(g, h);
        assert!(matches!(qp.solve(None), Err(Error::Infeasible(_))));
    }

    #[test]
    fn degenerate_vertex() {
        // three constraints through the same point in the plane
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let h = DVector::from_column_slice(&[0.0, 0.0, 0.0]);
        let qp = QuadraticProgram::new(DMatrix::identity(2, 2), DVector::from_column_slice(&[-1.0, -1.0]))
            .with_inequalities(g, h);
        let sol = qp.solve(Some(&DVector::from_column_slice(&[-1.0, -1.0]))).unwrap();
        assert!(sol.x.amax() < 1e-12);
    }

    #[test]
    fn repeated_and_collinear_rows() {
        // x₁ ≤ 1 four times over (one scaled, one nearly parallel) plus a sum cap
        let g = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 1e-15, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0,
            ],
        );
        let h = DVector::from_column_slice(&[1.0, 1.0, 2.0, 1.0, 1.0, 2.0]);
        let target = DVector::from_column_slice(&[5.0, 0.25, -1.0]);
        let qp = QuadraticProgram::new(DMatrix::identity(3, 3), -&target).with_inequalities(g, h);
        let sol = qp.solve(Some(&DVector::zeros(3))).unwrap();
        assert!((&sol.x - DVector::from_column_slice(&[1.0, 0.25, -1.0])).amax() < 1e-10);
        assert!(kkt_residual(&qp, &sol) < 1e-10);
    }

    /// KKT residual: stationarity, primal feasibility, dual feasibility, complementarity.
    fn kkt_residual(qp: &QuadraticProgram, sol: &QpSolution) -> f64 {
        let grad = &qp.hessian * &sol.x + &qp.linear + qp.ineq_matrix.transpose() * &sol.ineq_multipliers;
        // the equality multipliers are free; remove the component in their row space
        let stat = if qp.eq_rhs.is_empty() {
            grad.amax()
        } else {
            let a = &qp.eq_matrix;
            let w = (a * a.transpose()).lu().solve(&(a * &grad)).unwrap();
            (grad - a.transpose() * w).amax()
        };
        let slack = &qp.ineq_rhs - &qp.ineq_matrix * &sol.x;
        let comp = slack
            .iter()
            .zip(sol.ineq_multipliers.iter())
            .map(|(s, l)| (s * l).abs())
            .fold(0.0, f64::max);
        stat.max(qp.violation(&sol.x)).max(comp)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn random_programs_satisfy_kkt(seed in any::<u64>(), n in 1usize..6, m in 0usize..10, p in 0usize..2) {
            let mut rng = RngHandle::new(seed);
            let b = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
            let h = &b * b.transpose() + DMatrix::identity(n, n);
            let f = DVector::from_fn(n, |_, _| rng.standard_normal() * 3.0);
            let g = DMatrix::from_fn(m, n, |_, _| rng.standard_normal());
            // rhs chosen so that a random interior point exists
            let interior = DVector::from_fn(n, |_, _| rng.standard_normal());
            let hv = &g * &interior + DVector::from_fn(m, |_, _| rng.uniform());
            let p = p.min(n - 1);
            let a = DMatrix::from_fn(p, n, |_, _| rng.standard_normal());
            let e = &a * &interior;
            let qp = QuadraticProgram::new(h, f).with_inequalities(g, hv).with_equalities(a, e);
            let sol = qp.solve(None).unwrap();
            prop_assert!(kkt_residual(&qp, &sol) < 1e-8, "residual {}", kkt_residual(&qp, &sol));
        }
    }
}
