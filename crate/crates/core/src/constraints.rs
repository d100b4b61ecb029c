//! Linear parameter constraints `aᵀθ ≤ b` and their probabilistic versions
//! `P(aᵀθ ≤ b) ≥ η`.
//!
//! Half-spaces are closed: zero slack counts as satisfied.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;

/// The half-space `{θ : aᵀθ ≤ b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearRecord")]
pub struct LinearConstraint {
    a: Vec<f64>,
    b: f64,
}

#[derive(Deserialize)]
struct LinearRecord {
    a: Vec<f64>,
    b: f64,
}

impl TryFrom<LinearRecord> for LinearConstraint {
    type Error = Error;
    fn try_from(r: LinearRecord) -> Result<Self> {
        LinearConstraint::new(r.a, r.b)
    }
}

impl LinearConstraint {
    /// An all-zero `a` is accepted; check [`is_degenerate`](Self::is_degenerate)
    /// before using the constraint where a direction is required.
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Domain("constraint needs at least one coefficient".into()));
        }
        if a.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::Domain("constraint coefficients must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// True when every coefficient is zero, so the constraint reads `0 ≤ b`.
    pub fn is_degenerate(&self) -> bool {
        self.a.iter().all(|v| *v == 0.0)
    }

    /// `b − aᵀθ`
    pub fn slack(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.b - dot(&self.a, theta))
    }

    pub fn is_satisfied(&self, theta: &[f64]) -> Result<bool> {
        Ok(self.slack(theta)? >= 0.0)
    }

    /// The same half-space with `(a, b)` multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {factor}")));
        }
        Self::new(self.a.iter().map(|v| v * factor).collect(), self.b * factor)
    }

    /// The reversed half-space `aᵀθ ≥ b`, written as `−aᵀθ ≤ −b`.
    pub fn reversed(&self) -> Self {
        Self {
            a: self.a.iter().map(|v| -v).collect(),
            b: -self.b,
        }
    }

    pub fn with_confidence(self, eta: f64) -> Result<ProbabilisticConstraint> {
        ProbabilisticConstraint::new(self, eta)
    }
}

fn check_index(i: usize, n: usize) -> Result<()> {
    if i < n {
        Ok(())
    } else {
        Err(Error::Domain(format!("index {i} out of range for dimension {n}")))
    }
}

fn unit(i: usize, n: usize, value: f64) -> Vec<f64> {
    let mut a = vec![0.0; n];
    a[i] = value;
    a
}

/// `θ_i ≤ θ_j`, encoded as `(e_i − e_j)ᵀθ ≤ 0`.
pub fn ordering(i: usize, j: usize, n: usize) -> Result<LinearConstraint> {
    check_index(i, n)?;
    check_index(j, n)?;
    if i == j {
        return Err(Error::Domain(format!("ordering needs distinct indices, got {i} twice")));
    }
    let mut a = vec![0.0; n];
    a[i] = 1.0;
    a[j] = -1.0;
    LinearConstraint::new(a, 0.0)
}

/// `θ_{π(1)} ≤ θ_{π(2)} ≤ … ≤ θ_{π(k)}` as `k − 1` adjacent orderings.
pub fn ordering_chain(order: &[usize], n: usize) -> Result<Vec<LinearConstraint>> {
    order.windows(2).map(|w| ordering(w[0], w[1], n)).collect()
}

/// `θ_i ≤ c`
pub fn upper_bound(i: usize, c: f64, n: usize) -> Result<LinearConstraint> {
    check_index(i, n)?;
    LinearConstraint::new(unit(i, n, 1.0), c)
}

/// `θ_i ≥ c`, i.e. `−θ_i ≤ −c`
pub fn lower_bound(i: usize, c: f64, n: usize) -> Result<LinearConstraint> {
    check_index(i, n)?;
    LinearConstraint::new(unit(i, n, -1.0), -c)
}

/// `lo ≤ θ_i ≤ hi` as `[−θ_i ≤ −lo, θ_i ≤ hi]`.
pub fn box_bounds(i: usize, lo: f64, hi: f64, n: usize) -> Result<[LinearConstraint; 2]> {
    if !(lo <= hi) {
        return Err(Error::Domain(format!("box needs lo ≤ hi, got [{lo}, {hi}]")));
    }
    Ok([lower_bound(i, lo, n)?, upper_bound(i, hi, n)?])
}

/// `lo ≤ Σ_{i∈indices} θ_i ≤ hi` as `[−Σθ ≤ −lo, Σθ ≤ hi]`.
pub fn sum_band(lo: f64, hi: f64, indices: &[usize], n: usize) -> Result<[LinearConstraint; 2]> {
    if !(lo <= hi) {
        return Err(Error::Domain(format!("sum band needs lo ≤ hi, got [{lo}, {hi}]")));
    }
    if indices.is_empty() {
        return Err(Error::Domain("sum band needs at least one index".into()));
    }
    let mut a = vec![0.0; n];
    for &i in indices {
        check_index(i, n)?;
        if a[i] != 0.0 {
            return Err(Error::Domain(format!("index {i} repeated in sum band")));
        }
        a[i] = 1.0;
    }
    let neg = a.iter().map(|v| -v).collect();
    Ok([LinearConstraint::new(neg, -lo)?, LinearConstraint::new(a, hi)?])
}

/// `|θ_i − θ_j| ≤ c` as `[θ_i − θ_j ≤ c, θ_j − θ_i ≤ c]`.
pub fn difference_upper(i: usize, j: usize, c: f64, n: usize) -> Result<[LinearConstraint; 2]> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("difference bound must be nonnegative, got {c}")));
    }
    let forward = ordering(i, j, n)?;
    let backward = ordering(j, i, n)?;
    Ok([
        LinearConstraint::new(forward.a, c)?,
        LinearConstraint::new(backward.a, c)?,
    ])
}

/// `lo ≤ |θ_i − θ_j| ≤ hi`.
///
/// A positive lower bound describes a non-convex union of two half-spaces,
/// which no single linear constraint can express; it is rejected.
pub fn difference_band(
    i: usize,
    j: usize,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<[LinearConstraint; 2]> {
    if !(lo <= hi) {
        return Err(Error::Domain(format!("difference band needs lo ≤ hi, got [{lo}, {hi}]")));
    }
    if lo > 0.0 {
        return Err(Error::Unsupported(format!(
            "lower bound {lo} on |θ_{i} − θ_{j}| is non-convex"
        )));
    }
    difference_upper(i, j, hi, n)
}

/// `P(aᵀθ ≤ b) ≥ η` with `0 < η < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstraintRecord", into = "ConstraintRecord")]
pub struct ProbabilisticConstraint {
    linear: LinearConstraint,
    eta: f64,
}

/// Wire form `{a: [...], b: ..., eta: ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub a: Vec<f64>,
    pub b: f64,
    pub eta: f64,
}

impl TryFrom<ConstraintRecord> for ProbabilisticConstraint {
    type Error = Error;
    fn try_from(r: ConstraintRecord) -> Result<Self> {
        ProbabilisticConstraint::new(LinearConstraint::new(r.a, r.b)?, r.eta)
    }
}

impl From<ProbabilisticConstraint> for ConstraintRecord {
    fn from(c: ProbabilisticConstraint) -> Self {
        ConstraintRecord {
            a: c.linear.a,
            b: c.linear.b,
            eta: c.eta,
        }
    }
}

impl ProbabilisticConstraint {
    pub fn new(linear: LinearConstraint, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Domain(format!("confidence must lie in (0,1), got {eta}")));
        }
        Ok(Self { linear, eta })
    }

    pub fn linear(&self) -> &LinearConstraint {
        &self.linear
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn a(&self) -> &[f64] {
        self.linear.a()
    }

    pub fn b(&self) -> f64 {
        self.linear.b()
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }
}

/// An ordered collection of probabilistic constraints over one parameter dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ProbabilisticConstraint>", into = "Vec<ProbabilisticConstraint>")]
pub struct ConstraintSet {
    constraints: Vec<ProbabilisticConstraint>,
}

impl TryFrom<Vec<ProbabilisticConstraint>> for ConstraintSet {
    type Error = Error;
    fn try_from(v: Vec<ProbabilisticConstraint>) -> Result<Self> {
        ConstraintSet::new(v)
    }
}

impl From<ConstraintSet> for Vec<ProbabilisticConstraint> {
    fn from(s: ConstraintSet) -> Self {
        s.constraints
    }
}

impl ConstraintSet {
    pub fn new(constraints: Vec<ProbabilisticConstraint>) -> Result<Self> {
        if let Some(first) = constraints.first() {
            for c in &constraints[1..] {
                check_dim(first.dim(), c.dim())?;
            }
        }
        Ok(Self { constraints })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Pairs every linear constraint with the same confidence.
    pub fn with_confidence(linear: Vec<LinearConstraint>, eta: f64) -> Result<Self> {
        Self::new(
            linear
                .into_iter()
                .map(|c| ProbabilisticConstraint::new(c, eta))
                .collect::<Result<_>>()?,
        )
    }

    /// Common dimension, `None` for the empty set.
    pub fn dim(&self) -> Option<usize> {
        self.constraints.first().map(|c| c.dim())
    }

    /// Errors unless the set is empty or of dimension `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.dim() {
            Some(d) => check_dim(n, d),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ProbabilisticConstraint> {
        self.constraints.iter()
    }

    pub fn as_slice(&self) -> &[ProbabilisticConstraint] {
        &self.constraints
    }

    pub fn linear_parts(&self) -> Vec<LinearConstraint> {
        self.constraints.iter().map(|c| c.linear.clone()).collect()
    }

    /// Whether `θ` lies in every half-space of the set.
    pub fn is_satisfied(&self, theta: &[f64]) -> Result<bool> {
        for c in &self.constraints {
            if !c.linear.is_satisfied(theta)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl<'a> IntoIterator for &'a ConstraintSet {
    type Item = &'a ProbabilisticConstraint;
    type IntoIter = std::slice::Iter<'a, ProbabilisticConstraint>;
    fn into_iter(self) -> Self::IntoIter {
        self.constraints.iter()
    }
}
