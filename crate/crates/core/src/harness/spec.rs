//! Experiment specifications and the three built-in studies.

use serde::{Deserialize, Serialize};

use crate::constraints::{lower_bound, ordering, upper_bound, LinearConstraint};
use crate::error::{Error, Result};
use crate::estimators::{DirichletFitConfig, GaussianMapConfig, RegressionGrids};
use crate::stats::RngHandle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Multinomial,
    GaussianMeans,
    Regression,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Multinomial => "multinomial",
            Family::GaussianMeans => "gaussian_means",
            Family::Regression => "regression",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(Family::Multinomial),
            "gaussian" | "gaussian_means" => Ok(Family::GaussianMeans),
            "regression" => Ok(Family::Regression),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }
}

/// Which constraint set an estimator is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Constraints the true parameter satisfies.
    Correct,
    /// Every constraint reversed.
    Incorrect,
    /// The correct set with a fraction of constraints reversed.
    Noisy,
    /// The spec's `custom_constraints`.
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Correct => "correct",
            Scenario::Incorrect => "incorrect",
            Scenario::Noisy => "noisy",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Maximum likelihood; ridge with held-out penalty for regression.
    Mle,
    /// Maximum likelihood under the constraints taken as certain.
    Hard,
    Map,
    /// Empirical Bayes; multinomial only.
    Eb,
}

impl EstimatorKind {
    pub fn label(self, family: Family) -> &'static str {
        match (self, family) {
            (EstimatorKind::Mle, Family::Regression) => "ridge",
            (EstimatorKind::Hard, Family::Regression) => "hard_ridge",
            (EstimatorKind::Mle, _) => "mle",
            (EstimatorKind::Hard, _) => "hard",
            (EstimatorKind::Map, _) => "map",
            (EstimatorKind::Eb, _) => "eb",
        }
    }
}

/// How regression estimators pick their ridge or prior hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Best grid value on the test split, reported as is (the study's protocol).
    #[default]
    Test,
    /// Best grid value on the last rows of the training split, then a refit.
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `‖θ̂ − θ‖₂`
    L2Error,
    /// Mean negative log-likelihood of the test draws.
    TestNll,
    TestMse,
    /// Fraction of test targets matched after rounding prediction and target.
    TestAccuracy,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L2Error => "l2_error",
            Metric::TestNll => "test_nll",
            Metric::TestMse => "test_mse",
            Metric::TestAccuracy => "test_accuracy",
        }
    }

    pub fn applies_to(self, family: Family) -> bool {
        match self {
            Metric::L2Error => true,
            Metric::TestNll => family != Family::Regression,
            Metric::TestMse | Metric::TestAccuracy => family == Family::Regression,
        }
    }
}

/// A full synthetic study. Serializes to the JSON config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    /// True parameter; drawn from `seed` for regression when empty.
    #[serde(default)]
    pub true_params: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    #[serde(default)]
    pub custom_constraints: Vec<LinearConstraint>,
    /// Fraction of constraints reversed in the noisy scenario.
    #[serde(default = "default_flip_fraction")]
    pub flip_fraction: f64,
    pub eta: f64,
    pub train_sizes: Vec<usize>,
    pub n_replicates: usize,
    /// Test draws per cell (per group for Gaussian means).
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub grids: RegressionGrids,
    #[serde(default)]
    pub selection: Selection,
    /// `Λ = τI` for the Gaussian-means MAP.
    #[serde(default = "default_tau")]
    pub gaussian_tau: f64,
    #[serde(default)]
    pub dirichlet: DirichletFitConfig,
    #[serde(default)]
    pub gaussian_map: GaussianMapConfig,
}

fn default_flip_fraction() -> f64 {
    0.3
}

fn default_test_size() -> usize {
    1000
}

fn default_tau() -> f64 {
    0.1
}

/// Regression dimension of the built-in study.
pub const REGRESSION_DIM: usize = 10;

/// Key mixed into the seed when drawing the regression coefficients.
const BETA_STREAM: u64 = 0xbe7a;

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_replicates == 0 {
            return fail("n_replicates must be at least 1".into());
        }
        if self.train_sizes.is_empty() || self.train_sizes.contains(&0) {
            return fail("train sizes must be positive and nonempty".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail(format!("eta must lie in (0,1), got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.flip_fraction) {
            return fail(format!("flip_fraction must lie in [0,1], got {}", self.flip_fraction));
        }
        if self.test_size == 0 {
            return fail("test_size must be positive".into());
        }
        if self.scenarios.is_empty() || self.estimators.is_empty() || self.metrics.is_empty() {
            return fail("scenarios, estimators and metrics must be nonempty".into());
        }
        if self.estimators.contains(&EstimatorKind::Eb) && self.family != Family::Multinomial {
            return fail("the eb estimator exists only for the multinomial family".into());
        }
        let n = self.dim();
        match self.family {
            Family::Multinomial => {
                if self.true_params.iter().any(|p| *p < 0.0) || (self.true_params.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return fail("multinomial true_params must be a probability vector".into());
                }
            }
            Family::GaussianMeans if self.true_params.is_empty() => {
                return fail("gaussian_means needs true_params".into());
            }
            _ => {}
        }
        if self.scenarios.contains(&Scenario::Custom) {
            if self.custom_constraints.is_empty() {
                return fail("custom scenario needs custom_constraints".into());
            }
            if self.custom_constraints.iter().any(|c| c.dim() != n) {
                return fail(format!("custom constraints must have dimension {n}"));
            }
        }
        if self.scenarios.iter().any(|s| *s != Scenario::Custom) && builtin_sets(self.family, n).is_none() {
            return fail(format!(
                "no built-in correct/incorrect sets for {} with dimension {n}",
                self.family.name()
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match (self.family, self.true_params.len()) {
            (Family::Regression, 0) => REGRESSION_DIM,
            (_, n) => n,
        }
    }

    /// The true parameter, drawing regression coefficients when unspecified.
    pub fn truth(&self) -> Vec<f64> {
        if self.family == Family::Regression && self.true_params.is_empty() {
            draw_regression_beta(&mut RngHandle::new(self.seed).derive(BETA_STREAM))
        } else {
            self.true_params.clone()
        }
    }

    /// The hard constraints given to estimators in `scenario`.
    pub fn constraints(&self, scenario: Scenario) -> Result<Vec<LinearConstraint>> {
        let n = self.dim();
        let builtin = || {
            builtin_sets(self.family, n)
                .ok_or_else(|| Error::Config(format!("no built-in sets for {}", self.family.name())))
        };
        Ok(match scenario {
            Scenario::Custom => self.custom_constraints.clone(),
            Scenario::Correct => builtin()?.0,
            Scenario::Incorrect => builtin()?.1,
            Scenario::Noisy => {
                let mut set = builtin()?.0;
                let flips = (self.flip_fraction * set.len() as f64).round() as usize;
                // a seeded partial shuffle picks which constraints to reverse
                let mut rng = RngHandle::new(self.seed).derive(0xf11b);
                let mut idx: Vec<usize> = (0..set.len()).collect();
                for k in 0..flips {
                    let j = k + rng.index(idx.len() - k);
                    idx.swap(k, j);
                    set[idx[k]] = set[idx[k]].reversed();
                }
                set
            }
        })
    }
}

/// Coordinates 1..5 uniform on (−1, 0), coordinates 6..10 on (0, 1).
pub fn draw_regression_beta(rng: &mut RngHandle) -> Vec<f64> {
    (0..REGRESSION_DIM)
        .map(|i| {
            let u = rng.uniform();
            if i < REGRESSION_DIM / 2 {
                -u
            } else {
                u
            }
        })
        .collect()
}

type SetPair = (Vec<LinearConstraint>, Vec<LinearConstraint>);

fn built(v: Vec<Result<LinearConstraint>>) -> Vec<LinearConstraint> {
    v.into_iter().map(|c| c.expect("indices are in range")).collect()
}

/// Correct and incorrect sets of the built-in studies, by family and dimension.
pub fn builtin_sets(family: Family, n: usize) -> Option<SetPair> {
    match (family, n) {
        (Family::Multinomial, 5) => {
            let pairs: Vec<(usize, usize)> = [0, 1, 2].iter().flat_map(|&i| [(i, 3), (i, 4)]).collect();
            Some((
                built(pairs.iter().map(|&(i, j)| ordering(i, j, 5)).collect()),
                built(pairs.iter().map(|&(i, j)| ordering(j, i, 5)).collect()),
            ))
        }
        (Family::GaussianMeans, 3) => Some((
            built(vec![
                ordering(0, 1, 3),
                ordering(1, 2, 3),
                lower_bound(0, 0.0, 3),
                upper_bound(2, 1.0, 3),
            ]),
            built(vec![ordering(1, 0, 3), ordering(2, 1, 3)]),
        )),
        (Family::Regression, REGRESSION_DIM) => {
            let n = REGRESSION_DIM;
            let mut correct = Vec::new();
            let mut incorrect = Vec::new();
            for i in [0, 2, 4] {
                correct.push(upper_bound(i, 0.0, n));
                incorrect.push(lower_bound(i, 0.0, n));
            }
            for i in [5, 7, 9] {
                correct.push(lower_bound(i, 0.0, n));
                incorrect.push(upper_bound(i, 0.0, n));
            }
            for i in [1, 3] {
                for j in [6, 8] {
                    correct.push(ordering(i, j, n));
                    incorrect.push(ordering(j, i, n));
                }
            }
            Some((built(correct), built(incorrect)))
        }
        _ => None,
    }
}

fn base(family: Family, true_params: Vec<f64>, scenarios: Vec<Scenario>, estimators: Vec<EstimatorKind>) -> ExperimentSpec {
    let metrics = [Metric::L2Error, Metric::TestNll, Metric::TestMse, Metric::TestAccuracy]
        .into_iter()
        .filter(|m| m.applies_to(family))
        .collect();
    ExperimentSpec {
        family,
        true_params,
        scenarios,
        custom_constraints: Vec::new(),
        flip_fraction: default_flip_fraction(),
        eta: 0.95,
        train_sizes: vec![10, 20, 50, 100],
        n_replicates: 20,
        test_size: default_test_size(),
        seed: 0,
        estimators,
        metrics,
        grids: RegressionGrids::default(),
        selection: Selection::default(),
        gaussian_tau: default_tau(),
        dirichlet: DirichletFitConfig::default(),
        gaussian_map: GaussianMapConfig::default(),
    }
}

/// θ = (1/12, 1/6, 1/6, 1/4, 1/3) with `θᵢ ≤ θⱼ` for i ∈ {1,2,3}, j ∈ {4,5} and its reversal.
pub fn builtin_multinomial_spec() -> ExperimentSpec {
    base(
        Family::Multinomial,
        vec![1.0 / 12.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 3.0],
        vec![Scenario::Correct, Scenario::Incorrect],
        vec![EstimatorKind::Mle, EstimatorKind::Hard, EstimatorKind::Map, EstimatorKind::Eb],
    )
}

/// θ = (0, ½, 1), groups drawn from `N(θⱼ, 1)`.
pub fn builtin_gaussian_spec() -> ExperimentSpec {
    base(
        Family::GaussianMeans,
        vec![0.0, 0.5, 1.0],
        vec![Scenario::Correct, Scenario::Incorrect],
        vec![EstimatorKind::Mle, EstimatorKind::Hard, EstimatorKind::Map],
    )
}

/// Ten coefficients drawn from `rng`, standard normal features, unit noise.
pub fn builtin_regression_spec(rng: &mut RngHandle) -> ExperimentSpec {
    let mut spec = base(
        Family::Regression,
        draw_regression_beta(rng),
        vec![Scenario::Correct, Scenario::Incorrect, Scenario::Noisy],
        vec![EstimatorKind::Mle, EstimatorKind::Hard, EstimatorKind::Map],
    );
    spec.train_sizes = vec![20, 50, 100];
    spec
}

/// A built-in spec by family name, reseeded.
pub fn builtin_spec(family: Family, seed: u64) -> ExperimentSpec {
    let mut spec = match family {
        Family::Multinomial => builtin_multinomial_spec(),
        Family::GaussianMeans => builtin_gaussian_spec(),
        Family::Regression => builtin_regression_spec(&mut RngHandle::new(seed).derive(BETA_STREAM)),
    };
    spec.seed = seed;
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_hold(set: &[LinearConstraint], theta: &[f64]) -> bool {
        set.iter().all(|c| c.is_satisfied(theta).unwrap())
    }

    #[test]
    fn multinomial_spec_literals() {
        let s = builtin_multinomial_spec();
        assert_eq!(s.true_params, vec![1.0 / 12.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 3.0]);
        assert!((s.true_params.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(s.eta, 0.95);
        let (a, b) = builtin_sets(Family::Multinomial, 5).unwrap();
        assert_eq!(a.len(), 6);
        assert!(all_hold(&a, &s.true_params));
        assert!(b.iter().all(|c| !c.is_satisfied(&s.true_params).unwrap()));
        s.validate().unwrap();
    }

    #[test]
    fn gaussian_spec_literals() {
        let s = builtin_gaussian_spec();
        assert_eq!(s.true_params, vec![0.0, 0.5, 1.0]);
        let (c, d) = builtin_sets(Family::GaussianMeans, 3).unwrap();
        assert!(all_hold(&c, &s.true_params));
        // θ₁ ≥ 0 and θ₃ ≤ 1 hold with equality
        assert_eq!(c[2].slack(&s.true_params).unwrap(), 0.0);
        assert_eq!(c[3].slack(&s.true_params).unwrap(), 0.0);
        assert!(d.iter().all(|c| !c.is_satisfied(&s.true_params).unwrap()));
        s.validate().unwrap();
    }

    #[test]
    fn regression_spec_draws() {
        for seed in 0..50 {
            let s = builtin_spec(Family::Regression, seed);
            let (e, f) = builtin_sets(Family::Regression, REGRESSION_DIM).unwrap();
            assert!(all_hold(&e, &s.true_params));
            // the six sign constraints of F all fail
            assert!(f[..6].iter().all(|c| !c.is_satisfied(&s.true_params).unwrap()));
            assert_eq!(builtin_spec(Family::Regression, seed).true_params, s.true_params);
            s.validate().unwrap();
        }
        assert_eq!(builtin_sets(Family::Regression, REGRESSION_DIM).unwrap().0.len(), 10);
    }

    #[test]
    fn noisy_scenario_flips_requested_fraction() {
        let s = builtin_spec(Family::Regression, 3);
        let correct = s.constraints(Scenario::Correct).unwrap();
        let noisy = s.constraints(Scenario::Noisy).unwrap();
        let flipped = correct.iter().zip(&noisy).filter(|(a, b)| a != b).count();
        assert_eq!(flipped, 3);
        assert_eq!(noisy, s.constraints(Scenario::Noisy).unwrap());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = builtin_spec(Family::Regression, 9);
        let text = serde_json::to_string(&s).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = builtin_multinomial_spec();
        s.n_replicates = 0;
        assert!(s.validate().is_err());
        let mut s = builtin_gaussian_spec();
        s.estimators.push(EstimatorKind::Eb);
        assert!(s.validate().is_err());
        let mut s = builtin_multinomial_spec();
        s.eta = 1.0;
        assert!(s.validate().is_err());
    }
}
