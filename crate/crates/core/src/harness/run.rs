//! Cell execution: data generation, fitting and metric rows.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::spec::{EstimatorKind, ExperimentSpec, Family, Metric, Scenario, Selection};
use crate::bregman::WishartHyperprior;
use crate::constraints::{ConstraintSet, LinearConstraint};
use crate::error::{Error, Result};
use crate::estimators::{
    constrained_mle_gaussian_means, eb_dirichlet_multinomial, map_dirichlet_multinomial, map_gaussian_means,
    mle_gaussian_means, mle_multinomial, select_map_regression, select_map_regression_scored, select_ridge,
    select_ridge_scored, GaussianMeansData,
    MultinomialData, RegressionData,
};
use crate::estimators::constrained_mle_multinomial;
use crate::stats::{sample_categorical, RngHandle};

pub const CSV_HEADER: &str = "family,estimator,scenario,train_size,replicate,metric,value,seed";

/// Metric name used for a failed fit; the value is the failure's exit code.
pub const ERROR_METRIC: &str = "error";

/// Floor on predicted probabilities inside the test log-likelihood.
const PROB_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub family: Family,
    pub estimator: &'static str,
    pub scenario: Scenario,
    pub train_size: usize,
    pub replicate: usize,
    pub metric: &'static str,
    pub value: f64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.family.name(),
            self.estimator,
            self.scenario.name(),
            self.train_size,
            self.replicate,
            self.metric,
            format_g10(self.value),
            self.seed
        )
    }
}

/// `printf("%.10g")`.
pub fn format_g10(v: f64) -> String {
    const P: i32 = 10;
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= P {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        trim(&format!("{:.*}", (P - 1 - exp) as usize, v))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of one (train size, replicate) cell. Estimators and scenarios share it.
pub fn cell_seed(seed: u64, family: Family, train_size: usize, replicate: usize) -> u64 {
    let mut key = family.name().as_bytes().to_vec();
    key.push(0);
    key.extend_from_slice(&(train_size as u64).to_le_bytes());
    key.extend_from_slice(&(replicate as u64).to_le_bytes());
    seed ^ fnv1a(&key)
}

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

enum Dataset {
    Multinomial { train: MultinomialData, test: Vec<usize> },
    Gaussian { train: GaussianMeansData, test: Vec<Vec<f64>> },
    Regression { train: RegressionData, test: RegressionData },
}

fn draw_regression(beta: &[f64], rows: usize, rng: &mut RngHandle) -> Result<RegressionData> {
    let n = beta.len();
    let x = DMatrix::from_fn(rows, n, |_, _| rng.standard_normal());
    let y = &x * DVector::from_column_slice(beta) + DVector::from_fn(rows, |_, _| rng.standard_normal());
    RegressionData::new(x, y, 1.0)
}

fn draw(spec: &ExperimentSpec, truth: &[f64], train_size: usize, seed: u64) -> Result<Dataset> {
    let root = RngHandle::new(seed);
    let mut train_rng = root.derive(TRAIN_STREAM);
    let mut test_rng = root.derive(TEST_STREAM);
    let n = truth.len();
    Ok(match spec.family {
        Family::Multinomial => {
            let sample = |m: usize, rng: &mut RngHandle| (0..m).map(|_| sample_categorical(truth, rng)).collect::<Vec<_>>();
            Dataset::Multinomial {
                train: MultinomialData::from_draws(&sample(train_size, &mut train_rng), n)?,
                test: sample(spec.test_size, &mut test_rng),
            }
        }
        Family::GaussianMeans => {
            let sample = |m: usize, rng: &mut RngHandle| {
                truth
                    .iter()
                    .map(|t| (0..m).map(|_| t + rng.standard_normal()).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            };
            Dataset::Gaussian {
                train: GaussianMeansData::new(sample(train_size, &mut train_rng))?,
                test: sample(spec.test_size, &mut test_rng),
            }
        }
        Family::Regression => Dataset::Regression {
            train: draw_regression(truth, train_size, &mut train_rng)?,
            test: draw_regression(truth, spec.test_size, &mut test_rng)?,
        },
    })
}

fn fit(spec: &ExperimentSpec, data: &Dataset, kind: EstimatorKind, hard: &[LinearConstraint]) -> Result<Vec<f64>> {
    let soft = || ConstraintSet::with_confidence(hard.to_vec(), spec.eta);
    match (data, kind) {
        (Dataset::Multinomial { train, .. }, EstimatorKind::Mle) => mle_multinomial(train),
        (Dataset::Multinomial { train, .. }, EstimatorKind::Hard) => constrained_mle_multinomial(train, hard),
        (Dataset::Multinomial { train, .. }, EstimatorKind::Map) => {
            Ok(map_dirichlet_multinomial(train, &soft()?, &spec.dirichlet)?.theta)
        }
        (Dataset::Multinomial { train, .. }, EstimatorKind::Eb) => {
            Ok(eb_dirichlet_multinomial(std::slice::from_ref(train), &soft()?, &spec.dirichlet)?.theta)
        }
        (Dataset::Gaussian { train, .. }, EstimatorKind::Mle) => Ok(mle_gaussian_means(train)),
        (Dataset::Gaussian { train, .. }, EstimatorKind::Hard) => constrained_mle_gaussian_means(train, hard),
        (Dataset::Gaussian { train, .. }, EstimatorKind::Map) => {
            let prior = WishartHyperprior::scaled_identity(spec.gaussian_tau, train.dim())?;
            Ok(map_gaussian_means(train, &soft()?, &prior, &spec.gaussian_map)?.theta)
        }
        (Dataset::Regression { train, test }, EstimatorKind::Mle | EstimatorKind::Hard) => {
            let hard = (kind == EstimatorKind::Hard).then_some(hard);
            Ok(match spec.selection {
                Selection::Test => select_ridge_scored(train, test, &spec.grids, hard)?.1,
                Selection::Holdout => select_ridge(train, &spec.grids, hard)?.1,
            })
        }
        (Dataset::Regression { train, test }, EstimatorKind::Map) => {
            let cs = soft()?;
            Ok(match spec.selection {
                Selection::Test => select_map_regression_scored(train, test, &cs, &spec.grids, &spec.gaussian_map)?,
                Selection::Holdout => select_map_regression(train, &cs, &spec.grids, &spec.gaussian_map)?,
            }
            .result
            .theta)
        }
        (_, EstimatorKind::Eb) => Err(Error::Unsupported("eb is only defined for the multinomial family".into())),
    }
}

fn metric(data: &Dataset, m: Metric, truth: &[f64], theta: &[f64]) -> f64 {
    match (m, data) {
        (Metric::L2Error, _) => truth.iter().zip(theta).map(|(t, e)| (t - e) * (t - e)).sum::<f64>().sqrt(),
        (Metric::TestNll, Dataset::Multinomial { test, .. }) => {
            -test.iter().map(|&k| theta[k].max(PROB_FLOOR).ln()).sum::<f64>() / test.len() as f64
        }
        (Metric::TestNll, Dataset::Gaussian { test, .. }) => {
            let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
            let (mut total, mut count) = (0.0, 0usize);
            for (group, mean) in test.iter().zip(theta) {
                for x in group {
                    total += half_ln_2pi + 0.5 * (x - mean) * (x - mean);
                    count += 1;
                }
            }
            total / count as f64
        }
        (Metric::TestMse, Dataset::Regression { test, .. }) => test.mse(theta),
        (Metric::TestAccuracy, Dataset::Regression { test, .. }) => {
            let pred = test.x() * DVector::from_column_slice(theta);
            let hits = pred.iter().zip(test.y().iter()).filter(|(p, y)| p.round() == y.round()).count();
            hits as f64 / test.y().len() as f64
        }
        _ => unreachable!("metric applicability is checked by validate"),
    }
}

/// Runs every scenario and estimator of one (train size, replicate) cell.
pub fn run_cell(spec: &ExperimentSpec, truth: &[f64], train_size: usize, replicate: usize) -> Result<Vec<MetricsRow>> {
    let seed = cell_seed(spec.seed, spec.family, train_size, replicate);
    let data = draw(spec, truth, train_size, seed)?;
    let metrics: Vec<Metric> = spec.metrics.iter().copied().filter(|m| m.applies_to(spec.family)).collect();
    let mut rows = Vec::new();
    for &scenario in &spec.scenarios {
        let hard = spec.constraints(scenario)?;
        for &kind in &spec.estimators {
            let row = |metric: &'static str, value: f64| MetricsRow {
                family: spec.family,
                estimator: kind.label(spec.family),
                scenario,
                train_size,
                replicate,
                metric,
                value,
                seed,
            };
            match fit(spec, &data, kind, &hard) {
                Ok(theta) => rows.extend(metrics.iter().map(|&m| row(m.name(), metric(&data, m, truth, &theta)))),
                Err(e) => rows.push(row(ERROR_METRIC, e.exit_code() as f64)),
            }
        }
    }
    Ok(rows)
}

/// Runs all cells, in parallel on `jobs` threads when given, returning rows
/// in (train size, replicate, scenario, estimator, metric) spec order.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<MetricsRow>> {
    spec.validate()?;
    let truth = spec.truth();
    let cells: Vec<(usize, usize)> = spec
        .train_sizes
        .iter()
        .flat_map(|&m| (0..spec.n_replicates).map(move |r| (m, r)))
        .collect();
    let work = || -> Result<Vec<MetricsRow>> {
        let per_cell: Vec<Result<Vec<MetricsRow>>> =
            cells.par_iter().map(|&(m, r)| run_cell(spec, &truth, m, r)).collect();
        let mut rows = Vec::new();
        for cell in per_cell {
            rows.extend(cell?);
        }
        Ok(rows)
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    out.flush()
}

/// Mean of `metric` for one estimator, scenario and train size, ignoring error rows.
pub fn mean_metric(rows: &[MetricsRow], estimator: &str, scenario: Scenario, train_size: usize, metric: &str) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.estimator == estimator && r.scenario == scenario && r.train_size == train_size && r.metric == metric)
        .map(|r| r.value)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}
