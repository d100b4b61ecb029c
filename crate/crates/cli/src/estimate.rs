use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Value};

use probcon::bregman::WishartHyperprior;
use probcon::estimators::{
    constrained_mle_gaussian_means, constrained_mle_multinomial, constrained_ridge, eb_dirichlet_multinomial,
    map_dirichlet_multinomial, map_gaussian_means, map_regression, mle_gaussian_means, mle_multinomial,
    ridge_regression, select_map_regression, select_ridge, CovarianceMode, DirichletFitConfig, EstimationResult,
    GaussianMapConfig, GaussianMeansData, MultinomialData, RegressionData, RegressionGrids,
};
use probcon::{ConstraintSet, Error, LinearConstraint};

use crate::io::{emit_json, read_json};
use crate::Globals;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Multinomial,
    GaussianMeans,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimator {
    /// Unconstrained maximum likelihood (ridge for regression).
    Mle,
    /// Maximum likelihood with the constraints imposed exactly.
    Hard,
    Map,
    /// Empirical Bayes (multinomial only).
    Eb,
}

#[derive(Debug, Args)]
pub(crate) struct EstimateArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long, value_enum)]
    estimator: Estimator,
    /// Data JSON: {"counts": [...]} or {"replicates": [[...]]} for multinomial,
    /// {"groups": [[...]]} for gaussian-means, {"x": [[...]], "y": [...]} for regression.
    #[arg(long)]
    data: PathBuf,
    /// Constraint JSON: a list of {"a": [...], "b": ..., "eta": ...}.
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Prior scale τ of Λ = τI (gaussian-means, regression MAP).
    #[arg(long)]
    tau: Option<f64>,
    /// Noise variance for regression MAP; with --tau skips grid selection.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Ridge penalty; held-out selection over the default grid when absent.
    #[arg(long)]
    ridge: Option<f64>,
    /// Prior covariance structure for Gaussian MAP.
    #[arg(long, default_value = "diagonal")]
    covariance: CovarianceMode,
    /// Box for the Dirichlet concentrations.
    #[arg(long)]
    alpha_lo: Option<f64>,
    #[arg(long)]
    alpha_hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataFile {
    counts: Option<MultinomialData>,
    replicates: Option<Vec<MultinomialData>>,
    groups: Option<GaussianMeansData>,
    x: Option<Vec<Vec<f64>>>,
    y: Option<Vec<f64>>,
}

fn need<T>(v: Option<T>, what: &str) -> anyhow::Result<T> {
    v.ok_or_else(|| Error::Config(format!("data file has no \"{what}\" field")).into())
}

fn regression_data(x: Vec<Vec<f64>>, y: Vec<f64>) -> anyhow::Result<RegressionData> {
    let n = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != n) {
        return Err(Error::Config("rows of \"x\" differ in length".into()).into());
    }
    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    Ok(RegressionData::new(DMatrix::from_row_slice(x.len(), n, &flat), DVector::from_vec(y), 1.0)?)
}

pub(crate) fn run(args: EstimateArgs, g: &Globals) -> anyhow::Result<()> {
    let data: DataFile = read_json(&args.data)?;
    let cs: ConstraintSet = match &args.constraints {
        Some(path) => read_json(path)?,
        None => ConstraintSet::empty(),
    };
    let hard: Vec<LinearConstraint> = cs.linear_parts();
    let mut dcfg = DirichletFitConfig::default();
    if let Some(m) = g.method {
        dcfg.method = m.deterministic("estimate")?;
    }
    if let Some(seed) = g.seed {
        dcfg.seed = seed;
    }
    dcfg.alpha_lo = args.alpha_lo.unwrap_or(dcfg.alpha_lo);
    dcfg.alpha_hi = args.alpha_hi.unwrap_or(dcfg.alpha_hi);
    let gcfg = GaussianMapConfig {
        mode: args.covariance,
        ..GaussianMapConfig::default()
    };
    let tau = args.tau.unwrap_or(0.1);
    let unsupported = || -> anyhow::Error {
        Error::Unsupported("the eb estimator exists only for the multinomial model".into()).into()
    };

    let mut extra = serde_json::Map::new();
    let result: EstimationResult = match args.model {
        Model::Multinomial => match args.estimator {
            Estimator::Eb => {
                let reps = match (data.replicates, data.counts) {
                    (Some(r), _) => r,
                    (None, Some(c)) => vec![c],
                    (None, None) => return need(None, "replicates"),
                };
                eb_dirichlet_multinomial(&reps, &cs, &dcfg)?
            }
            est => {
                let d = need(data.counts, "counts")?;
                match est {
                    Estimator::Mle => EstimationResult::point(mle_multinomial(&d)?),
                    Estimator::Hard => EstimationResult::point(constrained_mle_multinomial(&d, &hard)?),
                    _ => map_dirichlet_multinomial(&d, &cs, &dcfg)?,
                }
            }
        },
        Model::GaussianMeans => {
            let d = need(data.groups, "groups")?;
            match args.estimator {
                Estimator::Mle => EstimationResult::point(mle_gaussian_means(&d)),
                Estimator::Hard => EstimationResult::point(constrained_mle_gaussian_means(&d, &hard)?),
                Estimator::Map => {
                    let prior = WishartHyperprior::scaled_identity(tau, d.dim())?;
                    map_gaussian_means(&d, &cs, &prior, &gcfg)?
                }
                Estimator::Eb => return Err(unsupported()),
            }
        }
        Model::Regression => {
            let d = regression_data(need(data.x, "x")?, need(data.y, "y")?)?;
            let grids = RegressionGrids::default();
            match args.estimator {
                Estimator::Mle | Estimator::Hard => {
                    let h = (args.estimator == Estimator::Hard).then_some(hard.as_slice());
                    let (ridge, theta) = match (args.ridge, h) {
                        (Some(r), Some(h)) => (r, constrained_ridge(&d, r, h)?),
                        (Some(r), None) => (r, ridge_regression(&d, r)?),
                        (None, h) => select_ridge(&d, &grids, h)?,
                    };
                    extra.insert("ridge".into(), json!(ridge));
                    EstimationResult::point(theta)
                }
                Estimator::Map => {
                    let (sigma2, tau, res) = match (args.sigma2, args.tau) {
                        (Some(s2), Some(t)) => {
                            let prior = WishartHyperprior::scaled_identity(t, d.dim())?;
                            (s2, t, map_regression(&d.with_sigma2(s2)?, &cs, &prior, &gcfg)?)
                        }
                        _ => {
                            let sel = select_map_regression(&d, &cs, &grids, &gcfg)?;
                            (sel.sigma2, sel.tau, sel.result)
                        }
                    };
                    extra.insert("sigma2".into(), json!(sigma2));
                    extra.insert("tau".into(), json!(tau));
                    res
                }
                Estimator::Eb => return Err(unsupported()),
            }
        }
    };
    let Value::Object(mut out) = serde_json::to_value(&result)? else {
        unreachable!("an estimation result serializes to an object")
    };
    out.extend(extra);
    emit_json(g.out.as_deref(), &Value::Object(out))
}
