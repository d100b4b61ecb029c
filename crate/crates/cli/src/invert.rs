use clap::{Args, Subcommand};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use probcon::dirichlet::{self, DirichletHyper};
use probcon::gaussian::{self, GaussianRecord};
use probcon::{GaussianHyper, LinearConstraint, ProbabilisticConstraint, QuadratureConfig, RngHandle};

use crate::io::{emit_json, parse_matrix, read_json, Rows};
use crate::{Globals, Method};

#[derive(Debug, Args)]
pub(crate) struct InvertArgs {
    #[command(subcommand)]
    prior: Prior,
}

#[derive(Debug, Subcommand)]
enum Prior {
    /// θ ~ Dir(α)
    Dirichlet(DirichletArgs),
    /// θ ~ N(μ, Σ)
    Gaussian(GaussianArgs),
}

#[derive(Debug, Args)]
struct ConstraintArgs {
    /// Coefficients of aᵀθ ≤ b.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Confidence; adds "margin" and "member" to the output.
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Debug, Args)]
struct DirichletArgs {
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[command(flatten)]
    constraint: ConstraintArgs,
    /// Monte Carlo draws for `--method mc`.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct GaussianArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Option<Vec<f64>>,
    /// Full covariance, rows separated by ';'.
    #[arg(long, value_parser = parse_matrix, allow_hyphen_values = true, conflicts_with = "sigma_diag")]
    sigma: Option<Rows>,
    /// Diagonal covariance.
    #[arg(long, value_delimiter = ',')]
    sigma_diag: Option<Vec<f64>>,
    #[command(flatten)]
    constraint: ConstraintArgs,
    /// Monte Carlo draws for `--method mc`.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

/// Config-file form: the hyperparameter fields plus `a`, `b` and optional `eta`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InvertFile {
    alpha: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
    sigma: Option<Vec<Vec<f64>>>,
    sigma_diag: Option<Vec<f64>>,
    a: Option<Vec<f64>>,
    b: Option<f64>,
    eta: Option<f64>,
}

fn missing(what: &str) -> anyhow::Error {
    probcon::Error::Config(format!("missing {what}; pass it as a flag or in --config")).into()
}

fn resolve_constraint(args: ConstraintArgs, file: &mut InvertFile) -> anyhow::Result<(LinearConstraint, Option<f64>)> {
    let a = args.a.or(file.a.take()).ok_or_else(|| missing("--a"))?;
    let b = args.b.or(file.b).ok_or_else(|| missing("--b"))?;
    Ok((LinearConstraint::new(a, b)?, args.eta.or(file.eta)))
}

pub(crate) fn run(args: InvertArgs, g: &Globals) -> anyhow::Result<()> {
    let mut file: InvertFile = match &g.config {
        Some(path) => read_json(path)?,
        None => InvertFile::default(),
    };
    let method = g.method.unwrap_or(Method::Edgeworth2);
    let mut rng = RngHandle::new(g.seed.unwrap_or(0));
    let mut out = Map::new();
    let (prob, eta, margin) = match args.prior {
        Prior::Dirichlet(d) => {
            let alpha = d.alpha.or(file.alpha.take()).ok_or_else(|| missing("--alpha"))?;
            let hyper = DirichletHyper::new(alpha)?;
            let (c, eta) = resolve_constraint(d.constraint, &mut file)?;
            let prob = if method == Method::Mc {
                let est = dirichlet::prob_leq_montecarlo(&hyper, &c, d.samples, &mut rng)?;
                out.insert("std_err".into(), json!(est.std_err));
                est.estimate
            } else {
                let m = method.deterministic("invert")?;
                dirichlet::prob_leq(&hyper, &c, m, &QuadratureConfig::default())?
            };
            (prob, eta, eta.map(|e| prob - e))
        }
        Prior::Gaussian(gs) => {
            let record = GaussianRecord {
                mu: gs.mu.or(file.mu.take()).ok_or_else(|| missing("--mu"))?,
                sigma: gs.sigma.map(|r| r.0).or(file.sigma.take()),
                sigma_diag: gs.sigma_diag.or(file.sigma_diag.take()),
            };
            let hyper = GaussianHyper::try_from(record)?;
            let (c, eta) = resolve_constraint(gs.constraint, &mut file)?;
            let prob = if method == Method::Mc {
                let est = gaussian::prob_leq_montecarlo(&hyper, &c, gs.samples, &mut rng)?;
                out.insert("std_err".into(), json!(est.std_err));
                est.estimate
            } else {
                gaussian::prob_leq(&hyper, &c)?
            };
            let margin = match eta {
                Some(e) => Some(gaussian::soc_margin(&hyper, &ProbabilisticConstraint::new(c, e)?)?),
                None => None,
            };
            (prob, eta, margin)
        }
    };
    out.insert("prob".into(), json!(prob));
    if let (Some(_), Some(m)) = (eta, margin) {
        out.insert("margin".into(), json!(m));
        out.insert("member".into(), json!(m >= 0.0));
    }
    emit_json(g.out.as_deref(), &Value::Object(out))
}
