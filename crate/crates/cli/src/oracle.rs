use clap::Args;
use serde_json::json;

use probcon::dirichlet::{prob_leq_edgeworth, prob_leq_exact, prob_leq_montecarlo, EdgeworthOrder};
use probcon::gaussian;
use probcon::stats::sample_dirichlet;
use probcon::{DirichletHyper, GaussianHyper, LinearConstraint, QuadratureConfig, RngHandle};

use crate::io::emit_json;
use crate::Globals;

#[derive(Debug, Args)]
pub(crate) struct OracleArgs {
    /// Random instances per prior family.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    /// Monte Carlo draws per instance.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

/// A Dirichlet instance with `b` placed inside the range of `aᵀθ` so that the
/// probability is not trivially 0 or 1.
fn dirichlet_instance(rng: &mut RngHandle) -> (DirichletHyper, LinearConstraint) {
    let n = 2 + rng.index(5);
    let alpha: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.5, 10.0)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let hyper = DirichletHyper::new(alpha).expect("positive concentrations");
    let theta = sample_dirichlet(hyper.alpha(), rng).expect("valid alpha");
    let b = a.iter().zip(&theta).map(|(x, t)| x * t).sum();
    (hyper, LinearConstraint::new(a, b).expect("nonzero row"))
}

fn gaussian_instance(rng: &mut RngHandle) -> (GaussianHyper, LinearConstraint) {
    let n = 1 + rng.index(4);
    let mu: Vec<f64> = (0..n).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
    let var: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.2, 3.0)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let b = rng.uniform_range(-2.0, 2.0);
    let hyper = GaussianHyper::diagonal(mu.into(), var.into()).expect("positive variances");
    (hyper, LinearConstraint::new(a, b).expect("nonzero row"))
}

pub(crate) fn run(args: OracleArgs, g: &Globals) -> anyhow::Result<()> {
    let root = RngHandle::new(g.seed.unwrap_or(0));
    let cfg = QuadratureConfig::default();

    let mut gen = root.derive(1);
    let mut mc_rng = root.derive(2);
    let (mut mc_agree, mut ew_agree, mut max_ew) = (0usize, 0usize, 0.0_f64);
    for _ in 0..args.instances {
        let (h, c) = dirichlet_instance(&mut gen);
        let exact = prob_leq_exact(&h, &c, &cfg)?;
        let mc = prob_leq_montecarlo(&h, &c, args.samples, &mut mc_rng)?;
        let ew = prob_leq_edgeworth(&h, &c, EdgeworthOrder::Two)?;
        mc_agree += usize::from((exact - mc.estimate).abs() <= 3.0 * mc.std_err.max(1.0 / args.samples as f64));
        ew_agree += usize::from((ew - exact).abs() <= 0.02);
        max_ew = max_ew.max((ew - exact).abs());
    }

    let mut gen = root.derive(3);
    let mut mc_rng = root.derive(4);
    let mut g_agree = 0usize;
    for _ in 0..args.instances {
        let (h, c) = gaussian_instance(&mut gen);
        let exact = gaussian::prob_leq(&h, &c)?;
        let mc = gaussian::prob_leq_montecarlo(&h, &c, args.samples, &mut mc_rng)?;
        g_agree += usize::from((exact - mc.estimate).abs() <= 3.0 * mc.std_err.max(1.0 / args.samples as f64));
    }

    let k = args.instances as f64;
    let report = json!({
        "instances": args.instances,
        "samples": args.samples,
        "dirichlet": {
            "exact_vs_mc_within_3se": mc_agree as f64 / k,
            "edgeworth2_vs_exact_within_0.02": ew_agree as f64 / k,
            "edgeworth2_max_abs_diff": max_ew,
        },
        "gaussian": {
            "closed_form_vs_mc_within_3se": g_agree as f64 / k,
        },
    });
    emit_json(g.out.as_deref(), &report)
}
