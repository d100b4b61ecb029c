use clap::Args;

use probcon::harness::{builtin_spec, run_experiment, write_csv, ExperimentSpec, Family};
use probcon::Error;

use crate::io::{emit, read_json};
use crate::Globals;

#[derive(Debug, Args)]
pub(crate) struct ExperimentArgs {
    /// A built-in study: multinomial, gaussian or regression. Otherwise --config is read.
    #[arg(long, conflicts_with = "config")]
    builtin: Option<Family>,
    /// Override the number of replicates per training size.
    #[arg(long)]
    replicates: Option<usize>,
    /// Override the training sizes.
    #[arg(long, value_delimiter = ',')]
    train_sizes: Option<Vec<usize>>,
    /// Print the resolved spec as JSON instead of running it.
    #[arg(long)]
    print_spec: bool,
}

pub(crate) fn run(args: ExperimentArgs, g: &Globals) -> anyhow::Result<()> {
    let mut spec: ExperimentSpec = match (args.builtin, &g.config) {
        (Some(family), _) => builtin_spec(family, g.seed.unwrap_or(0)),
        (None, Some(path)) => {
            let mut spec: ExperimentSpec = read_json(path)?;
            if let Some(seed) = g.seed {
                spec.seed = seed;
            }
            spec
        }
        (None, None) => return Err(Error::Config("experiment needs --builtin or --config".into()).into()),
    };
    if let Some(m) = g.method {
        spec.dirichlet.method = m.deterministic("experiment")?;
    }
    if let Some(r) = args.replicates {
        spec.n_replicates = r;
    }
    if let Some(sizes) = args.train_sizes {
        spec.train_sizes = sizes;
    }
    if args.print_spec {
        return emit(g.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&spec)?));
    }
    let rows = run_experiment(&spec, g.jobs)?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    emit(g.out.as_deref(), std::str::from_utf8(&buf)?)
}
