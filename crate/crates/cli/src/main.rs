use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use arbor::{NumericScale, TreeParams};

#[derive(Parser)]
#[command(
    name = "arbor",
    version,
    about = "Incremental concept formation over structured instances"
)]
struct Cli {
    #[command(flatten)]
    tree: TreeArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TreeArgs {
    /// Lower bound on the standard deviation of numeric attributes
    #[arg(long, global = true)]
    acuity: Option<f64>,

    /// Beam width for partial matching
    #[arg(long, global = true)]
    beam_width: Option<usize>,

    /// Use exact A* matching instead of beam search
    #[arg(long, global = true)]
    astar: bool,

    /// Constant in front of numeric guess terms
    #[arg(long, global = true, value_enum)]
    numeric_scale: Option<Scale>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Exact,
    Bare,
}

impl TreeArgs {
    fn params(&self) -> TreeParams {
        let mut params = TreeParams::default();
        if let Some(acuity) = self.acuity {
            params.acuity = acuity;
        }
        if let Some(width) = self.beam_width {
            params.beam_width = width;
        }
        params.exact_match_astar = self.astar;
        if let Some(scale) = self.numeric_scale {
            params.numeric_scale = match scale {
                Scale::Exact => NumericScale::Exact,
                Scale::Bare => NumericScale::Bare,
            };
        }
        params
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree on an NDJSON file (one instance per line) and write its JSON snapshot
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Fit in a seeded random order instead of file order
        #[arg(long)]
        shuffle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Predict one attribute for every instance.
    ///
    /// CSV columns: index,value,confidence (confidence is empty for numeric values)
    Predict {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Flat attribute name, e.g. `success` or `b1.type`
        #[arg(long)]
        target: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Flat clustering after a number of concept splits.
    ///
    /// CSV columns: instance_index,label_id,path (path is `/`-separated concept ids from the root).
    /// Without --tree the two-pass protocol is used: fit on a seeded shuffle, then label.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        splits: usize,
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an evaluation protocol on synthetic or supplied data.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Write a synthetic dataset as NDJSON
    Generate {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        /// Label flip probability (two-class preset only)
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a tree snapshot as Graphviz DOT
    ExportDot {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    TwoClass,
    ThreeCluster,
}

#[derive(Subcommand)]
enum Experiment {
    /// Predict-then-train learning curve.
    ///
    /// CSV columns: opportunity,mean,ci_halfwidth,n. With --output, run
    /// metadata (parameters, seeds, version) goes to <output>.meta.json.
    Task1 {
        /// NDJSON dataset; defaults to the two-class synthetic preset
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "success")]
        target: String,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 30)]
        examples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Synthetic dataset size
        #[arg(long, default_value_t = 200)]
        instances: usize,
        /// Synthetic label flip probability
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Two-pass clustering scored by adjusted Rand index.
    ///
    /// CSV columns: splits,mean_ari,std_ari,n_runs. With --output, run
    /// metadata goes to <output>.meta.json.
    Task2 {
        /// NDJSON dataset; defaults to the three-cluster synthetic preset
        #[arg(long)]
        input: Option<PathBuf>,
        /// Attribute holding the reference label; removed before clustering
        #[arg(long, default_value = "kind")]
        label_attr: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        splits: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Synthetic dataset size
        #[arg(long, default_value_t = 250)]
        instances: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let params = cli.tree.params();
    params.validate()?;
    match cli.command {
        Command::Fit {
            input,
            output,
            shuffle,
            seed,
        } => commands::fit(&params, &input, &output, shuffle.then_some(seed)),
        Command::Predict {
            tree,
            input,
            target,
            output,
        } => commands::predict(&tree, &input, &target, output.as_deref()),
        Command::Cluster {
            input,
            splits,
            tree,
            seed,
            output,
        } => commands::cluster(
            &params,
            &input,
            splits,
            tree.as_deref(),
            seed,
            output.as_deref(),
        ),
        Command::Experiment(Experiment::Task1 {
            input,
            target,
            runs,
            examples,
            seed,
            instances,
            noise,
            output,
        }) => {
            let dataset = match input {
                Some(path) => commands::read_instances(&path)?,
                None => {
                    commands::synthetic(commands::Synthetic::TwoClass { noise }, instances, seed)?
                }
            };
            commands::task1(
                &params,
                &dataset,
                &target,
                runs,
                examples,
                seed,
                output.as_deref(),
            )
        }
        Command::Experiment(Experiment::Task2 {
            input,
            label_attr,
            splits,
            runs,
            seed,
            instances,
            output,
        }) => {
            let dataset = match input {
                Some(path) => commands::read_instances(&path)?,
                None => commands::synthetic(commands::Synthetic::ThreeCluster, instances, seed)?,
            };
            commands::task2(
                &params,
                &dataset,
                &label_attr,
                &splits,
                runs,
                seed,
                output.as_deref(),
            )
        }
        Command::Generate {
            preset,
            instances,
            noise,
            seed,
            output,
        } => {
            let kind = match preset {
                Preset::TwoClass => commands::Synthetic::TwoClass { noise },
                Preset::ThreeCluster => commands::Synthetic::ThreeCluster,
            };
            let dataset = commands::synthetic(kind, instances, seed)?;
            commands::emit(&commands::to_ndjson(&dataset), output.as_deref())
        }
        Command::ExportDot { tree, output } => {
            let tree = commands::read_tree(&tree)?;
            commands::emit(&arbor::to_dot(&tree), output.as_deref())
        }
    }
}
