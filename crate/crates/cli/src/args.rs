//! Flag definitions. Every subcommand flag is optional at parse time so a
//! `--config` file can fill the gaps; defaults are applied afterwards and
//! listed in each flag's help.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Fill unset fields of `self` from `lower`.
macro_rules! layered {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn layered(self, lower: Self) -> Self {
                Self { $($field: self.$field.or(lower.$field)),* }
            }
        }
    };
}

#[derive(Debug, Parser)]
#[command(
    name = "flowplex",
    version,
    about = "Flow-matching structure sampling, scoring and benchmarking",
    propagate_version = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core [default: 1]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for every output file, created if missing [default: .]
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Log verbosity on stderr [default: warn]
    #[arg(long, global = true)]
    pub log_level: Option<LogLevel>,
    /// TOML file with defaults for any flag (see docs/cli.md)
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
layered!(GlobalArgs { seed, threads, out_dir, log_level, config });

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a physics-inspired prior sample for a topology and write it as PDB
    Prior(PriorArgs),
    /// Sample structures with a toy denoiser, score them with a confidence head and rank them
    Sample(SampleArgs),
    /// Overfit the toy denoiser (and optionally a confidence head) on small systems
    TrainToy(TrainToyArgs),
    /// Compare a predicted structure with a reference
    Score(ScoreArgs),
    /// Score apo/holo linkages from a manifest and report win rates
    Confbench(ConfbenchArgs),
    /// Measure peak memory and wall time of naive and tiled biased attention
    AttnBench(AttnBenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prior(_) => "prior",
            Command::Sample(_) => "sample",
            Command::TrainToy(_) => "train-toy",
            Command::Score(_) => "score",
            Command::Confbench(_) => "confbench",
            Command::AttnBench(_) => "attn-bench",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorArgs {
    /// Topology JSON (required)
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Langevin steps [default: 64]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Confinement radius in Å [default: max(8, 4·residues^(1/3))]
    #[arg(long)]
    pub sphere_r: Option<f64>,
    /// Integrator step size [default: 0.25]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Noise amplitude [default: 2.0]
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Output PDB file name inside --out-dir [default: prior.pdb]
    #[arg(long)]
    pub output: Option<PathBuf>,
}
layered!(PriorArgs { topology, steps, sphere_r, dt, noise_scale, output });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleArgs {
    /// Topology JSON (required)
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Integrator steps [default: 40]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Independent samples, seeded seed, seed+1, ... [default: 1]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Denoiser checkpoint from train-toy [default: untrained model]
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Confidence head checkpoint from train-toy [default: untrained head]
    #[arg(long)]
    pub confidence: Option<PathBuf>,
    /// Ranking subject: ligand:<chain>, chain:<chain> or pair:<a>,<b> [default: first ligand, else first chain]
    #[arg(long)]
    pub rank: Option<String>,
    /// Timestep shift exponent [default: 1.15]
    #[arg(long)]
    pub shift_exponent: Option<f64>,
    /// Anchor budget for predicted distance errors [default: 32]
    #[arg(long)]
    pub anchors: Option<usize>,
}
layered!(SampleArgs { topology, steps, replicas, model, confidence, rank, shift_exponent, anchors });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainToyArgs {
    /// Directory of <name>.json topology + <name>.pdb pairs [default: built-in toy systems]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Optimisation steps, cycling through the systems [default: 3000]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Peak learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Warm-up steps [default: 100]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Decoder replicas per step [default: 1]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Model width [default: 64]
    #[arg(long)]
    pub d_model: Option<usize>,
    /// Attention heads [default: 4]
    #[arg(long)]
    pub heads: Option<usize>,
    /// Transformer blocks [default: 4]
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Confidence-head iterations after denoiser training, 0 to skip [default: 0]
    #[arg(long)]
    pub confidence_iterations: Option<usize>,
}
layered!(TrainToyArgs { data, steps, lr, warmup, replicas, d_model, heads, blocks, confidence_iterations });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// LDDT over all atoms
    Lddt,
    /// Aligned all-atom RMSD
    Rmsd,
    /// Aligned RMSD minimised over graph automorphisms
    SymRmsd,
    /// Pocket-aligned ligand RMSD (needs --ligand)
    PocketRmsd,
    /// Frame-aligned point error over every atom frame
    Fape,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreArgs {
    /// Predicted coordinates, PDB (required)
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Reference coordinates, PDB (required)
    #[arg(long = "ref")]
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,
    /// Topology JSON shared by both structures (required)
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Comma-separated metrics [default: lddt,rmsd,sym-rmsd,fape, plus pocket-rmsd with --ligand]
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<Metric>>,
    /// Ligand chain id for pocket metrics
    #[arg(long)]
    pub ligand: Option<String>,
    /// Confidence head checkpoint; adds pLDDT, pDE and pDockQ values
    #[arg(long)]
    pub confidence: Option<PathBuf>,
    /// Also write the values as a one-row CSV at this path
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Anchor budget for predicted distance errors [default: 32]
    #[arg(long)]
    pub anchors: Option<usize>,
}
layered!(ScoreArgs { pred, reference, topology, metrics, ligand, confidence, csv, anchors });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfbenchArgs {
    /// Linkage manifest JSON (required)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}
layered!(ConfbenchArgs { manifest });

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttnMode {
    Naive,
    Tiled,
    Both,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttnBenchArgs {
    /// Comma-separated sequence lengths [default: 32,64,128]
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Which path to run [default: both]
    #[arg(long)]
    pub mode: Option<AttnMode>,
    /// Key tile length of the tiled path [default: 16]
    #[arg(long)]
    pub tile: Option<usize>,
    /// Independent attention groups [default: 1]
    #[arg(long)]
    pub groups: Option<usize>,
    /// Head dimension [default: 8]
    #[arg(long)]
    pub dim: Option<usize>,
    /// CSV output path [default: <out-dir>/attn_bench.csv]
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
layered!(AttnBenchArgs { n, mode, tile, groups, dim, csv });
