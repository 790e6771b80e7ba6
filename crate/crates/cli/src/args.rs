//! Command-line arguments.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "roughpath", version, about = "Signatures, p-variation and rough path computations")]
pub struct Cli {
    /// Write JSON output to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config with `tol_sew`, `max_depth` and `tensor_degree_max`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write an SVG plot of traces or convergence curves to this file.
    #[arg(long, global = true)]
    pub plot: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Refinement tolerance (overrides `tol_sew`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Refinement depth limit (overrides `max_depth`).
    #[arg(long = "max-depth", global = true)]
    pub max_depth: Option<usize>,
    /// Largest tensor degree accepted (overrides `tensor_degree_max`).
    #[arg(long = "degree-max", global = true)]
    pub degree_max: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Truncated signature of a path over a window.
    Sig {
        #[arg(long, short = 'n', default_value_t = 2)]
        level: usize,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        path: PathBuf,
    },
    /// p-variation of a path over a window.
    Pvar {
        #[arg(short, long)]
        p: f64,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        path: PathBuf,
    },
    /// d_p distance between two rough paths (CSV inputs are lifted at `p`).
    Dist {
        #[arg(short, long)]
        p: Option<f64>,
        a: PathBuf,
        b: PathBuf,
    },
    /// Extend a rough path to a higher degree.
    Extend {
        #[arg(short = 'n', long)]
        degree: usize,
        #[arg(short, long)]
        p: Option<f64>,
        input: PathBuf,
    },
    /// Integrate a one-form along a rough path.
    Integrate {
        /// `area`, `grad:JET` or `const:a11,a12,...` (row-major, `e x d`).
        #[arg(long)]
        oneform: Option<String>,
        /// JSON list of `{center, radius, oneform}` balls.
        #[arg(long, conflicts_with = "oneform")]
        local: Option<PathBuf>,
        #[arg(short, long)]
        p: Option<f64>,
        input: PathBuf,
    },
    /// Lift a sampled manifold path to a local rough path.
    Lift {
        #[arg(long)]
        atlas: String,
        #[arg(short, long)]
        p: f64,
        path: PathBuf,
    },
    /// Check the consistency condition of a local rough path.
    Check {
        #[arg(long)]
        atlas: String,
        /// Largest accepted overlap distance.
        #[arg(long, default_value_t = 1e-6)]
        within: f64,
        local: PathBuf,
    },
    /// Run the acceptance battery.
    Suite {
        /// Comma-separated criterion ids; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}
