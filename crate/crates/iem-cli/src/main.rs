use std::path::PathBuf;

use clap::{Parser, Subcommand};

mod commands;
mod manifest;

/// Distance computations induced by analytic prior densities: pairwise
/// metric values, contour grids, local-metric ellipse fields, clustering,
/// and the identity-validation suites.
#[derive(Parser)]
#[command(name = "iem", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared stochastic-integration flags (SNR range, discretization, paths).
#[derive(clap::Args, Debug, Clone)]
struct ConfigFlags {
    /// Lower end of the SNR integration range
    #[arg(long, default_value_t = 2f64.powi(-10))]
    gamma_min: f64,
    /// Upper end of the SNR integration range
    #[arg(long, default_value_t = 2f64.powi(10))]
    gamma_max: f64,
    /// Number of log-uniform discretization steps
    #[arg(long, default_value_t = 512)]
    steps: usize,
    /// Number of Brownian paths averaged per expectation
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Seed for the counter-keyed path generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two points under a prior, printed as JSON
    Dist {
        /// Prior density JSON file
        prior: PathBuf,
        /// First point, comma-separated (e.g. "0.0,1.0")
        x1: String,
        /// Second point, comma-separated
        x2: String,
        #[command(flatten)]
        config: ConfigFlags,
        /// Reweighting map for the generalized metric
        #[arg(long, value_enum, default_value_t = commands::FChoice::Identity)]
        f: commands::FChoice,
        /// Second prior for the mismatched variant (x2 rides this one)
        #[arg(long)]
        prior_b: Option<PathBuf>,
        /// Use independent paths for the two points instead of coupling
        #[arg(long)]
        uncoupled: bool,
        /// Write JSON here instead of stdout (adds a .manifest.json sidecar)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distances from a reference point to a 2-D lattice, as CSV
    Grid {
        /// Prior density JSON file (2-D)
        prior: PathBuf,
        /// Reference point, comma-separated
        #[arg(long = "ref", value_name = "POINT")]
        reference: String,
        /// Lattice bounds "x0,x1,y0,y1"
        #[arg(long)]
        bounds: String,
        /// Lattice points per axis
        #[arg(long, default_value_t = 41)]
        resolution: usize,
        #[command(flatten)]
        config: ConfigFlags,
        /// Output CSV path (a .manifest.json sidecar is written next to it)
        #[arg(long)]
        out: PathBuf,
    },
    /// Local-metric ellipse field over a 2-D lattice, as CSV
    Ellipses {
        /// Prior density JSON file (2-D)
        prior: PathBuf,
        /// Lattice bounds "x0,x1,y0,y1"
        #[arg(long)]
        bounds: String,
        /// Lattice points per axis
        #[arg(long, default_value_t = 21)]
        resolution: usize,
        #[command(flatten)]
        config: ConfigFlags,
        /// Output CSV path (a .manifest.json sidecar is written next to it)
        #[arg(long)]
        out: PathBuf,
    },
    /// Local Riemannian metric at a point (both forms), as JSON
    Local {
        /// Prior density JSON file
        prior: PathBuf,
        /// Anchor point, comma-separated
        x: String,
        #[command(flatten)]
        config: ConfigFlags,
        /// Write JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-medoids over a metric or Euclidean distance matrix, as JSON
    Cluster {
        /// Prior density JSON file: sample points, build both matrices,
        /// cluster both, and score against the recorded component labels
        #[arg(long, conflicts_with = "matrix")]
        prior: Option<PathBuf>,
        /// Precomputed distance-matrix CSV to cluster directly
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Ground-truth labels CSV (one label per line; with --matrix only)
        #[arg(long, requires = "matrix")]
        truth: Option<PathBuf>,
        /// Number of clusters
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Number of points sampled from the prior
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Maximum assignment/update sweeps
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[command(flatten)]
        config: ConfigFlags,
        /// Export the metric distance matrix as CSV to this path
        #[arg(long)]
        export_matrix: Option<PathBuf>,
        /// Write JSON here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run identity-validation suites; nonzero exit on any failure
    Validate {
        /// Suite name or `all`
        #[arg(default_value = "all")]
        suite: String,
        /// Seed shared by all checks in the suite
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report array here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match commands::run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            2
        }
    };
    std::process::exit(code);
}
