use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphsr_core::eval::{self, BenchRow, EvalReport};
use graphsr_core::{io, run_sr, Error, Graph, GroundTruthOracle, Kernel, LassoConfig, SrConfig, Spectrum};
use serde::Serialize;

use crate::bench::{self, BenchConfig};
use crate::server::{self, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "graphsr", version, about = "Adaptive vertex sampling and signal recovery on graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a Gaussian-kernel graph from features or a distance matrix.
    BuildGraph(BuildGraph),
    /// Run the adaptive selector (or a random policy) against a ground-truth signal.
    RunSr(RunSr),
    /// Compare a recovered signal with the ground truth.
    Evaluate(Evaluate),
    /// Serve the HTTP session API.
    Serve(Serve),
    /// Synthetic comparison of adaptive and random sampling, as CSV.
    Bench(Bench),
}

#[derive(Debug, Args)]
pub struct BuildGraph {
    /// Header-less CSV, one feature row per vertex.
    #[arg(long, conflicts_with = "distances", required_unless_present = "distances")]
    pub features: Option<PathBuf>,
    /// Header-less CSV with a symmetric N x N distance matrix.
    #[arg(long)]
    pub distances: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Keep only each vertex's K nearest neighbours (union-symmetrized).
    #[arg(long)]
    pub knn: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Sr,
    Random,
}

#[derive(Debug, Args)]
pub struct RunSr {
    #[arg(short = 'g', long)]
    pub graph: PathBuf,
    /// N x p ground-truth CSV with a header row; answers every query.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(short, long)]
    pub m: usize,
    #[arg(short, long)]
    pub k: usize,
    #[arg(long, default_value_t = 0.01)]
    pub xi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value = "heat")]
    pub kernel: Kernel,
    #[arg(long, value_enum, default_value_t = PolicyKind::Sr)]
    pub policy: PolicyKind,
    /// Seed for the random policy.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines audit log, one record per selected vertex.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Record `wall_ms` as 0 so reruns produce byte-identical logs.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = eval::LABEL_THRESHOLD)]
    pub threshold: f64,
    /// Also report row-mean classification accuracy at this threshold.
    #[arg(long)]
    pub positivity: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub sampling_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Serve {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Session store; the GRAPHSR_DATA_DIR environment variable takes precedence.
    #[arg(long, default_value = "graphsr-data")]
    pub data_dir: PathBuf,
    /// Static console assets served under /ui/ (default: DATA_DIR/ui).
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Bench {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.15)]
    pub radius: f64,
    #[arg(short, long, default_value_t = 20)]
    pub k: usize,
    #[arg(short, long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4,0.6")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = eval::LABEL_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.01)]
    pub xi: f64,
    /// Write CSV here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Process exit status for a failed command.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

pub fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BuildGraph(a) => build_graph(a),
        Command::RunSr(a) => run_sr_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn build_graph(a: BuildGraph) -> Result<(), Error> {
    let graph = match (&a.features, &a.distances) {
        (Some(f), _) => Graph::from_features(&io::read_matrix(f)?, a.sigma, a.knn)?,
        (None, Some(d)) => Graph::from_distances(&io::read_matrix(d)?, a.sigma, a.knn)?,
        (None, None) => return Err(Error::InvalidConfig("pass --features or --distances".into())),
    };
    graph.write_grf(&a.output)?;
    println!("N={} edges={}", graph.n_vertices(), graph.edges().len());
    Ok(())
}

#[derive(Serialize)]
struct RandomLogLine {
    iter: usize,
    vertex: usize,
}

#[derive(Serialize)]
struct RunSummary {
    n: usize,
    p: usize,
    m: usize,
    policy: Vec<usize>,
    utility: Option<f64>,
}

fn run_sr_cmd(a: RunSr) -> Result<(), Error> {
    let graph = Graph::read_grf(&a.graph)?;
    let truth = io::read_signal(&a.truth)?;
    if truth.nrows() != graph.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows in {}", graph.n_vertices(), a.truth.display()),
            actual: truth.nrows().to_string(),
        });
    }
    let spectrum = Arc::new(Spectrum::compute(&graph.laplacian(), a.k)?);
    let config = SrConfig {
        kernel: a.kernel,
        alpha: a.alpha,
        lasso: LassoConfig::with_xi(a.xi),
    };
    let mut oracle = GroundTruthOracle::new(truth.clone());
    let (policy, estimate, utility) = match a.policy {
        PolicyKind::Sr => {
            let mut out = run_sr(spectrum, config, &mut oracle, a.m)?;
            if a.no_timing {
                out.log.iter_mut().for_each(|r| r.wall_ms = 0.0);
            }
            if let Some(path) = &a.log {
                io::write_log_file(path, &out.log)?;
            }
            let utility = graphsr_core::selector::utility(&out.log);
            (out.policy, out.estimate, Some(utility))
        }
        PolicyKind::Random => {
            config.lasso.validate()?;
            let (policy, z) = eval::random_baseline(&spectrum, a.m, a.seed, &mut oracle, &config.lasso)?;
            if let Some(path) = &a.log {
                let mut text = Vec::new();
                for (i, &vertex) in policy.iter().enumerate() {
                    serde_json::to_writer(&mut text, &RandomLogLine { iter: i + 1, vertex })?;
                    text.push(b'\n');
                }
                std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            (policy, z, None)
        }
    };
    io::write_signal(&a.out, &estimate)?;
    let summary = RunSummary {
        n: estimate.nrows(),
        p: estimate.ncols(),
        m: policy.len(),
        policy,
        utility,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn evaluate(a: Evaluate) -> Result<(), Error> {
    let pred = io::read_signal(&a.pred)?;
    let truth = io::read_signal(&a.truth)?;
    let report = EvalReport::compute(&pred, &truth, a.threshold, a.positivity, a.sampling_ratio, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn serve(a: Serve) -> Result<(), Error> {
    let data_dir = std::env::var_os("GRAPHSR_DATA_DIR").map_or(a.data_dir, PathBuf::from);
    let config = ServerConfig {
        data_dir: data_dir.clone(),
        ui_dir: a.ui_dir,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Io {
            path: "<runtime>".into(),
            source: e,
        })?;
    rt.block_on(server::serve(SocketAddr::new(a.host, a.port), config))
        .map_err(|e| Error::Io { path: data_dir, source: e })
}

fn bench_cmd(a: Bench) -> Result<(), Error> {
    let cfg = BenchConfig {
        n: a.n,
        radius: a.radius,
        k: a.k,
        p: a.p,
        sparsity: a.sparsity,
        noise: a.noise,
        seeds: a.seeds,
        ratios: a.ratios,
        threshold: a.threshold,
        lasso: LassoConfig::with_xi(a.xi),
    };
    let rows: Vec<BenchRow> = bench::run(&cfg)?.into_iter().map(|r| r.row).collect();
    match &a.output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            eval::write_bench_csv(file, &rows)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            eval::write_bench_csv(&mut lock, &rows)?;
            lock.flush().map_err(|e| Error::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}
