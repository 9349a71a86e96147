//! `pprc`: command-line front end.
//!
//! Exit codes: 0 success, 2 bad parameters, 3 bad or inconsistent data,
//! 4 transport failure (a checkpoint is written when one was requested).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ppr_core::block_model::DcsbmSpec;
use ppr_core::clustering::{in_out_ratio, recovery_accuracy, AdjustMode, ClusterMetrics, RankedCluster, DEFAULT_TAU};
use ppr_core::experiments::{run_experiment, teleportation_sensitivity, ExperimentConfig, ResultRow, RowWriter};
use ppr_core::ppr::ExactSolver;
use ppr_core::{approximate_ppr, json, Error, Graph, IdMap, PprDocument, PprResult, PreferenceVector};
use ppr_crawl::{crawl_ppr, serve_graph, ClientConfig, CrawlError, CrawlOptions, CrawlStatus, RemoteGraphClient, ServerOptions};
use serde::Serialize;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Crawl(#[from] CrawlError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::Crawl(CrawlError::Core(e)) => match e {
                Error::InvalidParameter(_) => 2,
                Error::Access(_) => 4,
                _ => 3,
            },
            CliError::Crawl(CrawlError::Transport { .. }) => 4,
            CliError::File { .. } => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn param(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidParameter(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "pprc", version, about = "Local graph clustering with approximate personalized PageRank")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Tab-separated edge list.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub directed: bool,
    /// Id map CSV (`index,external_id`) fixing node order and keeping
    /// isolated nodes.
    #[arg(long)]
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a graph from a block-model spec file.
    Generate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the id map, so isolated nodes survive.
        #[arg(long)]
        ids: Option<PathBuf>,
        /// Write `external_id,block` rows (blocks numbered from 1).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Approximate (or exact) PPR from seed nodes.
    Ppr {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        seed: Vec<String>,
        #[arg(long, default_value_t = 0.15)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        /// Solve exactly instead of pushing.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank a PPR result into a local cluster.
    Cluster {
        #[arg(long)]
        result: PathBuf,
        /// In-degrees come from this graph; enables the in-and-out ratio.
        #[arg(long, required_unless_present = "degrees")]
        graph: Option<PathBuf>,
        #[arg(long)]
        directed: bool,
        #[arg(long)]
        ids: Option<PathBuf>,
        /// `external_id,in_degree` CSV, e.g. from `crawl --degrees`.
        #[arg(long, conflicts_with = "graph")]
        degrees: Option<PathBuf>,
        #[arg(long, default_value = "appr")]
        mode: AdjustMode,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(short = 'n', long = "size")]
        n: usize,
        /// Seed ids; a seed with zero in-degree ranks first.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<String>,
        /// `external_id,block` CSV for recovery accuracy.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        target_block: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Approximate PPR against a remote graph server.
    Crawl {
        #[arg(long, env = "PPR_API_BASE")]
        base_url: String,
        #[arg(long, env = "PPR_API_TOKEN", hide_env_values = true)]
        token: Option<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        seed: Vec<String>,
        #[arg(long, default_value_t = 0.15)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        /// Resumed from if present; written periodically and on interruption.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = ppr_crawl::crawl::DEFAULT_CHECKPOINT_EVERY)]
        checkpoint_every: u64,
        #[arg(long)]
        max_pushes: Option<u64>,
        #[arg(long, default_value_t = 8)]
        max_in_flight: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write `external_id,in_degree` for every ranked node.
        #[arg(long)]
        degrees: Option<PathBuf>,
    },
    /// Serve a graph over the two-endpoint protocol.
    Serve {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, default_value_t = 0.0)]
        fault_429: f64,
        #[arg(long, default_value_t = 0.0)]
        fault_5xx: f64,
        #[arg(long, default_value_t = 0)]
        latency_ms: u64,
        #[arg(long, default_value_t = 1)]
        retry_after: u64,
        #[arg(long, env = "PPR_API_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
    /// Run a simulation study and write one CSV row per replicate.
    Experiment {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// experiment1, experiment2, experiment3 or graph_size.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Write the effective config here.
        #[arg(long)]
        write_config: Option<PathBuf>,
    },
    /// Cluster overlap across teleportation constants.
    Sensitivity {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        seed: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.15,0.25,0.3333333333333333")]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(short = 'n', long = "size")]
        n: usize,
        #[arg(long, default_value = "appr")]
        mode: AdjustMode,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn load_graph(path: &Path, directed: bool, ids: Option<&Path>) -> Result<Graph> {
    let graph = match ids {
        Some(ids) => {
            let map = IdMap::read_csv(open(ids)?)?;
            Graph::load_edge_list_with_ids(open(path)?, directed, map)?
        }
        None => Graph::load_edge_list(open(path)?, directed)?,
    };
    log::info!("loaded {} nodes, {} arcs from {}", graph.n_nodes(), graph.n_arcs(), path.display());
    Ok(graph)
}

fn seed_indices(graph: &Graph, seeds: &[String]) -> Result<Vec<usize>> {
    seeds.iter().map(|s| Ok(graph.index_of(s)?)).collect()
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", json::canonical_pretty(value)?);
    Ok(())
}

fn read_pairs(path: &Path) -> Result<BTreeMap<String, usize>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        let (Some(id), Some(value)) = (row.get(0), row.get(1)) else {
            return Err(Error::Parse { line: i + 2, message: "expected two columns".into() }.into());
        };
        let value = value
            .trim()
            .parse()
            .map_err(|e| Error::Parse { line: i + 2, message: format!("{value:?}: {e}") })?;
        if out.insert(id.to_owned(), value).is_some() {
            return Err(Error::Parse { line: i + 2, message: format!("id {id:?} repeated") }.into());
        }
    }
    Ok(out)
}

fn write_pairs<'a>(path: &Path, header: [&str; 2], rows: impl Iterator<Item = (&'a str, String)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| CliError::File { path: path.to_owned(), source: e.into() };
    w.write_record(header).map_err(io)?;
    for (id, value) in rows {
        w.write_record([id, value.as_str()]).map_err(io)?;
    }
    w.flush().map_err(|source| CliError::File { path: path.to_owned(), source })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { params, out, ids, labels } => generate(&params, &out, ids.as_deref(), labels.as_deref()),
        Command::Ppr { graph, seed, alpha, epsilon, exact, out } => {
            let g = load_graph(&graph.graph, graph.directed, graph.ids.as_deref())?;
            let pi = PreferenceVector::uniform(&seed_indices(&g, &seed)?)?;
            let result = if exact { exact_result(&g, &pi, alpha)? } else { approximate_ppr(&g, &pi, alpha, epsilon)? };
            let doc = PprDocument::from_result(&result, g.ids())?;
            write_text(&out, &json::canonical_pretty(&doc)?)?;
            log::info!("{} pushes, {} nodes with mass", result.pushes, result.p.len());
            Ok(())
        }
        Command::Cluster { result, graph, directed, ids, degrees, mode, tau, n, seed, labels, target_block, out } => {
            let doc = PprDocument::from_json(&read_text(&result)?)?;
            let graph = graph.map(|g| load_graph(&g, directed, ids.as_deref())).transpose()?;
            cluster(&doc, graph.as_ref(), degrees.as_deref(), mode, tau, n, &seed, labels.as_deref(), target_block, &out)
        }
        Command::Crawl {
            base_url,
            token,
            seed,
            alpha,
            epsilon,
            checkpoint,
            checkpoint_every,
            max_pushes,
            max_in_flight,
            out,
            degrees,
        } => {
            let mut config = ClientConfig::new(base_url);
            config.auth_token = token.filter(|t| !t.is_empty());
            config.max_in_flight = max_in_flight;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
                log::warn!("cannot install interrupt handler: {e}");
            }
            let options = CrawlOptions {
                checkpoint_path: checkpoint,
                checkpoint_every,
                max_pushes,
                stop: Some(stop),
                fetch_in_degrees: true,
            };
            crawl(config, &seed, alpha, epsilon, &options, out.as_deref(), degrees.as_deref())
        }
        Command::Serve { graph, bind, fault_429, fault_5xx, latency_ms, retry_after, token } => {
            for (name, rate) in [("fault-429", fault_429), ("fault-5xx", fault_5xx)] {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(param(format!("--{name} must lie in [0, 1]")));
                }
            }
            let g = load_graph(&graph.graph, graph.directed, graph.ids.as_deref())?;
            let options = ServerOptions {
                latency: Duration::from_millis(latency_ms),
                rate_429: fault_429,
                rate_5xx: fault_5xx,
                retry_after_secs: retry_after,
                fault_seed: 0,
                auth_token: token.filter(|t| !t.is_empty()),
            };
            let handle = serve_graph(Arc::new(g), &bind, options).map_err(|e| param(format!("cannot bind {bind}: {e}")))?;
            println!("listening on {}", handle.base_url());
            handle.wait().map_err(|e| Error::Io(e).into())
        }
        Command::Experiment { config, preset, replicates, out, write_config } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::from_json(&read_text(&path)?)?,
                (None, Some(name)) => ExperimentConfig::preset(&name)?,
                (None, None) => return Err(param("either --config or --preset is required")),
            };
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            cfg.validate()?;
            if let Some(path) = write_config {
                write_text(&path, &cfg.to_json()?)?;
            }
            experiment(&cfg, &out)
        }
        Command::Sensitivity { graph, seed, alphas, epsilon, n, mode, tau, out } => {
            let g = load_graph(&graph.graph, graph.directed, graph.ids.as_deref())?;
            let pi = PreferenceVector::uniform(&seed_indices(&g, &seed)?)?;
            let report = teleportation_sensitivity(&g, &pi, &alphas, epsilon, n, mode, tau)?;
            match out {
                Some(path) => write_text(&path, &json::canonical_pretty(&report)?),
                None => print_json(&report),
            }
        }
    }
}

fn exact_result(graph: &Graph, pi: &PreferenceVector, alpha: f64) -> Result<PprResult> {
    let p = ExactSolver::default().solve_graph(graph, pi, alpha)?;
    let touched = p.iter().filter(|&&x| x > 0.0).count() as u64;
    Ok(PprResult {
        alpha,
        epsilon: f64::MIN_POSITIVE,
        p: p.into_iter().enumerate().filter(|&(_, x)| x > 0.0).collect(),
        r: BTreeMap::new(),
        pushes: 0,
        nodes_touched: touched,
    })
}

#[derive(Serialize)]
struct GenerateSummary {
    nodes: usize,
    arcs: usize,
    pairs: u64,
    clipped: u64,
    clip_rate: f64,
    warning: Option<String>,
}

fn generate(params: &Path, out: &Path, ids: Option<&Path>, labels: Option<&Path>) -> Result<()> {
    let spec = DcsbmSpec::from_json(&read_text(params)?)?;
    let (realized, sampled) = spec.sample()?;
    let graph = &sampled.graph;
    let mut w = create(out)?;
    graph.write_edge_list(&mut w)?;
    w.flush().map_err(|source| CliError::File { path: out.to_owned(), source })?;
    if let Some(path) = ids {
        graph.ids().write_csv(create(path)?)?;
    }
    if let Some(path) = labels {
        let names = graph.ids().names();
        let rows = names.iter().zip(realized.z()).map(|(id, &b)| (id.as_str(), (b + 1).to_string()));
        write_pairs(path, ["external_id", "block"], rows)?;
    }
    let report = &sampled.report;
    if let Some(w) = &report.warning {
        log::warn!("{w}");
    }
    print_json(&GenerateSummary {
        nodes: graph.n_nodes(),
        arcs: graph.n_arcs(),
        pairs: report.pairs,
        clipped: report.clipped,
        clip_rate: report.clip_rate(),
        warning: report.warning.clone(),
    })
}

#[allow(clippy::too_many_arguments)]
fn cluster(
    doc: &PprDocument,
    graph: Option<&Graph>,
    degrees: Option<&Path>,
    mode: AdjustMode,
    tau: f64,
    n: usize,
    seeds: &[String],
    labels: Option<&Path>,
    target_block: usize,
    out: &Path,
) -> Result<()> {
    // Without a graph, indices are local to this command.
    let (ids, in_degree): (IdMap, Vec<Option<usize>>) = match (graph, degrees) {
        (Some(g), _) => (g.ids().clone(), g.in_degrees().iter().map(|&d| Some(d)).collect()),
        (None, Some(path)) => {
            let table = read_pairs(path)?;
            let mut ids = IdMap::new();
            for id in doc.p.keys().chain(table.keys()) {
                ids.intern(id);
            }
            let degs = ids.names().iter().map(|id| table.get(id).copied()).collect();
            (ids, degs)
        }
        (None, None) => return Err(param("either --graph or --degrees is required")),
    };
    let result = doc.to_result(&ids)?;
    let seed_idx: Vec<usize> =
        seeds.iter().map(|s| ids.get(s).ok_or_else(|| Error::UnknownNode(s.clone()))).collect::<std::result::Result<_, _>>()?;
    let ranked = RankedCluster::build(
        &result.p,
        |u| {
            in_degree
                .get(u)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Data(format!("no in-degree for {:?}", ids.name(u).unwrap_or_default())))
        },
        &seed_idx,
        mode,
        tau,
        n,
    )?;
    ranked.write_csv(create(out)?, &ids)?;

    let nodes = ranked.nodes();
    let accuracy = match labels {
        Some(path) => {
            let table = read_pairs(path)?;
            let z: Vec<usize> = ids.names().iter().map(|id| table.get(id).copied().unwrap_or(0)).collect();
            let picks: Vec<usize> = ranked.entries.iter().filter(|e| !e.is_seed).map(|e| e.node).collect();
            if target_block == 0 {
                return Err(param("blocks are numbered from 1"));
            }
            Some(recovery_accuracy(&picks, &z, target_block)?)
        }
        None => None,
    };
    let ratio = match graph {
        Some(g) if !nodes.is_empty() => in_out_ratio(g, &nodes)?,
        _ => f64::NAN,
    };
    print_json(&ClusterMetrics { mode, tau: ranked.tau, n: ranked.len(), in_out_ratio: ratio, accuracy })
}

#[derive(Serialize)]
struct CrawlSummary<'a> {
    status: &'a str,
    pushes: u64,
    nodes_touched: u64,
    fetch_count: u64,
    missing: &'a [String],
    checkpoint: Option<String>,
}

fn crawl(
    config: ClientConfig,
    seeds: &[String],
    alpha: f64,
    epsilon: f64,
    options: &CrawlOptions,
    out: Option<&Path>,
    degrees: Option<&Path>,
) -> Result<()> {
    let client = RemoteGraphClient::new(config)?;
    let mut distinct: Vec<&String> = Vec::new();
    for s in seeds {
        if !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    let w = 1.0 / distinct.len() as f64;
    let weighted: Vec<(String, f64)> = distinct.into_iter().map(|s| (s.clone(), w)).collect();
    let outcome = crawl_ppr(&client, &weighted, alpha, epsilon, options)?;
    let complete = outcome.status == CrawlStatus::Complete;
    if complete {
        if let Some(path) = out {
            write_text(path, &json::canonical_pretty(&outcome.document)?)?;
        }
        if let Some(path) = degrees {
            write_pairs(path, ["external_id", "in_degree"], outcome.in_degrees.iter().map(|(id, d)| (id.as_str(), d.to_string())))?;
        }
    } else {
        log::warn!("crawl suspended; rerun with the same --checkpoint to continue");
    }
    if !outcome.missing.is_empty() {
        log::warn!("{} node(s) unknown to the server were treated as dangling", outcome.missing.len());
    }
    print_json(&CrawlSummary {
        status: if complete { "complete" } else { "suspended" },
        pushes: outcome.result.pushes,
        nodes_touched: outcome.result.nodes_touched,
        fetch_count: outcome.fetch_count,
        missing: &outcome.missing,
        checkpoint: outcome.checkpoint.map(|p| p.display().to_string()),
    })
}

#[derive(Serialize)]
struct PointSummary {
    grid_index: usize,
    grid_value: Option<f64>,
    rows: usize,
    errors: usize,
    mean_accuracy: BTreeMap<String, f64>,
    median_ree: BTreeMap<String, f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) { (xs[m - 1] + xs[m]) / 2.0 } else { xs[m] }
}

fn experiment(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut writer = RowWriter::new(create(out)?, &config.modes)?;
    let total = config.grid_len() * config.replicates;
    let mut done = 0;
    let rows = run_experiment(config, |row: &ResultRow| {
        done += 1;
        log::debug!("row {done}/{total}");
        writer.write(row)
    })?;
    writer.into_inner()?;
    let summary: Vec<PointSummary> = (0..config.grid_len())
        .map(|g| {
            let point: Vec<&ResultRow> = rows.iter().filter(|r| r.grid_index == g).collect();
            let ok: Vec<&&ResultRow> = point.iter().filter(|r| r.error.is_none()).collect();
            let mut mean_accuracy = BTreeMap::new();
            let mut median_ree = BTreeMap::new();
            for &mode in &config.modes {
                let acc: Vec<f64> = ok.iter().filter_map(|r| r.accuracy.get(&mode).copied()).collect();
                if !acc.is_empty() {
                    mean_accuracy.insert(mode.to_string(), acc.iter().sum::<f64>() / acc.len() as f64);
                }
                median_ree.insert(mode.to_string(), median(ok.iter().filter_map(|r| r.ree.get(&mode).copied()).collect()));
            }
            PointSummary {
                grid_index: g,
                grid_value: config.grid_value(g),
                rows: point.len(),
                errors: point.len() - ok.len(),
                mean_accuracy,
                median_ree,
            }
        })
        .collect();
    print_json(&summary)
}
