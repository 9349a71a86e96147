//! Simulation harness: sample block-model graphs, compute PPR, and score
//! recovery and concentration against the population model.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::mpsc;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::block_model::{
    block_degrees,    draw_memberships, population_ppr, rate_block_matrix, rate_scale, sample_dcsbm_with,
    sample_power_law_theta_with, uniform_theta, DcsbmParams, ThetaSpec,
};
use crate::clustering::{recovery_accuracy, AdjustMode, RankedCluster, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphAccess};
use crate::ppr::{approximate_ppr, validate_alpha, validate_epsilon, ExactSolver, PreferenceVector};
use crate::rng::{replicate_stream, stream_rng};

/// `‖p − 𝓅‖∞ / ‖𝓅‖∞`.
pub fn relative_entrywise_error(p: &[f64], pop: &[f64]) -> Result<f64> {
    if p.len() != pop.len() {
        return Err(Error::param(format!(
            "vector lengths differ: {} vs {}",
            p.len(),
            pop.len()
        )));
    }
    let scale = pop.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::param("population vector has no positive entry"));
    }
    let err = p
        .iter()
        .zip(pop)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(err / scale)
}

/// Dense copy of a sparse vector; absent entries are zero.
pub fn densify(p: &BTreeMap<usize, f64>, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&u, &x) in p.range(..n) {
        out[u] = x;
    }
    out
}

/// How block memberships are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Memberships {
    /// Contiguous blocks whose sizes differ by at most one.
    Balanced,
    /// One multinomial draw per node with these (unnormalized) weights.
    Multinomial { weights: Vec<f64> },
    /// Multinomial with weights `1, b, b², …`.
    Geometric { ratio: f64 },
}

impl Memberships {
    fn weights(&self, k: usize) -> Option<Vec<f64>> {
        match self {
            Memberships::Balanced => None,
            Memberships::Multinomial { weights } => Some(weights.clone()),
            Memberships::Geometric { ratio } => Some((0..k).map(|i| ratio.powi(i as i32)).collect()),
        }
    }
}

/// Block model with within-block rate `b1` and between-block rate `b2`,
/// scaled so the expected average degree is `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub b1: f64,
    pub b2: f64,
    pub delta: f64,
    pub memberships: Memberships,
    pub theta: ThetaSpec,
    #[serde(default)]
    pub directed: bool,
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n < self.k {
            return Err(Error::param(format!("need 1 <= K <= N, got K={}, N={}", self.k, self.n)));
        }
        if !(self.b2 > 0.0 && self.b1 >= self.b2 && self.b1.is_finite()) {
            return Err(Error::param("need b1 >= b2 > 0"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::param("delta must be positive"));
        }
        if let Some(w) = self.memberships.weights(self.k) {
            if w.len() != self.k || w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(Error::param("need K positive membership weights"));
            }
        }
        if let ThetaSpec::PowerLaw { x_min, beta } = self.theta {
            if !(x_min > 0.0 && x_min.is_finite() && beta > 1.0 && beta.is_finite()) {
                return Err(Error::param("power law needs x_min > 0 and beta > 1"));
            }
        }
        Ok(())
    }

    /// Draws memberships and degree parameters.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DcsbmParams> {
        self.validate()?;
        let (k, n) = (self.k, self.n);
        let (z, expected) = match self.memberships.weights(k) {
            None => {
                let z: Vec<usize> = (0..n).map(|v| v * k / n).collect();
                let mut sizes = vec![0.0; k];
                z.iter().for_each(|&i| sizes[i] += 1.0);
                (z, sizes)
            }
            Some(w) => {
                let mut attempt = 0;
                let z = loop {
                    let z = draw_memberships(n, &w, rng)?;
                    let occupied: BTreeSet<usize> = z.iter().copied().collect();
                    if occupied.len() == k {
                        break z;
                    }
                    attempt += 1;
                    log::info!("empty block in membership draw; resampling (attempt {attempt})");
                    if attempt >= 1000 {
                        return Err(Error::param("could not occupy every block"));
                    }
                };
                (z, w)
            }
        };
        let scale = rate_scale(k, n, self.b1, self.b2, self.delta, &expected)?;
        if matches!(self.theta, ThetaSpec::Uniform) && scale * self.b1 > 1.0 {
            return Err(Error::param(format!(
                "delta {} needs edge probability {} > 1",
                self.delta,
                scale * self.b1
            )));
        }
        let mut sizes = vec![0usize; k];
        z.iter().for_each(|&i| sizes[i] += 1);
        let b = rate_block_matrix(&sizes, self.b1, self.b2, scale);
        let draw = |rng: &mut R| -> Result<Vec<f64>> {
            match self.theta {
                ThetaSpec::Uniform => uniform_theta(&z),
                ThetaSpec::PowerLaw { x_min, beta } => {
                    Ok(sample_power_law_theta_with(&z, x_min, beta, rng)?.theta)
                }
            }
        };
        let theta_in = draw(rng)?;
        let theta_out = if self.directed { draw(rng)? } else { theta_in.clone() };
        DcsbmParams::new(b, z, theta_in, theta_out, self.directed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Delta,
    /// Geometric membership ratio.
    Ratio,
    #[serde(rename = "N")]
    Nodes,
    Alpha,
    Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExactMarker {
    #[serde(rename = "exact")]
    Exact,
}

/// Push tolerance, or `"exact"` for the exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Precision {
    Epsilon(f64),
    Exact(ExactMarker),
}

fn one() -> usize {
    1
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    pub replicates: usize,
    #[serde(default = "one")]
    pub seeds_per_run: usize,
    pub alpha: f64,
    pub epsilon: Precision,
    pub modes: Vec<AdjustMode>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

/// Settings of one grid point.
#[derive(Debug, Clone, PartialEq)]
struct PointSettings {
    model: ModelConfig,
    alpha: f64,
    seeds: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::canonical_pretty(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::param("replicates must be at least 1"));
        }
        if self.modes.is_empty() {
            return Err(Error::param("at least one adjustment mode is required"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param("tau must be positive"));
        }
        if let Precision::Epsilon(e) = self.epsilon {
            validate_epsilon(e)?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.grid.is_empty() {
                return Err(Error::param("sweep grid is empty"));
            }
            if sweep.grid.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("sweep grid values must be finite"));
            }
        }
        for i in 0..self.grid_len() {
            let point = self.point(i)?;
            validate_alpha(point.alpha)?;
            if point.seeds == 0 {
                return Err(Error::param("seeds_per_run must be at least 1"));
            }
            point.model.validate()?;
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        self.sweep.as_ref().map_or(1, |s| s.grid.len())
    }

    pub fn grid_value(&self, index: usize) -> Option<f64> {
        self.sweep.as_ref().map(|s| s.grid[index])
    }

    fn point(&self, index: usize) -> Result<PointSettings> {
        let mut point = PointSettings {
            model: self.model.clone(),
            alpha: self.alpha,
            seeds: self.seeds_per_run,
        };
        let Some(sweep) = &self.sweep else {
            return Ok(point);
        };
        let x = sweep.grid[index];
        let count = |x: f64| -> Result<usize> {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::param(format!("grid value {x} is not a positive integer")))
            }
        };
        match sweep.variable {
            SweepVariable::Delta => point.model.delta = x,
            SweepVariable::Alpha => point.alpha = x,
            SweepVariable::Nodes => point.model.n = count(x)?,
            SweepVariable::Seeds => point.seeds = count(x)?,
            SweepVariable::Ratio => match &mut point.model.memberships {
                Memberships::Geometric { ratio } => *ratio = x,
                _ => return Err(Error::param("ratio sweeps need geometric memberships")),
            },
        }
        Ok(point)
    }

    fn base(id: &str, model: ModelConfig, sweep: Sweep, epsilon: Precision) -> Self {
        ExperimentConfig {
            id: id.into(),
            model,
            sweep: Some(sweep),
            replicates: 20,
            seeds_per_run: 1,
            alpha: 0.15,
            epsilon,
            modes: vec![AdjustMode::Ppr, AdjustMode::Appr],
            tau: DEFAULT_TAU,
            master_seed: 20_190_601,
            output_dir: None,
        }
    }

    /// Power-law degree parameters, `K = 3`, `N = 1500`, `δ = 105`, with one
    /// and ten seeds.
    pub fn experiment1() -> Self {
        let model = ModelConfig {
            k: 3,
            n: 1500,
            b1: 0.6,
            b2: 0.2,
            delta: 105.0,
            memberships: Memberships::Multinomial { weights: vec![1.0; 3] },
            theta: ThetaSpec::PowerLaw { x_min: 1.0, beta: 2.5 },
            directed: false,
        };
        let sweep = Sweep { variable: SweepVariable::Seeds, grid: vec![1.0, 10.0] };
        Self::base("experiment1", model, sweep, Precision::Epsilon(1e-8))
    }

    /// Geometric block proportions `(1, b, b²)`, `N = 900`, `δ = 70`, exact PPR.
    pub fn experiment2() -> Self {
        let model = ModelConfig {
            k: 3,
            n: 900,
            b1: 0.6,
            b2: 0.2,
            delta: 70.0,
            memberships: Memberships::Geometric { ratio: 1.0 },
            theta: ThetaSpec::Uniform,
            directed: false,
        };
        let sweep = Sweep {
            variable: SweepVariable::Ratio,
            grid: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
        };
        Self::base("experiment2", model, sweep, Precision::Exact(ExactMarker::Exact))
    }

    /// Equal blocks, `N = 900`, expected degree swept over `15..=90`.
    pub fn experiment3() -> Self {
        let model = ModelConfig {
            k: 3,
            n: 900,
            b1: 0.6,
            b2: 0.2,
            delta: 90.0,
            memberships: Memberships::Balanced,
            theta: ThetaSpec::Uniform,
            directed: false,
        };
        let sweep = Sweep {
            variable: SweepVariable::Delta,
            grid: vec![15.0, 30.0, 45.0, 60.0, 75.0, 90.0],
        };
        Self::base("experiment3", model, sweep, Precision::Epsilon(1e-8))
    }

    /// Fixed `δ = 125`, ten seeds, graph size swept. Solved exactly.
    pub fn graph_size() -> Self {
        let model = ModelConfig {
            k: 3,
            n: 500,
            b1: 9.0,
            b2: 3.0,
            delta: 125.0,
            memberships: Memberships::Balanced,
            theta: ThetaSpec::Uniform,
            directed: false,
        };
        let sweep = Sweep {
            variable: SweepVariable::Nodes,
            grid: vec![500.0, 1000.0, 2000.0, 4000.0],
        };
        let mut config = Self::base("graph_size", model, sweep, Precision::Exact(ExactMarker::Exact));
        config.seeds_per_run = 10;
        config
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "experiment1" => Ok(Self::experiment1()),
            "experiment2" => Ok(Self::experiment2()),
            "experiment3" => Ok(Self::experiment3()),
            "graph_size" => Ok(Self::graph_size()),
            other => Err(Error::param(format!("unknown preset {other:?}"))),
        }
    }
}

/// Outcome of one replicate at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub grid_index: usize,
    pub grid_value: Option<f64>,
    pub replicate: usize,
    pub n_nodes: usize,
    pub n_arcs: usize,
    /// Size of the seed block; clusters are this large including seeds.
    pub target_size: usize,
    pub delta_alpha: f64,
    pub accuracy: BTreeMap<AdjustMode, f64>,
    pub ree: BTreeMap<AdjustMode, f64>,
    pub clipped: u64,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(grid_index: usize, grid_value: Option<f64>, replicate: usize, err: &Error) -> Self {
        ResultRow {
            grid_index,
            grid_value,
            replicate,
            n_nodes: 0,
            n_arcs: 0,
            target_size: 0,
            delta_alpha: f64::NAN,
            accuracy: BTreeMap::new(),
            ree: BTreeMap::new(),
            clipped: 0,
            runtime_ms: 0.0,
            error: Some(err.to_string()),
        }
    }
}

/// Writes result rows as CSV. Columns depend on the configured modes;
/// `runtime_ms` comes last so reproducibility checks can drop it.
pub struct RowWriter<W: Write> {
    writer: csv::Writer<W>,
    modes: Vec<AdjustMode>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::data(format!("{other:?}")),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl<W: Write> RowWriter<W> {
    pub fn new(inner: W, modes: &[AdjustMode]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        let mut header: Vec<String> = [
            "grid_index", "grid_value", "replicate", "n_nodes", "n_arcs", "target_size",
            "delta_alpha",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(modes.iter().map(|m| format!("accuracy_{m}")));
        header.extend(modes.iter().map(|m| format!("ree_{m}")));
        header.extend(["clipped", "error", "runtime_ms"].map(String::from));
        writer.write_record(&header).map_err(csv_err)?;
        Ok(RowWriter { writer, modes: modes.to_vec() })
    }

    pub fn write(&mut self, row: &ResultRow) -> Result<()> {
        let mut rec = vec![
            row.grid_index.to_string(),
            fmt_opt(row.grid_value),
            row.replicate.to_string(),
            row.n_nodes.to_string(),
            row.n_arcs.to_string(),
            row.target_size.to_string(),
            fmt_opt((!row.delta_alpha.is_nan()).then_some(row.delta_alpha)),
        ];
        rec.extend(self.modes.iter().map(|m| fmt_opt(row.accuracy.get(m).copied())));
        rec.extend(self.modes.iter().map(|m| fmt_opt(row.ree.get(m).copied())));
        rec.push(row.clipped.to_string());
        rec.push(row.error.clone().unwrap_or_default());
        rec.push(format!("{:.3}", row.runtime_ms));
        self.writer.write_record(&rec).map_err(csv_err)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

fn run_replicate(config: &ExperimentConfig, grid_index: usize, replicate: usize) -> Result<ResultRow> {
    let start = Instant::now();
    let point = config.point(grid_index)?;
    let mut rng = stream_rng(config.master_seed, replicate_stream(grid_index, replicate));
    let params = point.model.realize(&mut rng)?;
    let sampled = sample_dcsbm_with(&params, &mut rng)?;
    let graph = &sampled.graph;
    let n = graph.n_nodes();

    let block: Vec<usize> = params.members(0).collect();
    if block.len() < point.seeds {
        return Err(Error::param(format!(
            "seed block has {} nodes, fewer than {} seeds",
            block.len(),
            point.seeds
        )));
    }
    let mut seeds: Vec<usize> = sample_indices(&mut rng, block.len(), point.seeds)
        .into_iter()
        .map(|i| block[i])
        .collect();
    seeds.sort_unstable();
    let pi = PreferenceVector::uniform(&seeds)?;

    let p: BTreeMap<usize, f64> = match config.epsilon {
        Precision::Exact(_) => ExactSolver::default()
            .solve_graph(graph, &pi, point.alpha)?
            .into_iter()
            .enumerate()
            .filter(|(_, x)| *x > 0.0)
            .collect(),
        Precision::Epsilon(eps) => approximate_ppr(graph, &pi, point.alpha, eps)?.p,
    };
    let pop = population_ppr(&params, &pi, point.alpha)?;
    let dense = densify(&p, n);
    let d_in = graph.in_degrees();
    let (block_in, _) = block_degrees(params.b())?;

    let mut ree = BTreeMap::new();
    let mut accuracy = BTreeMap::new();
    let seed_set: BTreeSet<usize> = seeds.iter().copied().collect();
    let target = block.len();
    for &mode in &config.modes {
        let (sample, population): (Vec<f64>, Vec<f64>) = match mode {
            AdjustMode::Ppr => (dense.clone(), pop.ppr.clone()),
            // Isolated nodes carry mass only when they are seeds; their
            // degree is floored at one so the error stays finite.
            AdjustMode::Appr => (
                (0..n).map(|v| dense[v] / d_in[v].max(1) as f64).collect(),
                pop.appr.clone(),
            ),
            AdjustMode::Rppr => (
                (0..n).map(|v| dense[v] / (d_in[v] as f64 + config.tau)).collect(),
                (0..n)
                    .map(|v| {
                        let expected = params.theta_in()[v] * block_in[params.z()[v]];
                        pop.ppr[v] / (expected + config.tau)
                    })
                    .collect(),
            ),
        };
        ree.insert(mode, relative_entrywise_error(&sample, &population)?);

        let ranked = RankedCluster::build(&p, |u| Ok(d_in[u]), &seeds, mode, config.tau, n)?;
        let picks: Vec<usize> = ranked
            .nodes()
            .into_iter()
            .filter(|u| !seed_set.contains(u))
            .take(target - seed_set.len())
            .collect();
        if !picks.is_empty() {
            accuracy.insert(mode, recovery_accuracy(&picks, params.z(), 0)?);
        }
    }

    Ok(ResultRow {
        grid_index,
        grid_value: config.grid_value(grid_index),
        replicate,
        n_nodes: n,
        n_arcs: graph.n_arcs(),
        target_size: target,
        delta_alpha: pop.block.delta_alpha,
        accuracy,
        ree,
        clipped: sampled.report.clipped,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        error: None,
    })
}

/// Runs every (grid point, replicate) pair in parallel and hands rows to
/// `sink` in grid-then-replicate order as soon as each prefix is complete.
///
/// Accuracy counts non-seed nodes only: the cluster has the seed block's
/// size, seeds included, and accuracy is measured on the remaining picks.
/// A replicate that fails yields a row with `error` set; the run continues.
pub fn run_experiment<F>(config: &ExperimentConfig, mut sink: F) -> Result<Vec<ResultRow>>
where
    F: FnMut(&ResultRow) -> Result<()>,
{
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.grid_len())
        .flat_map(|g| (0..config.replicates).map(move |r| (g, r)))
        .collect();
    let (tx, rx) = mpsc::channel();
    let mut rows = Vec::with_capacity(jobs.len());
    std::thread::scope(|scope| -> Result<()> {
        let jobs = &jobs;
        scope.spawn(move || {
            jobs.par_iter().enumerate().for_each_with(tx, |tx, (i, &(g, r))| {
                let row = run_replicate(config, g, r).unwrap_or_else(|e| {
                    log::warn!("grid point {g}, replicate {r}: {e}");
                    ResultRow::failed(g, config.grid_value(g), r, &e)
                });
                let _ = tx.send((i, row));
            });
        });
        let mut pending = BTreeMap::new();
        for (i, row) in rx.iter() {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&rows.len()) {
                sink(&row)?;
                rows.push(row);
            }
        }
        Ok(())
    })?;
    Ok(rows)
}

/// Pairwise cluster overlap across teleportation constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub alphas: Vec<f64>,
    pub n: usize,
    pub mode: AdjustMode,
    /// `|C_i ∩ C_j| / n`.
    pub overlap: Vec<Vec<f64>>,
    /// Fraction of `n` shared by every cluster.
    pub common_fraction: f64,
    pub mean_pairwise: f64,
    /// Nodes with a positive estimate, per α.
    pub examined: Vec<usize>,
    /// Nodes touched by the push, per α.
    pub reached: Vec<u64>,
}

/// Clusters of size `n` for each α and their pairwise overlaps.
pub fn teleportation_sensitivity<A: GraphAccess + ?Sized>(
    access: &A,
    pi: &PreferenceVector,
    alphas: &[f64],
    epsilon: f64,
    n: usize,
    mode: AdjustMode,
    tau: f64,
) -> Result<SensitivityReport> {
    if alphas.len() < 2 {
        return Err(Error::param("need at least two teleportation constants"));
    }
    if n == 0 {
        return Err(Error::param("cluster size must be at least 1"));
    }
    let seeds: Vec<usize> = pi.support().collect();
    let mut clusters = Vec::with_capacity(alphas.len());
    let mut examined = Vec::new();
    let mut reached = Vec::new();
    for &alpha in alphas {
        let result = approximate_ppr(access, pi, alpha, epsilon)?;
        examined.push(result.p.len());
        reached.push(result.nodes_touched);
        let ranked = RankedCluster::build(
            &result.p,
            |u| Ok(access.in_degree(u)?),
            &seeds,
            mode,
            tau,
            n,
        )?;
        clusters.push(ranked.nodes().into_iter().collect::<BTreeSet<usize>>());
    }
    let k = clusters.len();
    let mut overlap = vec![vec![0.0; k]; k];
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            overlap[i][j] = clusters[i].intersection(&clusters[j]).count() as f64 / n as f64;
            if i < j {
                total += overlap[i][j];
            }
        }
    }
    let common = clusters[0]
        .iter()
        .filter(|u| clusters[1..].iter().all(|c| c.contains(u)))
        .count();
    Ok(SensitivityReport {
        alphas: alphas.to_vec(),
        n,
        mode,
        overlap,
        common_fraction: common as f64 / n as f64,
        mean_pairwise: total / (k * (k - 1) / 2) as f64,
        examined,
        reached,
    })
}

/// Convenience wrapper over an in-memory graph with string seed ids.
pub fn sensitivity_on_graph(
    graph: &Graph,
    seeds: &[&str],
    alphas: &[f64],
    epsilon: f64,
    n: usize,
    mode: AdjustMode,
    tau: f64,
) -> Result<SensitivityReport> {
    let idx = seeds
        .iter()
        .map(|s| graph.index_of(s))
        .collect::<Result<Vec<_>>>()?;
    let pi = PreferenceVector::uniform(&idx)?;
    teleportation_sensitivity(graph, &pi, alphas, epsilon, n, mode, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ree_examples() {
        let pop = [0.5, 0.25, 0.25];
        assert_eq!(relative_entrywise_error(&pop, &pop).unwrap(), 0.0);
        assert_eq!(relative_entrywise_error(&[0.0; 3], &pop).unwrap(), 1.0);
        let bumped = [0.5, 0.3, 0.25];
        assert!((relative_entrywise_error(&bumped, &pop).unwrap() - 0.1).abs() < 1e-15);
        assert!(relative_entrywise_error(&[0.0], &[0.0]).is_err());
        assert!(relative_entrywise_error(&[0.0], &pop).is_err());
    }

    #[test]
    fn presets_round_trip_through_json() {
        for name in ["experiment1", "experiment2", "experiment3", "graph_size"] {
            let c = ExperimentConfig::preset(name).unwrap();
            c.validate().unwrap();
            let text = c.to_json().unwrap();
            assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        }
        assert!(ExperimentConfig::preset("nope").is_err());
        let c = ExperimentConfig::experiment2();
        assert!(c.to_json().unwrap().contains("\"epsilon\": \"exact\""));
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::experiment3();
        c.replicates = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::experiment3();
        c.sweep.as_mut().unwrap().grid.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::experiment3();
        c.sweep = Some(Sweep { variable: SweepVariable::Ratio, grid: vec![1.2] });
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::experiment3();
        c.epsilon = Precision::Epsilon(0.0);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::experiment3();
        c.sweep = Some(Sweep { variable: SweepVariable::Nodes, grid: vec![2.5] });
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_point_single_replicate_gives_one_row() {
        let mut c = ExperimentConfig::experiment3();
        c.model.n = 90;
        c.model.delta = 20.0;
        c.sweep = None;
        c.replicates = 1;
        c.epsilon = Precision::Epsilon(1e-6);
        let mut seen = 0;
        let rows = run_experiment(&c, |_| {
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(seen, 1);
        assert!(rows[0].error.is_none(), "{:?}", rows[0].error);
        assert_eq!(rows[0].target_size, 30);
        assert!(rows[0].accuracy.contains_key(&AdjustMode::Appr));
    }

    #[test]
    fn infeasible_point_becomes_error_row() {
        let mut c = ExperimentConfig::experiment3();
        c.model.n = 60;
        c.replicates = 1;
        c.epsilon = Precision::Epsilon(1e-5);
        c.sweep = Some(Sweep { variable: SweepVariable::Delta, grid: vec![10.0, 500.0] });
        let rows = run_experiment(&c, |_| Ok(())).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("probability"));
    }
}
