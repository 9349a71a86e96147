//! Degree-adjusted ranking of PPR vectors and cluster quality metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, IdMap};

/// Regularizer used by [`AdjustMode::Rppr`] unless told otherwise.
pub const DEFAULT_TAU: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustMode {
    /// Raw PPR mass.
    Ppr,
    /// Mass divided by in-degree.
    Appr,
    /// Mass divided by in-degree plus `τ`.
    Rppr,
}

impl AdjustMode {
    pub const ALL: [AdjustMode; 3] = [AdjustMode::Ppr, AdjustMode::Appr, AdjustMode::Rppr];

    pub fn as_str(self) -> &'static str {
        match self {
            AdjustMode::Ppr => "ppr",
            AdjustMode::Appr => "appr",
            AdjustMode::Rppr => "rppr",
        }
    }
}

impl fmt::Display for AdjustMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdjustMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppr" => Ok(AdjustMode::Ppr),
            "appr" => Ok(AdjustMode::Appr),
            "rppr" => Ok(AdjustMode::Rppr),
            other => Err(Error::param(format!("unknown adjustment mode {other:?}"))),
        }
    }
}

/// `p / (d_in + τ)`.
pub fn regularized_score(p: f64, in_degree: usize, tau: f64) -> f64 {
    p / (in_degree as f64 + tau)
}

fn check_tau(mode: AdjustMode, tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::param(format!("tau must be finite and nonnegative, got {tau}")));
    }
    if mode == AdjustMode::Rppr && tau == 0.0 {
        return Err(Error::param("rppr needs tau > 0"));
    }
    Ok(())
}

/// Score of one node. Zero mass scores zero. Under `appr`, a seed with mass
/// and no in-arcs scores `+∞`; any other node with mass and no in-arcs is
/// inconsistent data.
fn score_one(u: usize, p: f64, d_in: usize, is_seed: bool, mode: AdjustMode, tau: f64) -> Result<f64> {
    if p == 0.0 {
        return Ok(0.0);
    }
    match mode {
        AdjustMode::Ppr => Ok(p),
        AdjustMode::Rppr => Ok(regularized_score(p, d_in, tau)),
        AdjustMode::Appr if d_in > 0 => Ok(p / d_in as f64),
        AdjustMode::Appr if is_seed => Ok(f64::INFINITY),
        AdjustMode::Appr => Err(Error::data(format!(
            "node {u} has PPR mass {p} but no incoming arcs"
        ))),
    }
}

/// Adjusted scores for every node present in `p`.
pub fn adjust<F>(
    p: &BTreeMap<usize, f64>,
    mut in_degree: F,
    seeds: &[usize],
    mode: AdjustMode,
    tau: f64,
) -> Result<BTreeMap<usize, f64>>
where
    F: FnMut(usize) -> Result<usize>,
{
    check_tau(mode, tau)?;
    let seeds: BTreeSet<usize> = seeds.iter().copied().collect();
    let mut out = BTreeMap::new();
    for (&u, &mass) in p {
        let d_in = if mode == AdjustMode::Ppr { 0 } else { in_degree(u)? };
        out.insert(u, score_one(u, mass, d_in, seeds.contains(&u), mode, tau)?);
    }
    Ok(out)
}

fn order(a: (usize, f64), b: (usize, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `n` highest scores, descending, ties broken by smaller index.
pub fn top_cluster(scores: &BTreeMap<usize, f64>, n: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = scores.iter().map(|(&u, &s)| (u, s)).collect();
    all.sort_by(|&a, &b| order(a, b));
    all.truncate(n);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterEntry {
    pub node: usize,
    pub p: f64,
    pub score: f64,
    pub in_degree: usize,
    pub is_seed: bool,
}

/// A ranked local cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCluster {
    pub mode: AdjustMode,
    /// Regularizer, present for `rppr` only.
    pub tau: Option<f64>,
    pub n: usize,
    pub entries: Vec<ClusterEntry>,
}

impl RankedCluster {
    /// Ranks nodes with positive mass by their adjusted score.
    pub fn build<F>(
        p: &BTreeMap<usize, f64>,
        mut in_degree: F,
        seeds: &[usize],
        mode: AdjustMode,
        tau: f64,
        n: usize,
    ) -> Result<Self>
    where
        F: FnMut(usize) -> Result<usize>,
    {
        if n == 0 {
            return Err(Error::param("cluster size must be at least 1"));
        }
        check_tau(mode, tau)?;
        let seed_set: BTreeSet<usize> = seeds.iter().copied().collect();
        let mut entries = Vec::new();
        for (&u, &mass) in p.iter().filter(|(_, &m)| m > 0.0) {
            let d_in = in_degree(u)?;
            let is_seed = seed_set.contains(&u);
            let score = score_one(u, mass, d_in, is_seed, mode, tau)?;
            entries.push(ClusterEntry { node: u, p: mass, score, in_degree: d_in, is_seed });
        }
        entries.sort_by(|a, b| order((a.node, a.score), (b.node, b.score)));
        entries.truncate(n);
        Ok(RankedCluster {
            mode,
            tau: (mode == AdjustMode::Rppr).then_some(tau),
            n,
            entries,
        })
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.node).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes `rank,external_id,p,score,in_degree,is_seed` rows, ranks from 1.
    pub fn write_csv<W: Write>(&self, writer: W, ids: &IdMap) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rank", "external_id", "p", "score", "in_degree", "is_seed"])
            .map_err(csv_error)?;
        for (rank, e) in self.entries.iter().enumerate() {
            let id = ids.name(e.node).ok_or(Error::NodeOutOfRange(e.node))?;
            w.write_record([
                (rank + 1).to_string(),
                id.to_string(),
                e.p.to_string(),
                e.score.to_string(),
                e.in_degree.to_string(),
                e.is_seed.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::data(format!("{other:?}")),
    }
}

/// Cluster summary written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub mode: AdjustMode,
    pub tau: Option<f64>,
    pub n: usize,
    pub in_out_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

/// `2·(arcs inside C) / Σ_{u∈C} (d_in(u) + d_out(u))`. Duplicates in `C`
/// are ignored.
pub fn in_out_ratio(graph: &Graph, cluster: &[usize]) -> Result<f64> {
    let members: BTreeSet<usize> = cluster.iter().copied().collect();
    if members.is_empty() {
        return Err(Error::param("cluster is empty"));
    }
    let mut internal = 0usize;
    let mut volume = 0usize;
    for &u in &members {
        if u >= graph.n_nodes() {
            return Err(Error::NodeOutOfRange(u));
        }
        let nbrs = graph.out_neighbors_slice(u);
        internal += nbrs.iter().filter(|v| members.contains(v)).count();
        volume += nbrs.len() + graph.in_degree_of(u);
    }
    if volume == 0 {
        return Err(Error::data("in-and-out ratio undefined: cluster has no incident arcs"));
    }
    Ok(2.0 * internal as f64 / volume as f64)
}

/// Fraction of `cluster` whose block (zero-based) is `target_block`.
pub fn recovery_accuracy(cluster: &[usize], z: &[usize], target_block: usize) -> Result<f64> {
    if cluster.is_empty() {
        return Err(Error::param("cluster is empty"));
    }
    let mut hits = 0usize;
    for &v in cluster {
        if *z.get(v).ok_or(Error::NodeOutOfRange(v))? == target_block {
            hits += 1;
        }
    }
    Ok(hits as f64 / cluster.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(entries: &[(usize, f64)]) -> BTreeMap<usize, f64> {
        entries.iter().copied().collect()
    }

    #[test]
    fn top_cluster_order_and_ties() {
        let s = map(&[(0, 0.5), (1, 0.3), (2, 0.2)]);
        assert_eq!(top_cluster(&s, 2), vec![(0, 0.5), (1, 0.3)]);
        let tie = map(&[(4, 0.5), (2, 0.5)]);
        assert_eq!(top_cluster(&tie, 1), vec![(2, 0.5)]);
        assert_eq!(top_cluster(&s, 10).len(), 3);
    }

    #[test]
    fn adjustment_modes() {
        let p = map(&[(0, 0.4), (1, 0.3), (2, 0.0)]);
        let deg = [2usize, 3, 0];
        let d = |u: usize| Ok(deg[u]);
        assert_eq!(adjust(&p, d, &[], AdjustMode::Ppr, 0.0).unwrap(), p);
        let a = adjust(&p, d, &[], AdjustMode::Appr, 0.0).unwrap();
        for (u, e) in [(0, 0.2), (1, 0.1), (2, 0.0)] {
            assert!((a[&u] - e).abs() < 1e-15);
        }
        let r = adjust(&p, d, &[], AdjustMode::Rppr, 2.0).unwrap();
        assert_eq!(r[&0], 0.1);
        assert!(adjust(&p, d, &[], AdjustMode::Rppr, 0.0).is_err());
        assert!(adjust(&p, d, &[], AdjustMode::Appr, -1.0).is_err());
        assert_eq!(regularized_score(0.6, 3, 0.0), 0.6 / 3.0);
    }

    #[test]
    fn zero_in_degree_convention() {
        let p = map(&[(0, 0.5), (1, 0.5)]);
        let deg = [0usize, 4];
        let d = |u: usize| Ok(deg[u]);
        let a = adjust(&p, d, &[0], AdjustMode::Appr, 0.0).unwrap();
        assert_eq!(a[&0], f64::INFINITY);
        let err = adjust(&p, d, &[1], AdjustMode::Appr, 0.0).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        let c = RankedCluster::build(&p, d, &[0], AdjustMode::Appr, 0.0, 1).unwrap();
        assert_eq!(c.nodes(), vec![0]);
        assert!(c.entries[0].is_seed);
    }

    #[test]
    fn equal_degrees_preserve_order() {
        let p = map(&[(0, 0.1), (1, 0.4), (2, 0.25), (3, 0.25)]);
        let d = |_| Ok(7);
        let raw = RankedCluster::build(&p, d, &[], AdjustMode::Ppr, 0.0, 4).unwrap();
        let adj = RankedCluster::build(&p, d, &[], AdjustMode::Appr, 0.0, 4).unwrap();
        assert_eq!(raw.nodes(), vec![1, 2, 3, 0]);
        assert_eq!(raw.nodes(), adj.nodes());
    }

    #[test]
    fn cluster_excludes_zero_mass_and_writes_csv() {
        let p = map(&[(0, 0.7), (1, 0.3), (2, 0.0)]);
        let c = RankedCluster::build(&p, |_| Ok(1), &[0], AdjustMode::Rppr, DEFAULT_TAU, 5).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.tau, Some(100.0));
        let mut out = Vec::new();
        c.write_csv(&mut out, &IdMap::sequential(3)).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rank,external_id,p,score,in_degree,is_seed");
        assert!(lines[1].starts_with("1,0,0.7,"));
        assert!(lines[1].ends_with(",1,true"));
        assert_eq!(lines.len(), 3);
        assert!(RankedCluster::build(&p, |_| Ok(1), &[], AdjustMode::Ppr, 0.0, 0).is_err());
    }

    #[test]
    fn in_out_ratio_examples() {
        let text = "a\tb\nb\tc\nc\ta\nc\td\n";
        let g = Graph::load_edge_list(text.as_bytes(), false).unwrap();
        let (a, b, c, d) = (0, 1, 2, 3);
        assert!((in_out_ratio(&g, &[a, b, c]).unwrap() - 12.0 / 14.0).abs() < 1e-15);
        assert_eq!(in_out_ratio(&g, &[a, b, c, d]).unwrap(), 1.0);
        assert_eq!(in_out_ratio(&g, &[a, d]).unwrap(), 0.0);
        assert!(in_out_ratio(&g, &[]).is_err());

        let directed = Graph::load_edge_list("x\ty\ny\tz\n".as_bytes(), true).unwrap();
        assert_eq!(in_out_ratio(&directed, &[0, 1, 2]).unwrap(), 1.0);
        let lonely = Graph::from_arcs(IdMap::sequential(2), &[(0, 0)], true).unwrap();
        assert!(in_out_ratio(&lonely, &[1]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let z = [0, 0, 1, 1];
        assert_eq!(recovery_accuracy(&[0, 1], &z, 0).unwrap(), 1.0);
        assert_eq!(recovery_accuracy(&[2, 3], &z, 0).unwrap(), 0.0);
        assert_eq!(recovery_accuracy(&[0, 2], &z, 0).unwrap(), 0.5);
        assert!(recovery_accuracy(&[], &z, 0).is_err());
        assert!(recovery_accuracy(&[9], &z, 0).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in AdjustMode::ALL {
            assert_eq!(m.as_str().parse::<AdjustMode>().unwrap(), m);
        }
        assert!("aPPR".parse::<AdjustMode>().is_err());
    }
}
