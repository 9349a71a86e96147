//! Immutable compressed adjacency storage and the local-query access contract.
//!
//! Nodes carry arbitrary string ids at the boundary and dense indices
//! internally. Indices are assigned in first-appearance order when loading an
//! edge list, so a graph written back with [`Graph::write_edge_list`] reloads
//! to the same structure.

use std::borrow::Cow;
use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{AccessError, Error, Result};

/// Local-query view of a graph: the only operations the push algorithm needs.
///
/// Implementations must be frozen for the duration of a run: repeated queries
/// for the same node return identical answers.
pub trait GraphAccess {
    /// Out-neighbors of `u`, in a stable order.
    fn out_neighbors(&self, u: usize) -> Result<Cow<'_, [usize]>, AccessError>;

    fn out_degree(&self, u: usize) -> Result<usize, AccessError> {
        Ok(self.out_neighbors(u)?.len())
    }

    fn in_degree(&self, u: usize) -> Result<usize, AccessError>;

    /// Hint that the listed nodes are about to be queried. Remote backends
    /// may fetch them concurrently; the default does nothing.
    fn prefetch(&self, _nodes: &[usize]) {}
}

/// Bidirectional mapping between external string ids and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ids `"0"`, `"1"`, ... `"n-1"`.
    pub fn sequential(n: usize) -> Self {
        let mut map = Self::new();
        for i in 0..n {
            map.intern(&i.to_string());
        }
        map
    }

    /// Returns the index for `id`, assigning the next free index if unseen.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.names.len();
        self.names.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Writes the `index,external_id` CSV form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["index", "external_id"]).map_err(csv_io)?;
        for (i, name) in self.names.iter().enumerate() {
            out.write_record([i.to_string().as_str(), name.as_str()])
                .map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the `index,external_id` CSV form. Indices must be `0..n` in order
    /// and ids must be unique and non-empty.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let mut map = IdMap::new();
        for (row, record) in input.records().enumerate() {
            let line = row + 2;
            let record = record.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if record.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let index: usize = record[0].parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid index {:?}", &record[0]),
            })?;
            let id = &record[1];
            if index != map.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected index {}, found {index}", map.len()),
                });
            }
            if id.is_empty() || id.contains('\t') || id.contains('\n') {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid external id {id:?}"),
                });
            }
            if map.get(id).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate external id {id:?}"),
                });
            }
            map.intern(id);
        }
        Ok(map)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Splits one edge-list line into `(source, target)`. `Ok(None)` for blank
/// and comment lines.
fn parse_edge_line(line: &str) -> std::result::Result<Option<(&str, &str)>, &'static str> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let mut fields = line.split('\t');
    let (Some(src), Some(dst), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err("expected exactly two tab-separated fields");
    };
    if src.is_empty() || dst.is_empty() {
        return Err("empty node id");
    }
    if src.contains('\n') || dst.contains('\n') {
        return Err("node id contains a newline");
    }
    Ok(Some((src, dst)))
}

/// Compressed out-adjacency with in-degrees and the external id mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    directed: bool,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_degree: Vec<usize>,
    ids: IdMap,
}

impl Graph {
    /// Builds a graph over `ids.len()` nodes from an arc list. Undirected
    /// graphs are symmetrized; duplicate arcs collapse to one.
    pub fn from_arcs(ids: IdMap, arcs: &[(usize, usize)], directed: bool) -> Result<Self> {
        let n = ids.len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in arcs {
            if u >= n {
                return Err(Error::NodeOutOfRange(u));
            }
            if v >= n {
                return Err(Error::NodeOutOfRange(v));
            }
            rows[u].push(v);
            if !directed && u != v {
                rows[v].push(u);
            }
        }
        let mut out_offsets = Vec::with_capacity(n + 1);
        let mut out_targets = Vec::with_capacity(arcs.len() * if directed { 1 } else { 2 });
        let mut in_degree = vec![0usize; n];
        out_offsets.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            for &v in row.iter() {
                in_degree[v] += 1;
            }
            out_targets.extend_from_slice(row);
            out_offsets.push(out_targets.len());
        }
        Ok(Self {
            directed,
            out_offsets,
            out_targets,
            in_degree,
            ids,
        })
    }

    /// Parses a tab-separated edge list. Lines starting with `#` and blank
    /// lines are ignored.
    pub fn load_edge_list<R: BufRead>(source: R, directed: bool) -> Result<Self> {
        Self::load_edge_list_with_ids(source, directed, IdMap::new())
    }

    /// Like [`Graph::load_edge_list`], but indices for ids already present in
    /// `ids` are fixed in advance. This keeps isolated nodes and a persisted
    /// index order across a save/load cycle.
    pub fn load_edge_list_with_ids<R: BufRead>(
        mut source: R,
        directed: bool,
        mut ids: IdMap,
    ) -> Result<Self> {
        let mut arcs = Vec::new();
        let mut buf = Vec::new();
        let mut line_no = 0usize;
        loop {
            buf.clear();
            if source.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            line_no += 1;
            let line = std::str::from_utf8(&buf).map_err(|_| Error::Parse {
                line: line_no,
                message: "invalid UTF-8".into(),
            })?;
            let Some((src, dst)) = parse_edge_line(line).map_err(|message| Error::Parse {
                line: line_no,
                message: message.into(),
            })?
            else {
                continue;
            };
            let u = ids.intern(src);
            let v = ids.intern(dst);
            arcs.push((u, v));
        }
        if ids.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Self::from_arcs(ids, &arcs, directed)
    }

    /// Writes the graph as an edge list whose line order reproduces the
    /// current index assignment on reload. Undirected edges are written
    /// once. Isolated nodes cannot be represented in the edge list; persist
    /// the [`IdMap`] alongside to keep them.
    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> Result<()> {
        let n = self.n_nodes();
        let keep = |u: usize, v: usize| self.directed || u <= v;
        // Reverse adjacency restricted to lower-indexed sources.
        let mut lower_in: Vec<Option<usize>> = vec![None; n];
        for u in 0..n {
            for &v in self.out_neighbors_slice(u) {
                if u < v && lower_in[v].is_none() {
                    lower_in[v] = Some(u);
                }
            }
        }
        let mut emitted: std::collections::HashSet<(usize, usize)> = Default::default();
        let mut order: Vec<(usize, usize)> = Vec::new();
        let mut emit = |u: usize, v: usize, order: &mut Vec<(usize, usize)>| {
            let arc = if self.directed || u <= v { (u, v) } else { (v, u) };
            if emitted.insert(arc) {
                order.push((u, v));
            }
        };
        let mut seen = 0usize;
        while seen < n {
            let t = seen;
            if let Some(u) = lower_in[t] {
                emit(u, t, &mut order);
                seen += 1;
            } else if let Some(&v) = self.out_neighbors_slice(t).iter().find(|&&v| v <= t) {
                emit(t, v, &mut order);
                seen += 1;
            } else if self.out_neighbors_slice(t).contains(&(t + 1)) {
                emit(t, t + 1, &mut order);
                seen += 2;
            } else {
                // Isolated in the edge-list sense (or introduced only through
                // a later line); nothing can place it here.
                seen += 1;
            }
        }
        for u in 0..n {
            for &v in self.out_neighbors_slice(u) {
                if keep(u, v) {
                    emit(u, v, &mut order);
                }
            }
        }
        let mut out = std::io::BufWriter::new(&mut writer);
        for (u, v) in order {
            let (src, dst) = (&self.ids.names[u], &self.ids.names[v]);
            let line = format!("{src}\t{dst}\n");
            if parse_edge_line(&line) != Ok(Some((src, dst))) {
                return Err(Error::data(format!("ids {src:?} and {dst:?} cannot be written as an edge-list line")));
            }
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.out_offsets.len() - 1
    }

    /// Number of stored arcs (twice the edge count for undirected graphs,
    /// minus self-loops).
    pub fn n_arcs(&self) -> usize {
        self.out_targets.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    pub fn out_offsets(&self) -> &[usize] {
        &self.out_offsets
    }

    pub fn out_targets(&self) -> &[usize] {
        &self.out_targets
    }

    pub fn in_degrees(&self) -> &[usize] {
        &self.in_degree
    }

    pub fn out_neighbors_slice(&self, u: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    pub fn out_degree_of(&self, u: usize) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    pub fn in_degree_of(&self, u: usize) -> usize {
        self.in_degree[u]
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.out_neighbors_slice(u).binary_search(&v).is_ok()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.ids.get(id).ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    /// Random-walk transition probabilities out of `u`. A node without
    /// out-arcs behaves as if it had a single self-loop.
    pub fn transition_row(&self, u: usize) -> Result<Vec<(usize, f64)>> {
        if u >= self.n_nodes() {
            return Err(Error::NodeOutOfRange(u));
        }
        let nbrs = self.out_neighbors_slice(u);
        if nbrs.is_empty() {
            return Ok(vec![(u, 1.0)]);
        }
        let w = 1.0 / nbrs.len() as f64;
        Ok(nbrs.iter().map(|&v| (v, w)).collect())
    }

    /// Dense row-stochastic transition matrix, for small-graph oracles.
    pub fn dense_transition(&self) -> DMatrix<f64> {
        let n = self.n_nodes();
        let mut p = DMatrix::zeros(n, n);
        for u in 0..n {
            let nbrs = self.out_neighbors_slice(u);
            if nbrs.is_empty() {
                p[(u, u)] = 1.0;
            } else {
                let w = 1.0 / nbrs.len() as f64;
                for &v in nbrs {
                    p[(u, v)] += w;
                }
            }
        }
        p
    }
}

impl GraphAccess for Graph {
    fn out_neighbors(&self, u: usize) -> Result<Cow<'_, [usize]>, AccessError> {
        if u >= self.n_nodes() {
            return Err(AccessError::OutOfRange(u));
        }
        Ok(Cow::Borrowed(self.out_neighbors_slice(u)))
    }

    fn out_degree(&self, u: usize) -> Result<usize, AccessError> {
        if u >= self.n_nodes() {
            return Err(AccessError::OutOfRange(u));
        }
        Ok(self.out_degree_of(u))
    }

    fn in_degree(&self, u: usize) -> Result<usize, AccessError> {
        self.in_degree
            .get(u)
            .copied()
            .ok_or(AccessError::OutOfRange(u))
    }
}
