//! Personalized PageRank: the local push approximation and exact solvers.
//!
//! The push keeps an estimate `p` and a residual `r`, starting from `r = π`,
//! and repeatedly moves mass out of any vertex whose residual is at least
//! `ε·d_out(u)`. It works on the lazy walk `(I + P)/2` with the rescaled
//! teleportation constant `α' = α/(2 − α)`, which has the same stationary
//! solution as the original walk. Violating vertices are processed in FIFO
//! order, so a run is a deterministic function of its inputs.
//!
//! Dangling vertices (no out-arcs) are treated as carrying one self-loop.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AccessError, Error, Result};
use crate::graph::{Graph, GraphAccess, IdMap};

/// Probability distribution over seed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceVector {
    entries: BTreeMap<usize, f64>,
}

impl PreferenceVector {
    /// Total mass must be 1 within this tolerance.
    pub const MASS_TOLERANCE: f64 = 1e-12;

    pub fn new(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (u, w) in entries {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::param(format!(
                    "preference mass for node {u} must be positive and finite, got {w}"
                )));
            }
            if map.insert(u, w).is_some() {
                return Err(Error::param(format!("node {u} listed twice in preference")));
            }
        }
        if map.is_empty() {
            return Err(Error::param("preference vector is empty"));
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > Self::MASS_TOLERANCE {
            return Err(Error::param(format!(
                "preference mass sums to {total}, expected 1"
            )));
        }
        Ok(Self { entries: map })
    }

    pub fn single(seed: usize) -> Self {
        Self {
            entries: BTreeMap::from([(seed, 1.0)]),
        }
    }

    /// Equal mass on each distinct node in `seeds`.
    pub fn uniform(seeds: &[usize]) -> Result<Self> {
        let distinct: std::collections::BTreeSet<usize> = seeds.iter().copied().collect();
        if distinct.is_empty() {
            return Err(Error::param("at least one seed is required"));
        }
        let w = 1.0 / distinct.len() as f64;
        Self::new(distinct.into_iter().map(|u| (u, w)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&u, &w)| (u, w))
    }

    pub fn get(&self, u: usize) -> f64 {
        self.entries.get(&u).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(n);
        for (u, w) in self.iter() {
            if u >= n {
                return Err(Error::NodeOutOfRange(u));
            }
            v[u] = w;
        }
        Ok(v)
    }
}

/// Output of a push run.
#[derive(Debug, Clone, PartialEq)]
pub struct PprResult {
    pub alpha: f64,
    pub epsilon: f64,
    /// Estimate, positive entries only.
    pub p: BTreeMap<usize, f64>,
    /// Remaining residual, positive entries only.
    pub r: BTreeMap<usize, f64>,
    pub pushes: u64,
    /// Vertices that ever held estimate or residual mass.
    pub nodes_touched: u64,
}

impl PprResult {
    pub fn estimate(&self, u: usize) -> f64 {
        self.p.get(&u).copied().unwrap_or(0.0)
    }

    pub fn residual(&self, u: usize) -> f64 {
        self.r.get(&u).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.p.values().sum::<f64>() + self.r.values().sum::<f64>()
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

pub(crate) fn validate_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// Rescaled teleportation constant of the lazy walk.
pub fn lazy_alpha(alpha: f64) -> f64 {
    alpha / (2.0 - alpha)
}

/// Upper bound on the number of vertices a push run can reach.
pub fn reach_bound(alpha: f64, epsilon: f64, seeds: usize) -> f64 {
    2.0 / (epsilon * (1.0 - lazy_alpha(alpha))) + seeds as f64
}

/// Resumable push state. [`approximate_ppr`] drives it to completion; the
/// crawler checkpoints and restores it between pushes.
///
/// Storage is indexed by node and grows on demand, so backends must hand out
/// dense indices. Neighbor lists must not repeat a node.
#[derive(Debug, Clone)]
pub struct PushState {
    alpha: f64,
    epsilon: f64,
    alpha_lazy: f64,
    p: Vec<f64>,
    r: Vec<f64>,
    touched: Vec<bool>,
    /// Touched nodes in order of first touch.
    order: Vec<usize>,
    queued: Vec<bool>,
    queue: VecDeque<usize>,
    pushes: u64,
}

impl PushState {
    fn empty(alpha: f64, epsilon: f64, pushes: u64) -> Result<Self> {
        validate_alpha(alpha)?;
        validate_epsilon(epsilon)?;
        Ok(Self {
            alpha,
            epsilon,
            alpha_lazy: lazy_alpha(alpha),
            p: Vec::new(),
            r: Vec::new(),
            touched: Vec::new(),
            order: Vec::new(),
            queued: Vec::new(),
            queue: VecDeque::new(),
            pushes,
        })
    }

    pub fn new<A: GraphAccess + ?Sized>(
        access: &A,
        pi: &PreferenceVector,
        alpha: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let mut state = Self::empty(alpha, epsilon, 0)?;
        for (u, w) in pi.iter() {
            state.touch(u);
            state.r[u] = w;
        }
        for (u, _) in pi.iter() {
            if state.violates(access, u)? {
                state.enqueue(u);
            }
        }
        Ok(state)
    }

    /// Rebuilds a state from its parts, e.g. a checkpoint. Entries of
    /// `frontier` are pushed in order before anything discovered later.
    pub fn from_parts(
        alpha: f64,
        epsilon: f64,
        p: impl IntoIterator<Item = (usize, f64)>,
        r: impl IntoIterator<Item = (usize, f64)>,
        frontier: impl IntoIterator<Item = usize>,
        pushes: u64,
    ) -> Result<Self> {
        let mut state = Self::empty(alpha, epsilon, pushes)?;
        for (u, x) in r {
            state.touch(u);
            state.r[u] = x;
        }
        for (u, x) in p {
            state.touch(u);
            state.p[u] = x;
        }
        for u in frontier {
            state.grow(u);
            if state.queued[u] {
                return Err(Error::data(format!("node {u} appears twice in frontier")));
            }
            state.enqueue(u);
        }
        Ok(state)
    }

    fn grow(&mut self, u: usize) {
        if u >= self.r.len() {
            let n = (u + 1).max(self.r.len() * 2);
            self.p.resize(n, 0.0);
            self.r.resize(n, 0.0);
            self.touched.resize(n, false);
            self.queued.resize(n, false);
        }
    }

    fn touch(&mut self, u: usize) {
        self.grow(u);
        if !self.touched[u] {
            self.touched[u] = true;
            self.order.push(u);
        }
    }

    fn enqueue(&mut self, u: usize) {
        if !self.queued[u] {
            self.queued[u] = true;
            self.queue.push_back(u);
        }
    }

    fn residual(&self, u: usize) -> f64 {
        self.r.get(u).copied().unwrap_or(0.0)
    }

    fn is_queued(&self, u: usize) -> bool {
        self.queued.get(u).copied().unwrap_or(false)
    }

    fn degree<A: GraphAccess + ?Sized>(access: &A, u: usize) -> Result<usize, AccessError> {
        Ok(access.out_degree(u)?.max(1))
    }

    fn violates<A: GraphAccess + ?Sized>(&self, access: &A, u: usize) -> Result<bool, AccessError> {
        let ru = self.residual(u);
        // Every degree is at least one, so small residuals never need a query.
        if ru < self.epsilon {
            return Ok(false);
        }
        Ok(ru >= self.epsilon * Self::degree(access, u)? as f64)
    }

    pub fn is_done(&self) -> bool {
        self.queue.is_empty()
    }

    /// Performs one push. Returns `false` once no vertex violates the
    /// threshold. On an access error the state is left unchanged.
    pub fn step<A: GraphAccess + ?Sized>(&mut self, access: &A) -> Result<bool, AccessError> {
        let Some(&u) = self.queue.front() else {
            return Ok(false);
        };
        let fetched = access.out_neighbors(u)?;
        let self_loop = [u];
        let nbrs: &[usize] = if fetched.is_empty() { &self_loop } else { &fetched };
        let d = nbrs.len() as f64;
        let ru = self.residual(u);
        let kept = (1.0 - self.alpha_lazy) * ru / 2.0;
        let share = kept / d;

        // Resolve every degree needed below before mutating anything, so a
        // failed query leaves the state consistent and resumable.
        let mut checks: Vec<Option<usize>> = Vec::with_capacity(nbrs.len());
        if share > 0.0 {
            let needs_check = |v: usize| {
                v != u && !self.is_queued(v) && self.residual(v) + share >= self.epsilon
            };
            let candidates: Vec<usize> = nbrs.iter().copied().filter(|&v| needs_check(v)).collect();
            if !candidates.is_empty() {
                access.prefetch(&candidates);
            }
            for &v in nbrs {
                checks.push(if needs_check(v) { Some(Self::degree(access, v)?) } else { None });
            }
        }

        self.queue.pop_front();
        self.queued[u] = false;
        self.pushes += 1;
        self.p[u] += self.alpha_lazy * ru;
        self.r[u] = kept;
        if share > 0.0 {
            for (&v, check) in nbrs.iter().zip(checks) {
                self.touch(v);
                self.r[v] += share;
                if let Some(dv) = check {
                    if !self.queued[v] && self.r[v] >= self.epsilon * dv as f64 {
                        self.enqueue(v);
                    }
                }
            }
        }
        let du = fetched.len().max(1) as f64;
        if !self.queued[u] && self.r[u] >= self.epsilon * du {
            self.enqueue(u);
        }
        Ok(true)
    }

    /// Pushes until no vertex violates the threshold.
    pub fn run<A: GraphAccess + ?Sized>(&mut self, access: &A) -> Result<(), AccessError> {
        while self.step(access)? {}
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    /// Positive estimates, in order of first touch.
    pub fn estimates(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.order.iter().map(|&u| (u, self.p[u])).filter(|&(_, x)| x > 0.0)
    }

    /// Residuals of every touched node (possibly zero), in order of first
    /// touch.
    pub fn residuals(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.order.iter().map(|&u| (u, self.r[u]))
    }

    /// Pending violating vertices in push order.
    pub fn frontier(&self) -> impl Iterator<Item = usize> + '_ {
        self.queue.iter().copied()
    }

    pub fn nodes_touched(&self) -> u64 {
        self.order.len() as u64
    }

    pub fn result(&self) -> PprResult {
        let positive = |v: &[f64]| -> BTreeMap<usize, f64> {
            self.order.iter().map(|&u| (u, v[u])).filter(|&(_, x)| x > 0.0).collect()
        };
        PprResult {
            alpha: self.alpha,
            epsilon: self.epsilon,
            p: positive(&self.p),
            r: positive(&self.r),
            pushes: self.pushes,
            nodes_touched: self.nodes_touched(),
        }
    }
}

/// Push approximation of the PPR vector over any local-access graph.
///
/// On termination every vertex `u` satisfies `r_u < ε·max(d_out(u), 1)`,
/// and every pushed vertex is within `ε·d_out(u)` of the exact value.
pub fn approximate_ppr<A: GraphAccess + ?Sized>(
    access: &A,
    pi: &PreferenceVector,
    alpha: f64,
    epsilon: f64,
) -> Result<PprResult> {
    let mut state = PushState::new(access, pi, alpha, epsilon)?;
    state.run(access)?;
    Ok(state.result())
}

/// Serialized form of a [`PprResult`], keyed by external ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PprDocument {
    pub alpha: f64,
    pub epsilon: f64,
    pub p: BTreeMap<String, f64>,
    pub r: BTreeMap<String, f64>,
    pub pushes: u64,
    pub nodes_touched: u64,
}

impl PprDocument {
    pub fn from_result(result: &PprResult, ids: &IdMap) -> Result<Self> {
        let name = |u: usize| -> Result<String> {
            ids.name(u)
                .map(str::to_owned)
                .ok_or(Error::NodeOutOfRange(u))
        };
        Ok(Self {
            alpha: result.alpha,
            epsilon: result.epsilon,
            p: result
                .p
                .iter()
                .map(|(&u, &x)| Ok((name(u)?, x)))
                .collect::<Result<_>>()?,
            r: result
                .r
                .iter()
                .map(|(&u, &x)| Ok((name(u)?, x)))
                .collect::<Result<_>>()?,
            pushes: result.pushes,
            nodes_touched: result.nodes_touched,
        })
    }

    pub fn to_result(&self, ids: &IdMap) -> Result<PprResult> {
        self.validate()?;
        let index = |id: &String| ids.get(id).ok_or_else(|| Error::UnknownNode(id.clone()));
        Ok(PprResult {
            alpha: self.alpha,
            epsilon: self.epsilon,
            p: self
                .p
                .iter()
                .map(|(id, &x)| Ok((index(id)?, x)))
                .collect::<Result<_>>()?,
            r: self
                .r
                .iter()
                .map(|(id, &x)| Ok((index(id)?, x)))
                .collect::<Result<_>>()?,
            pushes: self.pushes,
            nodes_touched: self.nodes_touched,
        })
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        validate_epsilon(self.epsilon)?;
        for (id, &x) in self.p.iter().chain(self.r.iter()) {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::data(format!("mass for {id:?} is {x}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::canonical_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }
}

/// Settings for the exact solvers.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolver {
    /// Largest dimension solved by dense factorization.
    pub dense_limit: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self {
            dense_limit: 10_000,
            tolerance: 1e-12,
            max_iterations: 1_000_000,
        }
    }
}

pub(crate) fn validate_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::param(format!(
            "transition matrix must be square, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    for (i, row) in p.row_iter().enumerate() {
        if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::param(format!("row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::param(format!("row {i} sums to {s}, not 1")));
        }
    }
    Ok(())
}

fn clean_probability(mut v: DVector<f64>) -> Result<DVector<f64>> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-12 {
                return Err(Error::Numerical(format!("solution has negative entry {x}")));
            }
            *x = 0.0;
        }
    }
    Ok(v)
}

impl ExactSolver {
    /// Solves `pᵀ = απᵀ + (1 − α)pᵀP`. With `α = 0` this is the stationary
    /// distribution, which must be unique.
    pub fn solve_dense(
        &self,
        p: &DMatrix<f64>,
        pi: &PreferenceVector,
        alpha: f64,
    ) -> Result<DVector<f64>> {
        validate_stochastic(p)?;
        if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(Error::param(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let n = p.nrows();
        let pi = pi.to_dense(n)?;
        if alpha == 1.0 {
            return Ok(pi);
        }
        if n > self.dense_limit {
            return self.power_iteration(p, &pi, alpha);
        }
        let mut system = DMatrix::identity(n, n) - p.transpose() * (1.0 - alpha);
        let mut rhs = pi * alpha;
        if alpha == 0.0 {
            // Replace one balance equation by the normalization constraint.
            system.row_mut(n - 1).fill(1.0);
            rhs.fill(0.0);
            rhs[n - 1] = 1.0;
        }
        let solution = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular PPR system".into()))?;
        if solution.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite PPR solution".into()));
        }
        clean_probability(solution)
    }

    fn power_iteration(
        &self,
        p: &DMatrix<f64>,
        pi: &DVector<f64>,
        alpha: f64,
    ) -> Result<DVector<f64>> {
        let pt = p.transpose();
        let mut x = pi.clone();
        for _ in 0..self.max_iterations {
            let next = if alpha == 0.0 {
                // Lazy walk: same stationary law, no periodicity.
                (&x + &pt * &x) * 0.5
            } else {
                pi * alpha + (&pt * &x) * (1.0 - alpha)
            };
            let change = (&next - &x).abs().sum();
            x = next;
            if change < self.tolerance {
                return clean_probability(x);
            }
        }
        Err(Error::Numerical("power iteration did not converge".into()))
    }

    /// Exact PPR on a sparse graph by power iteration.
    ///
    /// For `α > 0` the iteration count is fixed in advance from the
    /// contraction factor, so the result is within `tolerance` in L1.
    pub fn solve_graph(&self, graph: &Graph, pi: &PreferenceVector, alpha: f64) -> Result<Vec<f64>> {
        if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
            return Err(Error::param(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let n = graph.n_nodes();
        let pi: Vec<f64> = pi.to_dense(n)?.iter().copied().collect();
        if alpha == 1.0 {
            return Ok(pi);
        }
        let mut x = pi.clone();
        let mut next = vec![0.0; n];
        let propagate = |x: &[f64], out: &mut [f64]| {
            for u in 0..n {
                let mass = x[u];
                if mass == 0.0 {
                    continue;
                }
                let nbrs = graph.out_neighbors_slice(u);
                if nbrs.is_empty() {
                    out[u] += mass;
                } else {
                    let w = mass / nbrs.len() as f64;
                    for &v in nbrs {
                        out[v] += w;
                    }
                }
            }
        };
        if alpha > 0.0 {
            let rounds = ((self.tolerance / 2.0).ln() / (1.0 - alpha).ln()).ceil().max(1.0) as usize;
            for _ in 0..rounds.min(self.max_iterations) {
                next.iter_mut().zip(&pi).for_each(|(y, &w)| *y = alpha * w);
                let mut walk = vec![0.0; n];
                propagate(&x, &mut walk);
                for (y, w) in next.iter_mut().zip(walk) {
                    *y += (1.0 - alpha) * w;
                }
                std::mem::swap(&mut x, &mut next);
            }
            return Ok(x);
        }
        for _ in 0..self.max_iterations {
            next.iter_mut().zip(&x).for_each(|(y, &w)| *y = 0.5 * w);
            let mut walk = vec![0.0; n];
            propagate(&x, &mut walk);
            for (y, w) in next.iter_mut().zip(walk) {
                *y += 0.5 * w;
            }
            let change: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
            std::mem::swap(&mut x, &mut next);
            if change < self.tolerance {
                return Ok(x);
            }
        }
        Err(Error::Numerical("power iteration did not converge".into()))
    }
}

/// Exact PPR for a dense transition matrix with default solver settings.
pub fn exact_ppr_dense(p: &DMatrix<f64>, pi: &PreferenceVector, alpha: f64) -> Result<DVector<f64>> {
    ExactSolver::default().solve_dense(p, pi, alpha)
}

/// Truncated landing-probability series `α Σ_{s=0}^{S} (1−α)^s πᵀPˢ`.
pub fn ppr_series(
    p: &DMatrix<f64>,
    pi: &PreferenceVector,
    alpha: f64,
    steps: usize,
) -> Result<DVector<f64>> {
    validate_stochastic(p)?;
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return Err(Error::param(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let pt = p.transpose();
    let mut landing = pi.to_dense(p.nrows())?;
    let mut acc = &landing * alpha;
    let mut weight = alpha;
    for _ in 0..steps {
        landing = &pt * landing;
        weight *= 1.0 - alpha;
        acc += &landing * weight;
    }
    Ok(acc)
}
