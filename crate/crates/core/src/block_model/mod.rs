//! Degree-corrected stochastic block models and their population analytics.
//!
//! Block matrices are `K×K` with `B[i][j]` the expected number of arcs from
//! block `i` to block `j`; degree parameters sum to one within each block.
//! Block indices are zero-based in code and one-based in parameter files.

mod landing;
mod population;
mod sample;

pub use landing::{landing_probabilities, ld_ppr_equivalence, LdEquivalenceReport};
pub use population::{
    population_adjacency, population_ppr, population_transition, PopulationPpr,
    POPULATION_DENSE_LIMIT,
};
pub use sample::{
    draw_memberships, four_parameter_snr, make_four_parameter_sbm, rate_block_matrix,
    rate_scale, sample_dcsbm, sample_dcsbm_with, sample_power_law_theta,
    sample_power_law_theta_with, uniform_theta, DcsbmSpec, FourParameterSbm, MembershipSpec,
    PowerLawTheta, SampleReport, SampledGraph, ThetaSpec, CLIP_WARNING_RATE,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ppr::{ExactSolver, PreferenceVector};

/// Tolerance on the within-block degree-parameter sums.
pub const IDENTIFIABILITY_TOLERANCE: f64 = 1e-9;

/// Parameters of a (directed or undirected) degree-corrected block model with
/// realized memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct DcsbmParams {
    b: DMatrix<f64>,
    z: Vec<usize>,
    theta_in: Vec<f64>,
    theta_out: Vec<f64>,
    directed: bool,
}

impl DcsbmParams {
    pub fn new(
        b: DMatrix<f64>,
        z: Vec<usize>,
        theta_in: Vec<f64>,
        theta_out: Vec<f64>,
        directed: bool,
    ) -> Result<Self> {
        let k = b.nrows();
        if k == 0 || b.ncols() != k {
            return Err(Error::param(format!(
                "block matrix must be square and nonempty, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if b.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::param("block matrix entries must be finite and nonnegative"));
        }
        let n = z.len();
        if n == 0 {
            return Err(Error::param("model needs at least one node"));
        }
        if theta_in.len() != n || theta_out.len() != n {
            return Err(Error::param("degree parameters must have one entry per node"));
        }
        if let Some(&bad) = z.iter().find(|&&i| i >= k) {
            return Err(Error::param(format!("membership {bad} outside 0..{k}")));
        }
        if theta_in.iter().chain(&theta_out).any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::param("degree parameters must be positive"));
        }
        if !directed {
            if theta_in != theta_out {
                return Err(Error::param("undirected models use a single degree parameter"));
            }
            for i in 0..k {
                for j in 0..i {
                    let (x, y) = (b[(i, j)], b[(j, i)]);
                    if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                        return Err(Error::param("undirected models need a symmetric block matrix"));
                    }
                }
            }
        }
        let mut sums_in = vec![0.0; k];
        let mut sums_out = vec![0.0; k];
        for (v, &i) in z.iter().enumerate() {
            sums_in[i] += theta_in[v];
            sums_out[i] += theta_out[v];
        }
        for i in 0..k {
            for (label, s) in [("in", sums_in[i]), ("out", sums_out[i])] {
                if (s - 1.0).abs() > IDENTIFIABILITY_TOLERANCE {
                    return Err(Error::param(format!(
                        "theta_{label} sums to {s} in block {}, expected 1",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self {
            b,
            z,
            theta_in,
            theta_out,
            directed,
        })
    }

    pub fn undirected(b: DMatrix<f64>, z: Vec<usize>, theta: Vec<f64>) -> Result<Self> {
        Self::new(b, z, theta.clone(), theta, false)
    }

    pub fn k(&self) -> usize {
        self.b.nrows()
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn theta_in(&self) -> &[f64] {
        &self.theta_in
    }

    pub fn theta_out(&self) -> &[f64] {
        &self.theta_out
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &i in &self.z {
            sizes[i] += 1;
        }
        sizes
    }

    pub fn members(&self, block: usize) -> impl Iterator<Item = usize> + '_ {
        self.z
            .iter()
            .enumerate()
            .filter(move |(_, &i)| i == block)
            .map(|(v, _)| v)
    }

    /// Whether the block-level digraph on the support of `B` is strongly
    /// connected.
    pub fn is_strongly_connected(&self) -> bool {
        is_strongly_connected(&self.b)
    }

    /// Block-level preference `Zᵀπ`.
    pub fn block_preference(&self, pi: &PreferenceVector) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.k());
        for (u, w) in pi.iter() {
            let block = *self.z.get(u).ok_or(Error::NodeOutOfRange(u))?;
            out[block] += w;
        }
        Ok(out)
    }
}

/// Strong connectivity of the digraph with an arc `i → j` wherever
/// `B[i][j] > 0`.
pub fn is_strongly_connected(b: &DMatrix<f64>) -> bool {
    let k = b.nrows();
    let reach = |forward: bool| -> bool {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let w = if forward { b[(i, j)] } else { b[(j, i)] };
                if w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    k > 0 && reach(true) && reach(false)
}

/// Block in-degrees (column sums) and out-degrees (row sums).
pub fn block_degrees(b: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if b.nrows() != b.ncols() || b.nrows() == 0 {
        return Err(Error::param("block matrix must be square and nonempty"));
    }
    if b.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::param("block matrix entries must be finite and nonnegative"));
    }
    let d_in = DVector::from_iterator(b.ncols(), b.column_iter().map(|c| c.sum()));
    let d_out = DVector::from_iterator(b.nrows(), b.row_iter().map(|r| r.sum()));
    if let Some(i) = d_out.iter().position(|&x| x <= 0.0) {
        return Err(Error::param(format!("block {} has no outgoing mass", i + 1)));
    }
    if let Some(i) = d_in.iter().position(|&x| x <= 0.0) {
        return Err(Error::param(format!("block {} has no incoming mass", i + 1)));
    }
    Ok((d_in, d_out))
}

/// Row-normalized block matrix `[D_out]⁻¹ B`.
pub fn block_transition(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != b.ncols() || b.nrows() == 0 {
        return Err(Error::param("block matrix must be square and nonempty"));
    }
    if b.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::param("block matrix entries must be finite and nonnegative"));
    }
    let d_out: Vec<f64> = b.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = d_out.iter().position(|&x| x <= 0.0) {
        return Err(Error::param(format!("block {} has no outgoing mass", i + 1)));
    }
    let mut p = b.clone();
    for (i, mut row) in p.row_iter_mut().enumerate() {
        row /= d_out[i];
    }
    Ok(p)
}

/// Block-wise PPR vector, its degree-adjusted form, and the separation
/// between the seed block and the runner-up.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPpr {
    pub p_block: DVector<f64>,
    pub p_block_adjusted: DVector<f64>,
    /// `(p*_seed − max_{k≠seed} p*_k) / p*_seed`. Negative when another block
    /// outranks the seed block, which happens when `B` is not strongly
    /// connected.
    pub delta_alpha: f64,
    pub alpha: f64,
    pub seed_block: usize,
}

impl BlockPpr {
    /// Block with the largest adjusted score (lowest index on ties).
    pub fn top_adjusted_block(&self) -> usize {
        argmax(self.p_block_adjusted.as_slice())
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Block-wise PPR for a preference over blocks. The seed block is the block
/// holding the most preference mass. `alpha = 0` gives the stationary limit.
pub fn block_ppr(b: &DMatrix<f64>, preference: &DVector<f64>, alpha: f64) -> Result<BlockPpr> {
    let k = b.nrows();
    if preference.len() != k {
        return Err(Error::param("block preference length must equal K"));
    }
    let pi = PreferenceVector::new(
        preference
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| (i, w)),
    )?;
    let (d_in, _) = block_degrees(b)?;
    let transition = block_transition(b)?;
    let p_block = ExactSolver::default().solve_dense(&transition, &pi, alpha)?;
    let p_block_adjusted = p_block.component_div(&d_in);
    let seed_block = argmax(preference.as_slice());
    let seed_score = p_block_adjusted[seed_block];
    let runner_up = p_block_adjusted
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != seed_block)
        .map(|(_, &x)| x)
        .fold(0.0, f64::max);
    let delta_alpha = if seed_score > 0.0 {
        (seed_score - runner_up) / seed_score
    } else {
        f64::NEG_INFINITY
    };
    Ok(BlockPpr {
        p_block,
        p_block_adjusted,
        delta_alpha,
        alpha,
        seed_block,
    })
}

/// Block-wise PPR with all preference on one block.
pub fn block_ppr_seed(b: &DMatrix<f64>, seed_block: usize, alpha: f64) -> Result<BlockPpr> {
    if seed_block >= b.nrows() {
        return Err(Error::param(format!("seed block {seed_block} out of range")));
    }
    let mut pref = DVector::zeros(b.nrows());
    pref[seed_block] = 1.0;
    block_ppr(b, &pref, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(
            rows.len(),
            rows[0].len(),
            rows.iter().flat_map(|r| r.iter().copied()),
        )
    }

    pub(crate) fn hierarchy() -> DMatrix<f64> {
        m(&[&[3.0, 3.0, 3.0], &[0.0, 3.0, 3.0], &[0.0, 0.0, 3.0]])
    }

    #[test]
    fn degrees() {
        let (din, dout) = block_degrees(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(din.as_slice(), &[1.0, 1.0]);
        assert_eq!(dout.as_slice(), &[1.0, 1.0]);

        let (din, dout) = block_degrees(&hierarchy()).unwrap();
        assert_eq!(dout.as_slice(), &[9.0, 6.0, 3.0]);
        assert_eq!(din.as_slice(), &[3.0, 6.0, 9.0]);

        let sym = m(&[&[2.0, 1.0], &[1.0, 5.0]]);
        let (din, dout) = block_degrees(&sym).unwrap();
        assert_eq!(din, dout);

        assert!(block_degrees(&m(&[&[1.0, 0.0], &[0.0, 0.0]])).is_err());
    }

    #[test]
    fn transitions() {
        let p = block_transition(&hierarchy()).unwrap();
        let expected = m(&[
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            &[0.0, 0.5, 0.5],
            &[0.0, 0.0, 1.0],
        ]);
        assert!((p - expected).abs().max() < 1e-15);

        let singular = m(&[&[0.0, 3.0, 0.0], &[3.0, 0.0, 3.0], &[0.0, 3.0, 0.0]]);
        let p = block_transition(&singular).unwrap();
        let expected = m(&[&[0.0, 1.0, 0.0], &[0.5, 0.0, 0.5], &[0.0, 1.0, 0.0]]);
        assert_eq!(p, expected);

        assert_eq!(
            block_transition(&DMatrix::identity(3, 3)).unwrap(),
            DMatrix::identity(3, 3)
        );
        assert!(block_transition(&m(&[&[0.0, 0.0], &[1.0, 1.0]])).is_err());
    }

    #[test]
    fn worked_block_examples() {
        let h = block_ppr_seed(&hierarchy(), 0, 0.15).unwrap();
        for (x, e) in h.p_block.iter().zip([0.209, 0.103, 0.688]) {
            assert!((x - e).abs() < 5e-4, "{x} vs {e}");
        }
        // Not strongly connected: block 3 outranks the seed block.
        assert_eq!(h.top_adjusted_block(), 2);
        assert!(h.delta_alpha < 0.0);

        let singular = m(&[&[0.0, 3.0, 0.0], &[3.0, 0.0, 3.0], &[0.0, 3.0, 0.0]]);
        let s = block_ppr_seed(&singular, 0, 0.15).unwrap();
        for (x, e) in s.p_block.iter().zip([0.345, 0.459, 0.195]) {
            assert!((x - e).abs() < 5e-4);
        }
        for (x, e) in s.p_block_adjusted.iter().zip([0.345, 0.230, 0.195]) {
            assert!((x - e / 3.0).abs() < 5e-4);
        }

        // Closed form by symmetry: p1 = (α + (1−α)r/(p+2r)) / (1 + (1−α)(r−p)/(p+2r)).
        let (pp, r, a) = (3.0, 9.0, 0.15);
        let row = pp + 2.0 * r;
        let p1 = (a + (1.0 - a) * r / row) / (1.0 + (1.0 - a) * (r - pp) / row);
        let indefinite = m(&[&[3.0, 9.0, 9.0], &[9.0, 3.0, 9.0], &[9.0, 9.0, 3.0]]);
        let ind = block_ppr_seed(&indefinite, 0, 0.15).unwrap();
        assert!((ind.p_block[0] - p1).abs() < 1e-12);
        assert!((ind.p_block[0] - 0.4138).abs() < 1e-4);
        assert!((ind.p_block[1] - 0.2931).abs() < 1e-4);
        assert!((ind.p_block[2] - 0.2931).abs() < 1e-4);
        // The printed supplement value corresponds to α = 0.1.
        let ind10 = block_ppr_seed(&indefinite, 0, 0.10).unwrap();
        assert!((ind10.p_block[0] - 0.386).abs() < 5e-4);
    }

    #[test]
    fn circulation_restores_seed_top() {
        let mut b = hierarchy();
        b[(2, 0)] = 0.1;
        let c = block_ppr_seed(&b, 0, 0.15).unwrap();
        for (x, e) in c.p_block.iter().zip([0.235, 0.115, 0.650]) {
            assert!((x - e).abs() < 1e-3);
        }
        for (x, e) in c.p_block_adjusted.iter().zip([0.0755, 0.0192, 0.0723]) {
            assert!((x - e).abs() < 1e-4);
        }
        assert_eq!(c.top_adjusted_block(), 0);
        assert!(is_strongly_connected(&b));
        assert!(!is_strongly_connected(&hierarchy()));
    }

    #[test]
    fn params_validation() {
        let b = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ok = DcsbmParams::undirected(b.clone(), vec![0, 0, 1], vec![0.5, 0.5, 1.0]);
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().block_sizes(), vec![2, 1]);
        assert!(DcsbmParams::undirected(b.clone(), vec![0, 0, 1], vec![0.5, 0.4, 1.0]).is_err());
        assert!(DcsbmParams::undirected(b.clone(), vec![0, 0, 2], vec![0.5, 0.5, 1.0]).is_err());
        assert!(DcsbmParams::undirected(b.clone(), vec![0, 0], vec![0.5, 0.5]).is_err());
        let asym = m(&[&[2.0, 1.0], &[3.0, 2.0]]);
        assert!(DcsbmParams::undirected(asym.clone(), vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(DcsbmParams::new(asym, vec![0, 1], vec![1.0, 1.0], vec![1.0, 1.0], true).is_ok());
    }
}
