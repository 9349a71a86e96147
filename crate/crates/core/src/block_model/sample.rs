//! Random graph generation from block models.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DcsbmParams;
use crate::error::{Error, Result};
use crate::graph::{Graph, IdMap};
use crate::rng::{stream_rng, StreamRng};

/// Clip rate above which sampling reports a warning.
pub const CLIP_WARNING_RATE: f64 = 0.01;

const MEMBERSHIP_STREAM: u64 = 0;
const THETA_STREAM: u64 = 1 << 40;
const EDGE_STREAM: u64 = 2 << 40;
const MAX_MEMBERSHIP_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    /// Ordered (directed) or unordered (undirected) node pairs considered.
    pub pairs: u64,
    /// Pairs whose probability exceeded one and was clipped.
    pub clipped: u64,
    pub warning: Option<String>,
}

impl SampleReport {
    pub fn clip_rate(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.clipped as f64 / self.pairs as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampledGraph {
    pub graph: Graph,
    pub report: SampleReport,
}

/// Samples independent Bernoulli arcs with probability
/// `θ_out(u)·θ_in(v)·B[z(u)][z(v)]`, clipped to one. Self-loops are never
/// sampled. Node ids are `"0".."N-1"`.
pub fn sample_dcsbm(params: &DcsbmParams, seed: u64) -> Result<SampledGraph> {
    let mut rng = stream_rng(seed, EDGE_STREAM);
    sample_dcsbm_with(params, &mut rng)
}

pub fn sample_dcsbm_with<R: Rng + ?Sized>(params: &DcsbmParams, rng: &mut R) -> Result<SampledGraph> {
    let n = params.n();
    let (z, b) = (params.z(), params.b());
    let (t_in, t_out) = (params.theta_in(), params.theta_out());
    let directed = params.is_directed();
    let mut arcs = Vec::new();
    let mut report = SampleReport::default();
    for u in 0..n {
        let start = if directed { 0 } else { u + 1 };
        for v in start..n {
            if v == u {
                continue;
            }
            report.pairs += 1;
            let mut prob = t_out[u] * t_in[v] * b[(z[u], z[v])];
            if prob > 1.0 {
                report.clipped += 1;
                prob = 1.0;
            }
            if prob > 0.0 && rng.random::<f64>() < prob {
                arcs.push((u, v));
            }
        }
    }
    if report.clip_rate() > CLIP_WARNING_RATE {
        let msg = format!(
            "{} of {} pair probabilities exceeded 1 and were clipped",
            report.clipped, report.pairs
        );
        log::warn!("{msg}");
        report.warning = Some(msg);
    }
    let graph = Graph::from_arcs(IdMap::sequential(n), &arcs, directed)?;
    Ok(SampledGraph { graph, report })
}

/// One multinomial draw per node with the given (unnormalized) weights.
pub fn draw_memberships<R: Rng + ?Sized>(n: usize, weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::param("block proportions must be positive"));
    }
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w / total;
        cumulative.push(acc);
    }
    Ok((0..n)
        .map(|_| {
            let x: f64 = rng.random();
            cumulative
                .iter()
                .position(|&c| x < c)
                .unwrap_or(weights.len() - 1)
        })
        .collect())
}

fn block_count(z: &[usize]) -> usize {
    z.iter().max().map_or(0, |m| m + 1)
}

fn sizes_of(z: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &i in z {
        sizes[i] += 1;
    }
    sizes
}

/// `θ = 1/n_i` for every node of block `i`.
pub fn uniform_theta(z: &[usize]) -> Result<Vec<f64>> {
    let k = block_count(z);
    let sizes = sizes_of(z, k);
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::param(format!("block {} has no members", i + 1)));
    }
    Ok(z.iter().map(|&i| 1.0 / sizes[i] as f64).collect())
}

/// Raw power-law draws and the block-normalized degree parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawTheta {
    pub raw: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Draws i.i.d. power-law values with density `∝ x^(−β)` on `[x_min, ∞)` and
/// normalizes them to sum to one within each block.
pub fn sample_power_law_theta(z: &[usize], x_min: f64, beta: f64, seed: u64) -> Result<PowerLawTheta> {
    let mut rng = stream_rng(seed, THETA_STREAM);
    sample_power_law_theta_with(z, x_min, beta, &mut rng)
}

pub fn sample_power_law_theta_with<R: Rng + ?Sized>(
    z: &[usize],
    x_min: f64,
    beta: f64,
    rng: &mut R,
) -> Result<PowerLawTheta> {
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(Error::param(format!("x_min must be positive, got {x_min}")));
    }
    if !(beta.is_finite() && beta > 1.0) {
        return Err(Error::param(format!("beta must exceed 1, got {beta}")));
    }
    let k = block_count(z);
    let sizes = sizes_of(z, k);
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::param(format!("block {} has no members", i + 1)));
    }
    // Inverse CDF of P(X > x) = (x / x_min)^(1 − β).
    let raw: Vec<f64> = z
        .iter()
        .map(|_| {
            let u: f64 = 1.0 - rng.random::<f64>();
            x_min * u.powf(-1.0 / (beta - 1.0))
        })
        .collect();
    let mut sums = vec![0.0; k];
    for (&i, &x) in z.iter().zip(&raw) {
        sums[i] += x;
    }
    let theta = z.iter().zip(&raw).map(|(&i, &x)| x / sums[i]).collect();
    Ok(PowerLawTheta { raw, theta })
}

/// `b1 / (b2 (K − 1))`: expected within-block over between-block edges.
pub fn four_parameter_snr(k: usize, b1: f64, b2: f64) -> f64 {
    b1 / (b2 * (k as f64 - 1.0))
}

/// Common scale `c` such that edge probabilities `c·b1` (within) and `c·b2`
/// (between) give expected average degree `delta` for block proportions
/// `proportions` (normalized here).
pub fn rate_scale(k: usize, n: usize, b1: f64, b2: f64, delta: f64, proportions: &[f64]) -> Result<f64> {
    if proportions.len() != k {
        return Err(Error::param("need one proportion per block"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::param(format!("target degree must be positive, got {delta}")));
    }
    let total: f64 = proportions.iter().sum();
    let mut mix = 0.0;
    for i in 0..k {
        for j in 0..k {
            let rate = if i == j { b1 } else { b2 };
            mix += rate * proportions[i] * proportions[j] / (total * total);
        }
    }
    Ok(delta / (n as f64 * mix))
}

/// Block matrix `B[i][j] = c · b_ij · n_i · n_j`, i.e. expected edge counts
/// for uniform within-block probabilities `c·b_ij`.
pub fn rate_block_matrix(sizes: &[usize], b1: f64, b2: f64, scale: f64) -> DMatrix<f64> {
    let k = sizes.len();
    DMatrix::from_fn(k, k, |i, j| {
        let rate = if i == j { b1 } else { b2 };
        scale * rate * sizes[i] as f64 * sizes[j] as f64
    })
}

/// A four-parameter block model with its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct FourParameterSbm {
    pub params: DcsbmParams,
    pub snr: f64,
    pub scale: f64,
    pub within_probability: f64,
    pub between_probability: f64,
}

/// Undirected block model with `K` blocks of (near) equal size, within-block
/// edge probability `c·b1` and between-block probability `c·b2`, where `c`
/// makes the expected average degree equal `target_delta`.
///
/// Memberships are contiguous and balanced: block sizes differ by at most one.
pub fn make_four_parameter_sbm(
    k: usize,
    n: usize,
    b1: f64,
    b2: f64,
    target_delta: f64,
) -> Result<FourParameterSbm> {
    if k == 0 || n < k {
        return Err(Error::param(format!("need 1 <= K <= N, got K={k}, N={n}")));
    }
    if !(b2 > 0.0 && b1 >= b2 && b1.is_finite()) {
        return Err(Error::param(format!("need b1 >= b2 > 0, got b1={b1}, b2={b2}")));
    }
    let z: Vec<usize> = (0..n).map(|v| v * k / n).collect();
    let sizes = sizes_of(&z, k);
    let proportions: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let scale = rate_scale(k, n, b1, b2, target_delta, &proportions)?;
    let within = scale * b1;
    let between = scale * b2;
    if within > 1.0 {
        return Err(Error::param(format!(
            "target degree {target_delta} needs within-block probability {within} > 1"
        )));
    }
    let b = rate_block_matrix(&sizes, b1, b2, scale);
    let theta = uniform_theta(&z)?;
    let params = DcsbmParams::undirected(b, z, theta)?;
    Ok(FourParameterSbm {
        params,
        snr: if k > 1 { four_parameter_snr(k, b1, b2) } else { f64::INFINITY },
        scale,
        within_probability: within,
        between_probability: between,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThetaSpec {
    Uniform,
    PowerLaw { x_min: f64, beta: f64 },
}

/// How node memberships are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum MembershipSpec {
    /// Zero-based block of every node.
    Fixed(Vec<usize>),
    /// Unnormalized block weights; one multinomial draw per node.
    Proportions(Vec<f64>),
}

/// Block model parameter file:
/// `{K, N, B, proportions | z, theta: {mode, x_min, beta}, directed, seed}`.
/// Memberships in `z` are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcsbmSpec {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<usize>>,
    pub theta: ThetaSpec,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub seed: u64,
}

impl DcsbmSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::canonical_pretty(self)
    }

    pub fn membership(&self) -> Result<MembershipSpec> {
        match (&self.proportions, &self.z) {
            (Some(p), None) => Ok(MembershipSpec::Proportions(p.clone())),
            (None, Some(z)) => Ok(MembershipSpec::Fixed(z.iter().map(|i| i.wrapping_sub(1)).collect())),
            _ => Err(Error::param("give exactly one of `proportions` or `z`")),
        }
    }

    pub fn block_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| self.b[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::param("K and N must be positive"));
        }
        if self.b.len() != self.k || self.b.iter().any(|row| row.len() != self.k) {
            return Err(Error::param(format!("B must be {0}x{0}", self.k)));
        }
        if self.b.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::param("B entries must be finite and nonnegative"));
        }
        match self.membership()? {
            MembershipSpec::Proportions(p) => {
                if p.len() != self.k || p.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                    return Err(Error::param("need K positive proportions"));
                }
                if self.n < self.k {
                    return Err(Error::param("N must be at least K"));
                }
            }
            MembershipSpec::Fixed(z) => {
                if z.len() != self.n {
                    return Err(Error::param("z must list one block per node"));
                }
                if z.iter().any(|&i| i >= self.k) {
                    return Err(Error::param("z entries must lie in 1..=K"));
                }
                let sizes = sizes_of(&z, self.k);
                if let Some(i) = sizes.iter().position(|&s| s == 0) {
                    return Err(Error::param(format!("block {} has no members", i + 1)));
                }
            }
        }
        if let ThetaSpec::PowerLaw { x_min, beta } = self.theta {
            if !(x_min.is_finite() && x_min > 0.0 && beta.is_finite() && beta > 1.0) {
                return Err(Error::param("power law needs x_min > 0 and beta > 1"));
            }
        }
        if !self.directed {
            let b = self.block_matrix();
            if b != b.transpose() {
                return Err(Error::param("undirected models need a symmetric B"));
            }
        }
        Ok(())
    }

    /// Draws memberships (resampling on empty blocks) and degree parameters.
    pub fn realize(&self) -> Result<DcsbmParams> {
        self.validate()?;
        let z = match self.membership()? {
            MembershipSpec::Fixed(z) => z,
            MembershipSpec::Proportions(p) => {
                let mut attempt = 0;
                loop {
                    let mut rng = stream_rng(self.seed, MEMBERSHIP_STREAM + attempt);
                    let z = draw_memberships(self.n, &p, &mut rng)?;
                    if sizes_of(&z, self.k).iter().all(|&s| s > 0) {
                        break z;
                    }
                    attempt += 1;
                    log::info!("empty block in membership draw; resampling (attempt {attempt})");
                    if attempt >= MAX_MEMBERSHIP_ATTEMPTS {
                        return Err(Error::param("could not draw memberships with every block occupied"));
                    }
                }
            }
        };
        let b = self.block_matrix();
        let mut rng = stream_rng(self.seed, THETA_STREAM);
        let (theta_in, theta_out) = match self.theta {
            ThetaSpec::Uniform => {
                let t = uniform_theta(&z)?;
                (t.clone(), t)
            }
            ThetaSpec::PowerLaw { x_min, beta } => {
                let t_in = sample_power_law_theta_with(&z, x_min, beta, &mut rng)?.theta;
                let t_out = if self.directed {
                    sample_power_law_theta_with(&z, x_min, beta, &mut rng)?.theta
                } else {
                    t_in.clone()
                };
                (t_in, t_out)
            }
        };
        DcsbmParams::new(b, z, theta_in, theta_out, self.directed)
    }

    /// Realizes the parameters and samples one graph.
    pub fn sample(&self) -> Result<(DcsbmParams, SampledGraph)> {
        let params = self.realize()?;
        let mut rng: StreamRng = stream_rng(self.seed, EDGE_STREAM);
        let sampled = sample_dcsbm_with(&params, &mut rng)?;
        Ok((params, sampled))
    }
}
