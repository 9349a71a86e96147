//! Population (expected-graph) PPR under a degree-corrected block model.
//!
//! The population transition factors as `𝓟 = Z P Zᵀ Θ_in`, so every power
//! `𝓟ˢ` with `s ≥ 1` only sees the block preference `Zᵀπ`. Summing the
//! landing-probability series gives
//!
//! ```text
//! 𝓅_u = θ_in(u) · p_{z(u)} + α · (π_u − θ_in(u) · (Zᵀπ)_{z(u)})
//! ```
//!
//! where `p` is the block-wise PPR vector. The second term is the `s = 0`
//! teleport mass that a point preference puts on individual seeds; it
//! vanishes when `π` is spread over each block in proportion to `θ_in`.

use nalgebra::DMatrix;

use super::{block_degrees, block_ppr, BlockPpr, DcsbmParams};
use crate::error::{Error, Result};
use crate::ppr::PreferenceVector;

/// Largest node count for which dense population matrices are built.
pub const POPULATION_DENSE_LIMIT: usize = 10_000;

/// Node-level population PPR and its in-degree adjusted form.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationPpr {
    pub ppr: Vec<f64>,
    pub appr: Vec<f64>,
    pub block: BlockPpr,
}

/// Closed-form population PPR without materializing any `N×N` matrix.
///
/// `alpha = 0` yields the stationary limit.
pub fn population_ppr(
    params: &DcsbmParams,
    pi: &PreferenceVector,
    alpha: f64,
) -> Result<PopulationPpr> {
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return Err(Error::param(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let block_pi = params.block_preference(pi)?;
    let block = block_ppr(params.b(), &block_pi, alpha)?;
    let (d_in, _) = block_degrees(params.b())?;
    let n = params.n();
    let mut ppr = Vec::with_capacity(n);
    let mut appr = Vec::with_capacity(n);
    for v in 0..n {
        let i = params.z()[v];
        let theta = params.theta_in()[v];
        let teleport = alpha * (pi.get(v) - theta * block_pi[i]);
        let value = theta * block.p_block[i] + teleport;
        ppr.push(value);
        appr.push(block.p_block_adjusted[i] + teleport / (theta * d_in[i]));
    }
    Ok(PopulationPpr { ppr, appr, block })
}

/// Expected adjacency `Θ_out Z B Zᵀ Θ_in`, including the diagonal and without
/// clipping. Intended as a test oracle.
pub fn population_adjacency(params: &DcsbmParams) -> Result<DMatrix<f64>> {
    let n = params.n();
    if n > POPULATION_DENSE_LIMIT {
        return Err(Error::param(format!(
            "{n} nodes exceeds the dense limit of {POPULATION_DENSE_LIMIT}"
        )));
    }
    let (z, b) = (params.z(), params.b());
    Ok(DMatrix::from_fn(n, n, |u, v| {
        params.theta_out()[u] * params.theta_in()[v] * b[(z[u], z[v])]
    }))
}

/// Row-normalized expected adjacency `[𝓓_out]⁻¹ 𝓐`.
pub fn population_transition(params: &DcsbmParams) -> Result<DMatrix<f64>> {
    let mut a = population_adjacency(params)?;
    for (u, mut row) in a.row_iter_mut().enumerate() {
        let d = row.sum();
        if d <= 0.0 {
            return Err(Error::param(format!("node {u} has zero expected out-degree")));
        }
        row /= d;
    }
    Ok(a)
}
