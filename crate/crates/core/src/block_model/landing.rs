//! Landing probabilities and linear-discriminant weights.
//!
//! A PPR vector is the landing-probability matrix weighted by
//! `α(1−α)^s`. On a symmetric block model the discriminant between the seed
//! block and any other block weights step `s` by `λ₂^s`, so the two scores
//! coincide when `α = 1 − λ₂`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::block_transition;
use crate::error::{Error, Result};
use crate::ppr::{validate_stochastic, PreferenceVector};

/// Landing probabilities `(Pˢ)ᵀπ` for `s = 0..S`, one row per step.
pub fn landing_probabilities(p: &DMatrix<f64>, pi: &PreferenceVector, steps: usize) -> Result<DMatrix<f64>> {
    validate_stochastic(p)?;
    if steps == 0 {
        return Err(Error::param("need at least one step"));
    }
    let n = p.nrows();
    let pt = p.transpose();
    let mut out = DMatrix::zeros(steps, n);
    let mut row = pi.to_dense(n)?;
    for s in 0..steps {
        out.set_row(s, &row.transpose());
        row = &pt * row;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdEquivalenceReport {
    pub lambda2: f64,
    pub alpha: f64,
    pub omega_ppr: Vec<f64>,
    pub omega_ld: Vec<f64>,
    pub cosine: f64,
    /// Node order (best first) induced by each weight vector on the
    /// population landing-probability matrix.
    pub ppr_ranking: Vec<usize>,
    pub ld_ranking: Vec<usize>,
    pub rankings_agree: bool,
}

const NODES_PER_BLOCK: usize = 6;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn ranking(scores: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Compares PPR and linear-discriminant weights on the symmetric block model
/// with within-block rate `b1` and between-block rate `b2`.
///
/// `λ₂` is the second-largest eigenvalue of the block transition matrix. The
/// discriminant weights are the block landing-probability gap between the seed
/// block and block 2. Rankings are compared on a small population with
/// distinct degree parameters, seeded in block 1.
pub fn ld_ppr_equivalence(
    b1: f64,
    b2: f64,
    k: usize,
    alpha_override: Option<f64>,
    steps: usize,
) -> Result<LdEquivalenceReport> {
    if k < 2 {
        return Err(Error::param("need at least two blocks"));
    }
    if !(b2 > 0.0 && b1 > b2 && b1.is_finite()) {
        return Err(Error::param(format!("need b1 > b2 > 0, got b1={b1}, b2={b2}")));
    }
    if steps == 0 {
        return Err(Error::param("need at least one step"));
    }
    let b = DMatrix::from_fn(k, k, |i, j| if i == j { b1 } else { b2 });
    let p = block_transition(&b)?;
    // Equal block degrees make P symmetric.
    let mut eigen: Vec<f64> = SymmetricEigen::new(p.clone()).eigenvalues.iter().copied().collect();
    eigen.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = eigen[1];
    let alpha = alpha_override.unwrap_or(1.0 - lambda2);
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1], got {alpha}")));
    }

    let block_landing = landing_probabilities(&p, &PreferenceVector::single(0), steps)?;
    let omega_ppr: Vec<f64> = (0..steps).map(|s| alpha * (1.0 - alpha).powi(s as i32)).collect();
    let omega_ld: Vec<f64> = (0..steps)
        .map(|s| block_landing[(s, 0)] - block_landing[(s, 1)])
        .collect();

    let n = k * NODES_PER_BLOCK;
    let z: Vec<usize> = (0..n).map(|v| v / NODES_PER_BLOCK).collect();
    let raw: Vec<f64> = (0..n).map(|v| 1.0 + v as f64 * 0.37).collect();
    let mut block_total = vec![0.0; k];
    for v in 0..n {
        block_total[z[v]] += raw[v];
    }
    let theta: Vec<f64> = (0..n).map(|v| raw[v] / block_total[z[v]]).collect();
    // Population landing probabilities R = Θ Z W (N × S).
    let r = DMatrix::from_fn(n, steps, |v, s| theta[v] * block_landing[(s, z[v])]);
    let ppr_ranking = ranking(&(&r * DVector::from_column_slice(&omega_ppr)));
    let ld_ranking = ranking(&(&r * DVector::from_column_slice(&omega_ld)));

    Ok(LdEquivalenceReport {
        lambda2,
        alpha,
        cosine: cosine(&omega_ppr, &omega_ld),
        rankings_agree: ppr_ranking == ld_ranking,
        omega_ppr,
        omega_ld,
        ppr_ranking,
        ld_ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppr::ppr_series;

    #[test]
    fn landing_rows() {
        let b = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.6 } else { 0.2 });
        let p = block_transition(&b).unwrap();
        let w = landing_probabilities(&p, &PreferenceVector::single(0), 5).unwrap();
        assert_eq!(w.nrows(), 5);
        assert_eq!(w.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
        for (x, e) in w.row(1).iter().zip([0.6, 0.2, 0.2]) {
            assert!((x - e).abs() < 1e-15);
        }
        for row in w.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert!(landing_probabilities(&p, &PreferenceVector::single(0), 0).is_err());
    }

    #[test]
    fn weighted_landing_reproduces_series() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.5, 1.0, 0.0, 0.0, 0.2, 0.3, 0.5]);
        let pi = PreferenceVector::new([(0, 0.4), (2, 0.6)]).unwrap();
        let alpha = 0.2;
        let w = landing_probabilities(&p, &pi, 31).unwrap();
        let mut acc = DVector::zeros(3);
        for s in 0..31 {
            acc += w.row(s).transpose() * (alpha * (1.0f64 - alpha).powi(s as i32));
        }
        let series = ppr_series(&p, &pi, alpha, 30).unwrap();
        assert!((acc - series).abs().max() < 1e-14);
    }

    #[test]
    fn two_block_equivalence() {
        let rep = ld_ppr_equivalence(0.6, 0.2, 2, None, 40).unwrap();
        assert!((rep.lambda2 - 0.5).abs() < 1e-12);
        assert!((rep.alpha - 0.5).abs() < 1e-12);
        assert!(rep.cosine >= 1.0 - 1e-10);
        assert!(rep.rankings_agree);
        assert!(rep.ppr_ranking[0] < NODES_PER_BLOCK);
    }

    #[test]
    fn discriminant_weights_are_geometric() {
        for k in [2, 3, 5] {
            let rep = ld_ppr_equivalence(0.7, 0.1, k, None, 12).unwrap();
            let l2 = (0.7 - 0.1) / (0.7 + (k as f64 - 1.0) * 0.1);
            assert!((rep.lambda2 - l2).abs() < 1e-12);
            for (s, w) in rep.omega_ld.iter().enumerate() {
                assert!((w - l2.powi(s as i32)).abs() < 1e-12);
            }
            assert!(rep.cosine >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn other_alpha_breaks_proportionality() {
        let rep = ld_ppr_equivalence(0.6, 0.2, 2, Some(0.15), 40).unwrap();
        assert!(rep.cosine < 1.0 - 1e-6);
        assert!(ld_ppr_equivalence(0.6, 0.2, 1, None, 10).is_err());
        assert!(ld_ppr_equivalence(0.2, 0.6, 2, None, 10).is_err());
    }
}
