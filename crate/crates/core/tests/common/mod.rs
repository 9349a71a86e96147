#![allow(dead_code)]

use nalgebra::DMatrix;
use ppr_core::{Graph, IdMap};
use proptest::prelude::*;

/// Graphs on up to `max_n` nodes, directed or undirected, possibly with
/// dangling nodes and self-loops.
pub fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n, any::<bool>(), 0.02f64..0.4).prop_flat_map(|(n, directed, density)| {
        proptest::collection::vec(proptest::bool::weighted(density), n * n).prop_map(move |mask| {
            let arcs: Vec<(usize, usize)> = mask
                .iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(|(i, _)| (i / n, i % n))
                .collect();
            Graph::from_arcs(IdMap::sequential(n), &arcs, directed).unwrap()
        })
    })
}

/// Dense random nonnegative matrix with a strictly positive diagonal.
pub fn arb_block_matrix(max_k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_k).prop_flat_map(|k| {
        proptest::collection::vec(0.0f64..1.0, k * k).prop_map(move |v| {
            DMatrix::from_fn(k, k, |i, j| if i == j { 0.2 + v[i * k + j] } else { v[i * k + j] })
        })
    })
}
