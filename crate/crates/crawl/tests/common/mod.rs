#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use ppr_core::{Graph, IdMap};
use ppr_crawl::{serve_graph, ClientConfig, RemoteGraphClient, RetryPolicy, ServerHandle, ServerOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random graph with awkward ids, a few dangling nodes and self-loops.
pub fn random_graph(seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..120);
    let directed = rng.random_bool(0.6);
    let mut ids = IdMap::new();
    for i in 0..n {
        match i % 3 {
            0 => ids.intern(&format!("u{i}")),
            1 => ids.intern(&format!("user {i}/x")),
            _ => ids.intern(&format!("ü-{i}?q=1")),
        };
    }
    let p = rng.random_range(1.5..6.0) / n as f64;
    let mut arcs = Vec::new();
    for u in 0..n {
        if directed && u % 7 == 3 {
            continue;
        }
        for v in 0..n {
            if (u != v || rng.random_bool(0.05)) && rng.random_bool(p) {
                arcs.push((u, v));
            }
        }
    }
    Graph::from_arcs(ids, &arcs, directed).unwrap()
}

pub fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_attempts: 5,
        initial_backoff: Duration::from_millis(1),
        max_backoff: Duration::from_millis(20),
    }
}

pub fn serve(graph: &Graph, options: ServerOptions) -> ServerHandle {
    serve_graph(Arc::new(graph.clone()), "127.0.0.1:0", options).unwrap()
}

pub fn client_for(server: &ServerHandle) -> RemoteGraphClient {
    let mut config = ClientConfig::new(server.base_url());
    config.retry = fast_retry();
    RemoteGraphClient::new(config).unwrap()
}
