mod common;

use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use common::{client_for, random_graph, serve};
use ppr_core::ppr::reach_bound;
use ppr_core::{approximate_ppr, Graph, IdMap, PprDocument, PreferenceVector};
use ppr_crawl::{
    crawl_ppr, ClientConfig, CrawlCheckpoint, RemoteGraphClient, RetryPolicy, CrawlError, CrawlOptions, CrawlStatus,
    ServerOptions,
};

const ALPHA: f64 = 0.15;

fn local(graph: &Graph, seed: usize, alpha: f64, eps: f64) -> PprDocument {
    let result = approximate_ppr(graph, &PreferenceVector::single(seed), alpha, eps).unwrap();
    PprDocument::from_result(&result, graph.ids()).unwrap()
}

fn seed_of(graph: &Graph, seed: usize) -> Vec<(String, f64)> {
    vec![(graph.ids().name(seed).unwrap().to_owned(), 1.0)]
}

#[test]
fn three_cycle_matches_in_memory() {
    let graph = Graph::from_arcs(IdMap::sequential(3), &[(0, 1), (1, 2), (2, 0)], true).unwrap();
    let server = serve(&graph, ServerOptions::default());
    let client = client_for(&server);
    let out = crawl_ppr(&client, &seed_of(&graph, 0), ALPHA, 1e-10, &CrawlOptions::default()).unwrap();
    assert_eq!(out.status, CrawlStatus::Complete);
    assert_eq!(out.document, local(&graph, 0, ALPHA, 1e-10));
    assert_eq!(out.fetch_count, 3);
    assert_eq!(server.stats().out_answered, 3);
    assert!(out.in_degrees.values().all(|&d| d == 1));
}

#[test]
fn random_graphs_are_transport_transparent() {
    for g in 0..20u64 {
        let graph = random_graph(g);
        let server = serve(&graph, ServerOptions::default());
        let seed = (g as usize * 7) % graph.n_nodes();
        for eps in [1e-4, 1e-6] {
            let client = client_for(&server);
            let out = crawl_ppr(&client, &seed_of(&graph, seed), ALPHA, eps, &CrawlOptions::default()).unwrap();
            assert_eq!(out.document, local(&graph, seed, ALPHA, eps), "graph {g}, eps {eps}");
            assert!(out.fetch_count <= out.result.nodes_touched);
            assert!((out.fetch_count as f64) <= reach_bound(ALPHA, eps, 1));
            for (id, &d) in &out.in_degrees {
                assert_eq!(d, graph.in_degree_of(graph.index_of(id).unwrap()));
            }
            assert_eq!(out.in_degrees.len(), out.result.p.len());
        }
    }
}

#[test]
fn multiple_seeds_in_index_order() {
    let graph = random_graph(99);
    let server = serve(&graph, ServerOptions::default());
    let seeds = [1usize, 4, 9];
    let pi = PreferenceVector::new([(1, 0.5), (4, 0.25), (9, 0.25)]).unwrap();
    let expected =
        PprDocument::from_result(&approximate_ppr(&graph, &pi, 0.2, 1e-6).unwrap(), graph.ids()).unwrap();
    let named: Vec<(String, f64)> = seeds
        .iter()
        .zip([0.5, 0.25, 0.25])
        .map(|(&u, w)| (graph.ids().name(u).unwrap().to_owned(), w))
        .collect();
    let out = crawl_ppr(&client_for(&server), &named, 0.2, 1e-6, &CrawlOptions::default()).unwrap();
    assert_eq!(out.document, expected);
}

#[test]
fn each_node_fetched_once() {
    let graph = random_graph(5);
    let server = serve(&graph, ServerOptions::default());
    let client = client_for(&server);
    let out = crawl_ppr(&client, &seed_of(&graph, 0), 0.05, 1e-7, &CrawlOptions::default()).unwrap();
    let stats = server.stats();
    assert_eq!(stats.out_answered, out.fetch_count);
    assert!(out.fetch_count <= out.result.nodes_touched);
    assert_eq!(stats.in_degree_answered, out.result.p.len() as u64);
    // A second crawl on the same client is served from cache.
    crawl_ppr(&client, &seed_of(&graph, 0), 0.05, 1e-7, &CrawlOptions::default()).unwrap();
    assert_eq!(server.stats(), stats);
}

/// Runs to completion, resuming from the checkpoint after each transport
/// failure.
fn crawl_with_resume(
    graph: &Graph,
    options: ServerOptions,
    seed: usize,
    eps: f64,
    max_attempts: u32,
) -> (ppr_crawl::CrawlOutcome, usize) {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(graph, options);
    let opts = CrawlOptions { checkpoint_path: Some(dir.path().join("cp.json")), ..Default::default() };
    let mut failures = 0;
    loop {
        let mut config = ClientConfig::new(server.base_url());
        config.retry = RetryPolicy { max_attempts, ..common::fast_retry() };
        let client = RemoteGraphClient::new(config).unwrap();
        match crawl_ppr(&client, &seed_of(graph, seed), ALPHA, eps, &opts) {
            Ok(out) => return (out, failures),
            Err(CrawlError::Transport { .. }) if failures < 200 => failures += 1,
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn survives_injected_rate_limits() {
    let mut injected = 0;
    for g in 0..6u64 {
        let graph = random_graph(100 + g);
        let options = ServerOptions { rate_429: 0.2, retry_after_secs: 0, fault_seed: g, ..Default::default() };
        let server = serve(&graph, options.clone());
        let client = client_for(&server);
        let (out, _) = crawl_with_resume(&graph, options, 0, 1e-6, 5);
        assert_eq!(out.status, CrawlStatus::Complete);
        assert_eq!(out.document, local(&graph, 0, ALPHA, 1e-6));
        // Also check the plain path when no request exhausts its retries.
        if let Ok(out) = crawl_ppr(&client, &seed_of(&graph, 0), ALPHA, 1e-6, &CrawlOptions::default()) {
            assert_eq!(out.document, local(&graph, 0, ALPHA, 1e-6));
        }
        injected += server.stats().injected_429;
    }
    assert!(injected > 0);
}

#[test]
fn resumes_after_persistent_server_errors() {
    let graph = random_graph(7);
    let options = ServerOptions { rate_5xx: 0.5, fault_seed: 3, ..Default::default() };
    let (out, failures) = crawl_with_resume(&graph, options, 2, 1e-6, 2);
    assert!(failures > 0);
    assert_eq!(out.document, local(&graph, 2, ALPHA, 1e-6));
}

#[test]
fn kill_and_resume_is_bit_identical() {
    let graph = random_graph(11);
    let server = serve(&graph, ServerOptions::default());
    let seeds = seed_of(&graph, 3);
    let full = crawl_ppr(&client_for(&server), &seeds, ALPHA, 1e-7, &CrawlOptions::default()).unwrap();
    assert!(full.result.pushes > 10);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("crawl.json");
    let opts = CrawlOptions {
        checkpoint_path: Some(path.clone()),
        max_pushes: Some(full.result.pushes / 2),
        checkpoint_every: 7,
        ..Default::default()
    };
    let half = crawl_ppr(&client_for(&server), &seeds, ALPHA, 1e-7, &opts).unwrap();
    assert_eq!(half.status, CrawlStatus::Suspended);
    assert_eq!(half.result.pushes, full.result.pushes / 2);
    let cp = CrawlCheckpoint::load(&path).unwrap();
    assert_eq!(cp.pushes, full.result.pushes / 2);
    assert!((cp.p.values().sum::<f64>() + cp.r.values().sum::<f64>() - 1.0).abs() < 1e-9);

    let resumed_client = client_for(&server);
    let before = server.stats().out_answered;
    let opts = CrawlOptions { checkpoint_path: Some(path.clone()), ..Default::default() };
    let resumed = crawl_ppr(&resumed_client, &seeds, ALPHA, 1e-7, &opts).unwrap();
    assert_eq!(resumed.status, CrawlStatus::Complete);
    assert_eq!(resumed.document, full.document);
    // Cached answers travel with the checkpoint.
    assert_eq!(server.stats().out_answered - before, full.fetch_count - cp.fetch_count);
    assert_eq!(resumed.fetch_count, full.fetch_count);
}

#[test]
fn stop_flag_suspends() {
    let graph = random_graph(12);
    let server = serve(&graph, ServerOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let stop = Arc::new(AtomicBool::new(true));
    let opts = CrawlOptions {
        checkpoint_path: Some(dir.path().join("cp.json")),
        stop: Some(stop),
        ..Default::default()
    };
    let out = crawl_ppr(&client_for(&server), &seed_of(&graph, 0), ALPHA, 1e-6, &opts).unwrap();
    assert_eq!(out.status, CrawlStatus::Suspended);
    assert_eq!(out.result.pushes, 0);
    assert!(dir.path().join("cp.json").exists());
}

#[test]
fn checkpoint_rejects_other_parameters() {
    let graph = random_graph(13);
    let server = serve(&graph, ServerOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let opts = CrawlOptions { checkpoint_path: Some(dir.path().join("cp.json")), ..Default::default() };
    crawl_ppr(&client_for(&server), &seed_of(&graph, 0), ALPHA, 1e-5, &opts).unwrap();
    let err = crawl_ppr(&client_for(&server), &seed_of(&graph, 0), ALPHA, 1e-6, &opts).unwrap_err();
    assert!(matches!(err, CrawlError::Core(ppr_core::Error::InvalidParameter(_))));
}

#[test]
fn checkpoint_restores_identical_state() {
    let graph = random_graph(14);
    let server = serve(&graph, ServerOptions::default());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cp.json");
    let opts = CrawlOptions { checkpoint_path: Some(path.clone()), max_pushes: Some(25), ..Default::default() };
    let seeds = seed_of(&graph, 1);
    crawl_ppr(&client_for(&server), &seeds, ALPHA, 1e-7, &opts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cp = CrawlCheckpoint::from_json(&text).unwrap();
    let client = client_for(&server);
    let state = cp.restore(&client).unwrap();
    let again = CrawlCheckpoint::capture(&state, &client, &cp.preference).unwrap();
    assert_eq!(again, cp);
    assert_eq!(again.to_json().unwrap(), text);
}

#[test]
fn unknown_seed_is_dangling() {
    let graph = random_graph(15);
    let server = serve(&graph, ServerOptions::default());
    let client = client_for(&server);
    let out = crawl_ppr(&client, &[("no such node".into(), 1.0)], ALPHA, 1e-6, &CrawlOptions::default()).unwrap();
    assert_eq!(out.missing, ["no such node"]);
    assert!((out.document.p["no such node"] + out.document.r["no such node"] - 1.0).abs() < 1e-12);
    assert_eq!(out.in_degrees["no such node"], 0);
}

#[test]
fn unreachable_server_fails_before_any_push() {
    let graph = random_graph(16);
    let server = serve(&graph, ServerOptions { rate_5xx: 1.0, ..Default::default() });
    let err = crawl_ppr(&client_for(&server), &seed_of(&graph, 0), ALPHA, 1e-6, &CrawlOptions::default())
        .unwrap_err();
    assert!(matches!(err, CrawlError::Transport { checkpoint: None, .. }), "{err}");
}
