#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_core::Graph;

fuzz_target!(|data: &[u8]| {
    let Some((&flag, body)) = data.split_first() else {
        return;
    };
    let directed = flag & 1 == 1;
    let Ok(graph) = Graph::load_edge_list(body, directed) else {
        return;
    };
    // Whatever parses and can be written must reload unchanged.
    let mut out = Vec::new();
    if graph.write_edge_list(&mut out).is_err() {
        return;
    }
    let again = Graph::load_edge_list_with_ids(&out[..], directed, graph.ids().clone()).unwrap();
    assert_eq!(again.out_offsets(), graph.out_offsets());
    assert_eq!(again.out_targets(), graph.out_targets());
    assert_eq!(again.in_degrees(), graph.in_degrees());
});
