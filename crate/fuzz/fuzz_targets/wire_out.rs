#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_crawl::wire::OutResponse;

fuzz_target!(|data: &[u8]| {
    // First line is the id the client asked for, the rest is the body.
    let split = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    let Ok(expected) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let body = data.get(split + 1..).unwrap_or_default();
    if let Ok(resp) = OutResponse::parse(body, expected) {
        assert_eq!(resp.id, expected);
        assert_eq!(resp.out_degree, resp.out_neighbors.len());
    }
});
