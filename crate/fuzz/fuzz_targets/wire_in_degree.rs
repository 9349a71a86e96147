#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_crawl::wire::InDegreeResponse;

fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    let Ok(expected) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let body = data.get(split + 1..).unwrap_or_default();
    if let Ok(resp) = InDegreeResponse::parse(body, expected) {
        assert_eq!(resp.id, expected);
    }
});
