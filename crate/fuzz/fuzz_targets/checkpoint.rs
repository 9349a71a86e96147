#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_crawl::CrawlCheckpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cp) = CrawlCheckpoint::from_json(text) {
        let json = cp.to_json().unwrap();
        assert_eq!(CrawlCheckpoint::from_json(&json).unwrap().to_json().unwrap(), json);
    }
});
