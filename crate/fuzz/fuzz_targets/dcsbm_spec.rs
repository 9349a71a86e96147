#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_core::block_model::DcsbmSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = DcsbmSpec::from_json(text) else {
        return;
    };
    // Keep sampling cheap; validation is the interesting part.
    if spec.n <= 64 {
        let _ = spec.sample();
    }
});
