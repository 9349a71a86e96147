#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_core::PprDocument;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(doc) = PprDocument::from_json(text) {
        let again = PprDocument::from_json(&doc.to_json().unwrap()).unwrap();
        assert_eq!(again, doc);
    }
});
