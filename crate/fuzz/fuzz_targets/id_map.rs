#![no_main]

use libfuzzer_sys::fuzz_target;
use ppr_core::IdMap;

fuzz_target!(|data: &[u8]| {
    let Ok(ids) = IdMap::read_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    ids.write_csv(&mut out).unwrap();
    assert_eq!(IdMap::read_csv(&out[..]).unwrap().names(), ids.names());
});
