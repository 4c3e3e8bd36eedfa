#![no_main]

use libfuzzer_sys::fuzz_target;
use satsolar_core::stitch::StitchManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = StitchManifest::from_json(text) {
        assert!(!m.tiles.is_empty());
    }
});
