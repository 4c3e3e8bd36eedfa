#![no_main]

use libfuzzer_sys::fuzz_target;
use satsolar_core::io::ascii::parse_ascii_grid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(grid) = parse_ascii_grid(text) else { return };
    let _ = grid.clone().into_labels();
    let _ = grid.clone().into_mask();
    if let Ok(h) = grid.into_height() {
        assert_eq!(h.data().len(), h.meta().len());
    }
});
