#![no_main]

use libfuzzer_sys::fuzz_target;
use satsolar_core::io::png::decode_color;

// Input layout: u16 little-endian sidecar length, sidecar JSON, PNG bytes.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    let (sidecar, png) = rest.split_at(n.min(rest.len()));
    let sidecar = if n == 0 { None } else { std::str::from_utf8(sidecar).ok() };
    if let Ok(img) = decode_color(png, sidecar) {
        assert_eq!(img.data().len(), img.meta().len());
    }
});
