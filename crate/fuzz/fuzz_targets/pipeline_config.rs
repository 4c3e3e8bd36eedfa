#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use satsolar_pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_json(text, Path::new("/base")) {
        assert!(cfg.violations().is_empty());
    }
});
