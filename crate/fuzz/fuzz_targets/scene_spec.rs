#![no_main]

use libfuzzer_sys::fuzz_target;
use satsolar_core::synth::{render_scene, SceneSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = SceneSpec::from_json(text) else { return };
    // keep rendering cheap
    if spec.meta.len() <= 1 << 16 && spec.buildings.len() <= 64 {
        let _ = render_scene(&spec);
    }
});
