#![allow(dead_code)]

use std::path::{Path, PathBuf};

use satsolar_core::io::{write_color, write_height, write_labels};
use satsolar_core::raster::GridMeta;
use satsolar_core::reproject::ViewGeometry;
use satsolar_core::synth::{random_scene, render_scene, RandomSceneParams, SceneTruth};
use satsolar_pipeline::scene::{render_offnadir, write_truth};
use satsolar_pipeline::PipelineConfig;

pub struct Scenario {
    pub truth: SceneTruth,
    pub config: PipelineConfig,
    pub truth_prefix: PathBuf,
}

/// A random scene rendered off-nadir and written under `dir`, with a config
/// that runs it and evaluates against the truth.
pub fn scenario(dir: &Path, size: usize, seed: u64, elevation: f64, azimuth: f64) -> Scenario {
    let meta = GridMeta::new(0.0, size as f64 * 0.25, 0.25, size, size).unwrap();
    let spec = random_scene(&RandomSceneParams::new(meta), seed).unwrap();
    let truth = render_scene(&spec).unwrap();
    let truth_prefix = dir.join("truth");
    write_truth(&truth, &truth_prefix).unwrap();
    let view = ViewGeometry::new(elevation, azimuth).unwrap();
    let (heights, rgb) = render_offnadir(&truth.heightmap, &truth.rgb, &view, 1.0).unwrap();
    write_height(dir.join("input.heightmap.asc"), &heights).unwrap();
    write_color(dir.join("input.rgb.png"), &rgb).unwrap();
    write_labels(dir.join("input.buildings.asc"), &truth.buildings.ids).unwrap();
    write_height(dir.join("input.dtm.asc"), &truth.dtm).unwrap();
    let text = serde_json::json!({
        "rgb": "input.rgb.png",
        "heightmap": "input.heightmap.asc",
        "dtm": "input.dtm.asc",
        "buildings": "input.buildings.asc",
        "view": {"elevation_deg": elevation, "azimuth_deg": azimuth},
        "latitude_deg": 37.4,
        "label_prefix": "truth",
        "output_dir": "out",
    })
    .to_string();
    std::fs::write(dir.join("config.json"), &text).unwrap();
    let config = satsolar_pipeline::validate_config(dir.join("config.json")).unwrap();
    Scenario { truth, config, truth_prefix }
}
