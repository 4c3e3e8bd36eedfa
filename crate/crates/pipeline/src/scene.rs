//! Writing synthetic truth to disk and rendering it off-nadir.

use std::path::{Path, PathBuf};

use satsolar_core::io::{write_color, write_height, write_json, write_labels};
use satsolar_core::raster::{ColorRaster, HeightRaster};
use satsolar_core::reproject::{reproject_values_with_sides, reproject_with_sides_step, ViewGeometry};
use satsolar_core::segment::SegmentStats;
use satsolar_core::synth::SceneTruth;
use satsolar_core::Result;

use crate::paths::{self, with_suffix};

/// Segment stats of the analytic faces, in the form `segment` emits.
pub fn truth_stats(truth: &SceneTruth) -> Vec<SegmentStats> {
    let area = truth.dsm.meta().pixel_area();
    truth
        .faces
        .iter()
        .map(|f| SegmentStats {
            id: f.segment_id,
            building_id: f.building_id,
            pixel_count: f.pixel_count,
            area_m2: f.pixel_count as f64 * area,
            pitch_deg: f.pitch_deg,
            azimuth_deg: f.azimuth_deg,
            mean_normal: f.normal,
        })
        .collect()
}

/// Write every truth raster and record under `prefix`.
pub fn write_truth(truth: &SceneTruth, prefix: &Path) -> Result<Vec<PathBuf>> {
    let p = |s: &str| with_suffix(prefix, s);
    write_height(p(paths::DSM), &truth.dsm)?;
    write_height(p(paths::DTM), &truth.dtm)?;
    write_height(p(paths::HEIGHTMAP), &truth.heightmap)?;
    write_labels(p(paths::BUILDINGS), &truth.buildings.ids)?;
    write_labels(p(paths::SEGMENTS), &truth.segments.ids)?;
    write_json(p(paths::STATS), &truth_stats(truth))?;
    write_json(p(".faces.json"), &truth.faces)?;
    write_color(p(paths::RGB), &truth.rgb)?;
    Ok([
        paths::DSM,
        paths::DTM,
        paths::HEIGHTMAP,
        paths::BUILDINGS,
        paths::SEGMENTS,
        paths::STATS,
        ".faces.json",
        paths::RGB,
    ]
    .iter()
    .map(|s| p(s))
    .collect())
}

/// Height map and colors as the satellite at `view` would see them,
/// building sides included.
pub fn render_offnadir(
    heightmap: &HeightRaster,
    rgb: &ColorRaster,
    view: &ViewGeometry,
    side_step_m: f64,
) -> Result<(HeightRaster, ColorRaster)> {
    let h = reproject_with_sides_step(heightmap, view, side_step_m)?;
    let c = reproject_values_with_sides(rgb, heightmap, view, side_step_m)?;
    Ok((h.values, c.values))
}
