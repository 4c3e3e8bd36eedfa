//! The `run` driver: every stage in order, each output persisted.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use satsolar_core::infill::infill_with;
use satsolar_core::io::{
    false_color, read_color, read_height, read_labels, write_color, write_gray, write_height, write_json, write_labels,
    write_mask,
};
use satsolar_core::masking::coverage_mask;
use satsolar_core::panels::{building_energy, place_panels, render_overlay};
use satsolar_core::raster::{ColorRaster, GridMeta, HeightRaster, InstanceKind, InstanceMap, MaskRaster, Raster};
use satsolar_core::reproject::{reproject, Direction, ViewGeometry};
use satsolar_core::resample::{compose_dsm, resample_bilinear, subtract_terrain};
use satsolar_core::segment::{segment_normals, segment_roofs_detailed};
use satsolar_core::solar::{annual_flux_within, sun_positions};
use satsolar_core::stitch::{split_raster, split_tiles, stitch, TilePlacement};
use satsolar_core::terrain::hillshade;

use crate::config::PipelineConfig;
use crate::evaluate::{evaluate, load_prefix, EnergyFile, PrefixData};
use crate::paths::{self, with_suffix};

/// A stage failed; outputs written by earlier stages are left in place.
#[derive(Debug, Error)]
#[error("stage {stage} failed: {source}")]
pub struct PipelineError {
    pub stage: String,
    #[source]
    pub source: satsolar_core::Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub version: String,
    pub stages: Vec<StageRecord>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    /// Raster and JSON outputs of every stage, in stage order.
    pub fn outputs(&self) -> impl Iterator<Item = &PathBuf> {
        self.stages.iter().flat_map(|s| s.outputs.iter())
    }
}

struct Recorder {
    prefix: PathBuf,
    stages: Vec<StageRecord>,
}

impl Recorder {
    fn stage<T>(
        &mut self,
        name: &str,
        body: impl FnOnce(&Path, &mut Vec<PathBuf>) -> satsolar_core::Result<T>,
    ) -> Result<T, PipelineError> {
        let start = Instant::now();
        let mut outputs = Vec::new();
        let out =
            body(&self.prefix, &mut outputs).map_err(|source| PipelineError { stage: name.to_string(), source })?;
        self.stages.push(StageRecord { name: name.to_string(), outputs, wall_time_s: start.elapsed().as_secs_f64() });
        Ok(out)
    }
}

/// Record a written file.
fn put(outputs: &mut Vec<PathBuf>, prefix: &Path, suffix: &str) -> PathBuf {
    let p = with_suffix(prefix, suffix);
    outputs.push(p.clone());
    p
}

struct Inputs {
    rgb: ColorRaster,
    heights: Option<HeightRaster>,
    dsm: Option<HeightRaster>,
    dtm: Option<HeightRaster>,
    buildings: InstanceMap,
}

fn load_inputs(cfg: &PipelineConfig) -> satsolar_core::Result<Inputs> {
    let rgb = read_color(&cfg.rgb)?;
    let heights = cfg.heightmap.as_ref().map(read_height).transpose()?;
    let dsm = match heights {
        Some(_) => None,
        None => cfg.dsm.as_ref().map(read_height).transpose()?,
    };
    let dtm = cfg.dtm.as_ref().map(read_height).transpose()?;
    let buildings = InstanceMap::new(InstanceKind::Buildings, read_labels(&cfg.buildings)?);
    let meta = *rgb.meta();
    if let Some(h) = heights.as_ref().or(dsm.as_ref()) {
        meta.ensure_same(h.meta(), "height input")?;
    }
    meta.ensure_same(buildings.meta(), "building instances")?;
    Ok(Inputs { rgb, heights, dsm, dtm, buildings })
}

/// Nadir heights and colors plus the occlusion mask, tile by tile.
fn reproject_tiled(
    heights: &HeightRaster,
    rgb: &ColorRaster,
    view: &ViewGeometry,
    tile: usize,
    overlap: usize,
) -> satsolar_core::Result<(HeightRaster, ColorRaster, MaskRaster)> {
    let meta = *heights.meta();
    let windows = split_tiles(&meta, tile, overlap)?;
    let margin = overlap / 2;
    let mut h_tiles = Vec::with_capacity(windows.len());
    let mut c_tiles = Vec::with_capacity(windows.len());
    for (h, c) in split_raster(heights, &windows, margin)?.into_iter().zip(split_raster(rgb, &windows, margin)?) {
        let hr = reproject(&h.tile, &h.tile, view, Direction::ToNadir)?;
        let cr = reproject(&c.tile, &h.tile, view, Direction::ToNadir)?;
        // colors only count where a height landed
        let landed = hr.occlusion.data().iter().map(|&o| !o).collect();
        c_tiles.push(TilePlacement {
            tile: cr.values.with_validity(Some(landed))?,
            row_offset: c.row_offset,
            col_offset: c.col_offset,
            margin,
        });
        h_tiles.push(TilePlacement { tile: hr.values, row_offset: h.row_offset, col_offset: h.col_offset, margin });
    }
    let h = stitch(&h_tiles, &meta)?;
    let c = stitch(&c_tiles, &meta)?;
    let occlusion = Raster::from_vec(meta, (0..meta.len()).map(|i| !h.is_valid(i)).collect())?;
    Ok((h, c, occlusion))
}

fn without_validity<T: Clone>(r: Raster<T>) -> satsolar_core::Result<Raster<T>> {
    r.with_validity(None)
}

/// Run every stage with the ambient rayon pool.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    let setup = |source| PipelineError { stage: "setup".into(), source };
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| setup(e.into()))?;
    let mut rec = Recorder { prefix: cfg.output_dir.join("run"), stages: Vec::new() };
    let mut warnings = Vec::new();

    let inputs = rec.stage("load", |_, _| load_inputs(cfg))?;
    let meta: GridMeta = *inputs.rgb.meta();
    if (meta.spatial_resolution - cfg.resolution).abs() > 1e-9 {
        warnings
            .push(format!("input resolution {} differs from configured {}", meta.spatial_resolution, cfg.resolution));
    }

    let (terrain, offnadir_heights) = rec.stage("compose-dsm", |prefix, out| {
        let terrain = match &inputs.dtm {
            Some(dtm) => without_validity(resample_bilinear(dtm, &meta)?)?,
            None => Raster::filled(meta, 0.0),
        };
        let heights = match (&inputs.heights, &inputs.dsm) {
            (Some(h), _) => h.clone(),
            (None, Some(dsm)) if inputs.dtm.is_some() => subtract_terrain(dsm, &terrain)?,
            (None, Some(dsm)) => {
                let floor =
                    (0..meta.len()).filter(|&i| dsm.is_valid(i)).map(|i| dsm.data()[i]).fold(f64::INFINITY, f64::min);
                dsm.map(|v| v - floor).with_validity(dsm.validity().map(<[bool]>::to_vec))?
            }
            (None, None) => return Err(satsolar_core::Error::Empty("no height input".into())),
        };
        write_height(put(out, prefix, ".terrain.asc"), &terrain)?;
        write_height(put(out, prefix, ".offnadir.heightmap.asc"), &heights)?;
        Ok((terrain, heights))
    })?;
    if inputs.dsm.is_some() && inputs.dtm.is_none() {
        warnings.push("no terrain model: heights measured from the lowest DSM pixel".into());
    }

    let view = ViewGeometry::new(cfg.view.elevation_deg, cfg.view.azimuth_deg)
        .map_err(|source| PipelineError { stage: "reproject".into(), source })?;
    let (nadir_heights, nadir_rgb, occlusion) = rec.stage("reproject", |prefix, out| {
        let (h, c, occ) = reproject_tiled(&offnadir_heights, &inputs.rgb, &view, cfg.tile_size, cfg.tile_overlap)?;
        write_height(put(out, prefix, ".nadir.heightmap.asc"), &h)?;
        write_color(put(out, prefix, ".nadir.rgb.png"), &c)?;
        write_mask(put(out, prefix, ".occlusion.asc"), &occ)?;
        Ok((h, c, occ))
    })?;

    let (heights, rgb) = rec.stage("infill", |prefix, out| {
        let params = cfg.infill.params();
        let h = without_validity(infill_with(&nadir_heights, &occlusion, None, &params)?)?;
        let c = without_validity(infill_with(&nadir_rgb, &occlusion, None, &params)?)?;
        write_height(put(out, prefix, paths::HEIGHTMAP), &h)?;
        write_color(put(out, prefix, paths::RGB), &c)?;
        Ok((h, c))
    })?;

    let dsm = rec.stage("dsm", |prefix, out| {
        let dsm = compose_dsm(&heights, &terrain)?;
        write_height(put(out, prefix, paths::DSM), &dsm)?;
        write_gray(put(out, prefix, ".hillshade.png"), &hillshade(&dsm, 45.0, 315.0)?)?;
        Ok(dsm)
    })?;

    let seg = rec.stage("segment", |prefix, out| {
        let seg = segment_roofs_detailed(&dsm, &inputs.buildings, &cfg.segmentation.params())?;
        write_labels(put(out, prefix, paths::SEGMENTS), &seg.segments.ids)?;
        write_json(put(out, prefix, paths::STATS), &seg.stats)?;
        write_json(put(out, prefix, ".energy_trace.json"), &seg.traces)?;
        Ok(seg)
    })?;

    let flux = rec.stage("flux", |prefix, out| {
        let normals = segment_normals(&dsm, &seg.segments)?;
        let suns = sun_positions(cfg.latitude_deg, cfg.samples_per_day)?;
        let region = inputs.buildings.occupancy();
        let flux = annual_flux_within(&dsm, &normals, &suns, &cfg.irradiance, Some(region.data()))?;
        write_height(put(out, prefix, ".flux.asc"), &flux)?;
        write_color(put(out, prefix, ".flux.png"), &false_color(&flux))?;
        Ok(flux)
    })?;

    let energy = rec.stage("panels", |prefix, out| {
        let placed = place_panels(&seg.segments, &seg.stats, &flux, &cfg.panel)?;
        write_json(put(out, prefix, ".panels.json"), &placed)?;
        write_color(put(out, prefix, ".panels.png"), &render_overlay(&rgb, &placed))?;
        let energy = EnergyFile {
            cap_w: cfg.energy_cap_w,
            uncapped_kwh: building_energy(&placed, None, cfg.panel.rated_power_w),
            capped_kwh: building_energy(&placed, Some(cfg.energy_cap_w), cfg.panel.rated_power_w),
        };
        write_json(put(out, prefix, paths::ENERGY), &energy)?;
        Ok(energy)
    })?;

    if let Some(label_prefix) = &cfg.label_prefix {
        rec.stage("evaluate", |prefix, out| {
            let label = load_prefix(label_prefix)?;
            let visible = occlusion.map(|&o| !o);
            let mut masks = vec![visible];
            if let (Some(b), Some(s)) = (&label.buildings, &label.segments) {
                masks.push(coverage_mask(b, s, 0.5)?);
            }
            let pred = PrefixData {
                dsm: Some(dsm.clone()),
                buildings: Some(inputs.buildings.clone()),
                segments: Some(seg.segments.clone()),
                stats: Some(seg.stats.clone()),
                energy: Some(energy.clone()),
            };
            let report = evaluate(&pred, &label, &masks)?;
            write_mask(put(out, prefix, ".eval_mask.asc"), &satsolar_core::masking::combine_masks(&masks)?)?;
            write_json(put(out, prefix, ".report.json"), &report)?;
            Ok(())
        })?;
    }

    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        stages: rec.stages,
        warnings,
    };
    write_json(cfg.output_dir.join("manifest.json"), &manifest)
        .map_err(|source| PipelineError { stage: "manifest".into(), source })?;
    Ok(manifest)
}

/// [`run_pipeline`] on a dedicated pool of `workers` threads.
pub fn run_pipeline_with_workers(cfg: &PipelineConfig, workers: usize) -> Result<RunManifest, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| PipelineError {
        stage: "setup".into(),
        source: satsolar_core::Error::InvalidArgument(e.to_string()),
    })?;
    pool.install(|| run_pipeline(cfg))
}
