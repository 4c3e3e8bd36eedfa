//! Pipeline configuration: JSON schema, defaults and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use satsolar_core::infill::DiffusionParams;
use satsolar_core::panels::PanelSpec;
use satsolar_core::raster::DEFAULT_RESOLUTION;
use satsolar_core::segment::SegmentParams;
use satsolar_core::solar::sun::MAX_LATITUDE_DEG;
use satsolar_core::solar::IrradianceModel;

pub const DEFAULT_TILE_SIZE: usize = 1024;
pub const DEFAULT_TILE_OVERLAP: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self { elevation_deg: 90.0, azimuth_deg: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub lambda: f64,
    pub data_cap_deg: f64,
    pub min_area_m2: f64,
    pub passes: usize,
    pub refit_rounds: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        let p = SegmentParams::default();
        Self {
            lambda: p.lambda,
            data_cap_deg: p.data_cap_deg,
            min_area_m2: p.min_area_m2,
            passes: p.passes,
            refit_rounds: p.refit_rounds,
        }
    }
}

impl SegmentationConfig {
    pub fn params(&self) -> SegmentParams {
        SegmentParams {
            lambda: self.lambda,
            data_cap_deg: self.data_cap_deg,
            min_area_m2: self.min_area_m2,
            passes: self.passes,
            refit_rounds: self.refit_rounds,
            ..SegmentParams::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfillConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub blur_radius: usize,
}

impl Default for InfillConfig {
    fn default() -> Self {
        let d = DiffusionParams::default();
        Self { tolerance: d.tolerance, max_iterations: d.max_iterations, blur_radius: d.blur_radius }
    }
}

impl InfillConfig {
    pub fn params(&self) -> DiffusionParams {
        DiffusionParams {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            blur_radius: self.blur_radius,
        }
    }
}

/// Everything `run` needs. Relative paths are resolved against the config
/// file's directory by [`validate_config`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Off-nadir RGB image (PNG with a GridMeta sidecar).
    pub rgb: PathBuf,
    /// Height above ground in the image frame (ASCII grid).
    #[serde(default)]
    pub heightmap: Option<PathBuf>,
    /// Surface model in the image frame; used when `heightmap` is absent.
    #[serde(default)]
    pub dsm: Option<PathBuf>,
    /// Terrain model at any resolution covering the scene.
    #[serde(default)]
    pub dtm: Option<PathBuf>,
    /// Nadir building instance ids (ASCII grid).
    pub buildings: PathBuf,
    #[serde(default)]
    pub view: ViewConfig,
    pub latitude_deg: f64,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_tile_size")]
    pub tile_size: usize,
    #[serde(default = "default_tile_overlap")]
    pub tile_overlap: usize,
    #[serde(default)]
    pub segmentation: SegmentationConfig,
    #[serde(default)]
    pub infill: InfillConfig,
    #[serde(default = "default_samples_per_day")]
    pub samples_per_day: usize,
    #[serde(default)]
    pub irradiance: IrradianceModel,
    #[serde(default)]
    pub panel: PanelSpec,
    #[serde(default = "default_cap")]
    pub energy_cap_w: f64,
    /// Prefix of truth files (`P.dsm.asc`, `P.segments.asc`, ...) to evaluate against.
    #[serde(default)]
    pub label_prefix: Option<PathBuf>,
    pub output_dir: PathBuf,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}
fn default_tile_size() -> usize {
    DEFAULT_TILE_SIZE
}
fn default_tile_overlap() -> usize {
    DEFAULT_TILE_OVERLAP
}
fn default_samples_per_day() -> usize {
    24
}
fn default_cap() -> f64 {
    5000.0
}

/// All problems found in a config file.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl PipelineConfig {
    /// Parse JSON text and check it, resolving relative paths against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, ConfigErrors> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| ConfigErrors(vec![format!("invalid config JSON: {e}")]))?;
        cfg.resolve(base);
        let errors = cfg.violations();
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(errors))
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.rgb);
        fix(&mut self.buildings);
        fix(&mut self.output_dir);
        for p in [&mut self.heightmap, &mut self.dsm, &mut self.dtm, &mut self.label_prefix].into_iter().flatten() {
            fix(p);
        }
    }

    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let need = |out: &mut Vec<String>, what: &str, p: &Path| {
            if !p.is_file() {
                out.push(format!("{what} file not found: {}", p.display()));
            }
        };
        need(&mut out, "rgb", &self.rgb);
        need(&mut out, "buildings", &self.buildings);
        match (&self.heightmap, &self.dsm) {
            (Some(h), _) => need(&mut out, "heightmap", h),
            (None, Some(d)) => need(&mut out, "dsm", d),
            (None, None) => out.push("one of heightmap or dsm must be given".into()),
        }
        if let Some(t) = &self.dtm {
            need(&mut out, "dtm", t);
        }
        let v = &self.view;
        if !(v.elevation_deg > 0.0 && v.elevation_deg <= 90.0) {
            out.push(format!("elevation must be in (0, 90], got {}", v.elevation_deg));
        }
        if !v.azimuth_deg.is_finite() {
            out.push("azimuth must be finite".into());
        }
        if !(self.latitude_deg.abs() <= MAX_LATITUDE_DEG) {
            out.push(format!("latitude must be within +-{MAX_LATITUDE_DEG} degrees, got {}", self.latitude_deg));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            out.push(format!("resolution must be positive, got {}", self.resolution));
        }
        if self.tile_size < 16 {
            out.push(format!("tile_size must be at least 16, got {}", self.tile_size));
        }
        if self.tile_overlap >= self.tile_size {
            out.push(format!("tile_overlap {} must be smaller than tile_size {}", self.tile_overlap, self.tile_size));
        }
        let s = &self.segmentation;
        if !(s.lambda >= 0.0 && s.lambda.is_finite()) {
            out.push(format!("segmentation.lambda must be >= 0, got {}", s.lambda));
        }
        if !(s.data_cap_deg > 0.0 && s.data_cap_deg <= 180.0) {
            out.push(format!("segmentation.data_cap_deg must be in (0, 180], got {}", s.data_cap_deg));
        }
        if !(s.min_area_m2 >= 0.0 && s.min_area_m2.is_finite()) {
            out.push(format!("segmentation.min_area_m2 must be >= 0, got {}", s.min_area_m2));
        }
        if s.passes == 0 {
            out.push("segmentation.passes must be positive".into());
        }
        let i = &self.infill;
        if !(i.tolerance > 0.0) || i.max_iterations == 0 {
            out.push("infill.tolerance and infill.max_iterations must be positive".into());
        }
        if self.samples_per_day == 0 {
            out.push("samples_per_day must be positive".into());
        }
        if let Err(e) = self.irradiance.validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.panel.validate() {
            out.push(e.to_string());
        }
        if !(self.energy_cap_w > 0.0 && self.energy_cap_w.is_finite()) {
            out.push(format!("energy_cap_w must be positive, got {}", self.energy_cap_w));
        }
        out
    }
}

/// Read and check a config file, reporting every violation at once.
pub fn validate_config(path: impl AsRef<Path>) -> Result<PipelineConfig, ConfigErrors> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    PipelineConfig::from_json(&text, base)
}
