//! Parallax reprojection between off-nadir and nadir views.
//!
//! Under a distant-sensor, parallel-ray model a pixel at height `h` above
//! terrain is displaced by `(h / res) * tan(angle)` pixels along each axis.
//! Pixels are splatted in ascending height so the highest source wins each
//! target pixel (a z-buffer); targets nobody lands on are occlusions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::raster::{HeightRaster, LabelRaster, MaskRaster, Raster};

/// Satellite viewing angles and the derived per-axis reprojection angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewGeometry {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub angle_x_deg: f64,
    pub angle_y_deg: f64,
}

/// `(angle_x, angle_y)` in degrees for a satellite at (elevation, azimuth).
pub fn derive_angles(elevation_deg: f64, azimuth_deg: f64) -> Result<(f64, f64)> {
    if !(elevation_deg > 0.0 && elevation_deg <= 90.0) {
        return Err(invalid_arg(format!("elevation must be in (0, 90], got {elevation_deg}")));
    }
    if !azimuth_deg.is_finite() {
        return Err(invalid_arg("azimuth must be finite"));
    }
    if elevation_deg == 90.0 {
        return Ok((0.0, 0.0));
    }
    let tan_el = elevation_deg.to_radians().tan();
    let az = azimuth_deg.to_radians();
    let angle_y = (az.cos() / tan_el).atan().to_degrees();
    let angle_x = (az.sin() / tan_el).atan().to_degrees();
    Ok((angle_x, angle_y))
}

impl ViewGeometry {
    pub fn new(elevation_deg: f64, azimuth_deg: f64) -> Result<Self> {
        let (angle_x_deg, angle_y_deg) = derive_angles(elevation_deg, azimuth_deg)?;
        Ok(Self { elevation_deg, azimuth_deg, angle_x_deg, angle_y_deg })
    }

    pub fn nadir() -> Self {
        Self::new(90.0, 0.0).expect("nadir is valid")
    }

    pub fn is_nadir(&self) -> bool {
        self.angle_x_deg == 0.0 && self.angle_y_deg == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Nadir frame into the satellite view frame (displacement as written).
    ToOffnadir,
    /// Satellite view frame back to nadir (displacement negated).
    ToNadir,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::ToOffnadir => 1.0,
            Direction::ToNadir => -1.0,
        }
    }
}

/// Pre-rounding displacement `(d_row, d_col)` in pixels for a pixel at `height`.
#[inline]
pub fn displacement(view: &ViewGeometry, height: f64, resolution: f64, dir: Direction) -> (f64, f64) {
    if view.is_nadir() {
        return (0.0, 0.0);
    }
    let s = dir.sign();
    let scaled = height / resolution;
    (s * scaled * view.angle_y_deg.to_radians().tan(), s * scaled * view.angle_x_deg.to_radians().tan())
}

/// Output of a reprojection: values, winning heights, occlusions and provenance.
#[derive(Clone, Debug)]
pub struct ReprojectionResult<T> {
    pub values: Raster<T>,
    /// Height of the winning sub-projection, invalid where occluded.
    pub heights: HeightRaster,
    /// True where no source pixel landed.
    pub occlusion: MaskRaster,
    /// Winning source pixel (row-major index) per target.
    pub provenance: Vec<Option<usize>>,
}

impl<T> ReprojectionResult<T> {
    /// Provenance as a label raster, invalid where occluded.
    pub fn provenance_raster(&self) -> LabelRaster {
        let meta = *self.occlusion.meta();
        let data = self.provenance.iter().map(|p| p.map_or(0, |i| i as u32)).collect();
        let valid = self.provenance.iter().map(Option::is_some).collect();
        Raster::from_vec(meta, data).and_then(|r| r.with_validity(Some(valid))).expect("shape preserved")
    }
}

/// One splat: a source pixel projected at a given height.
#[derive(Clone, Copy)]
struct Splat {
    height: f64,
    source: usize,
}

/// Z-buffer all splats. Ascending height, stable in splat order, so the last
/// writer at a target is the highest (ties: later in row-major order).
fn zbuffer(
    splats: &mut [Splat],
    meta: &crate::raster::GridMeta,
    view: &ViewGeometry,
    dir: Direction,
) -> (Vec<Option<usize>>, Vec<f64>) {
    splats.sort_by(|a, b| a.height.total_cmp(&b.height));
    let (w, h) = (meta.width as f64, meta.height as f64);
    let res = meta.spatial_resolution;
    let mut winner = vec![None; meta.len()];
    let mut zbuf = vec![0.0; meta.len()];
    for s in splats.iter() {
        let (row, col) = meta.row_col(s.source);
        let (dr, dc) = displacement(view, s.height, res, dir);
        let tr = (row as f64 + dr).round();
        let tc = (col as f64 + dc).round();
        if tr < 0.0 || tc < 0.0 || tr >= h || tc >= w {
            continue;
        }
        let t = meta.index(tr as usize, tc as usize);
        winner[t] = Some(s.source);
        zbuf[t] = s.height;
    }
    (winner, zbuf)
}

fn assemble<T: Clone>(
    values: &Raster<T>,
    winner: Vec<Option<usize>>,
    zbuf: Vec<f64>,
    value_of: impl Fn(usize, f64) -> T,
) -> Result<ReprojectionResult<T>> {
    let meta = *values.meta();
    let fallback = values.data()[0].clone();
    let mut out = Vec::with_capacity(meta.len());
    let mut valid = Vec::with_capacity(meta.len());
    for (t, w) in winner.iter().enumerate() {
        match *w {
            Some(src) => {
                out.push(value_of(src, zbuf[t]));
                valid.push(values.is_valid(src));
            }
            None => {
                out.push(fallback.clone());
                valid.push(false);
            }
        }
    }
    let occlusion = Raster::from_vec(meta, winner.iter().map(Option::is_none).collect())?;
    let height_valid = winner.iter().map(Option::is_some).collect();
    Ok(ReprojectionResult {
        values: Raster::from_vec(meta, out)?.with_validity(Some(valid))?,
        heights: Raster::from_vec(meta, zbuf)?.with_validity(Some(height_valid))?,
        occlusion,
        provenance: winner,
    })
}

/// Reproject `values` using per-pixel height above terrain.
///
/// Pixels with invalid heights are not projected.
pub fn reproject<T: Clone>(
    values: &Raster<T>,
    heights: &HeightRaster,
    view: &ViewGeometry,
    dir: Direction,
) -> Result<ReprojectionResult<T>> {
    values.same_meta(heights, "reproject")?;
    let mut splats: Vec<Splat> = (0..heights.meta().len())
        .filter(|&i| heights.is_valid(i))
        .map(|i| Splat { height: heights.data()[i], source: i })
        .collect();
    let (winner, zbuf) = zbuffer(&mut splats, heights.meta(), view, dir);
    assemble(values, winner, zbuf, |src, _| values.data()[src].clone())
}

/// Lowest valid 4-neighbor height, or the pixel's own height when it has none lower.
pub fn base_height(heights: &HeightRaster, index: usize) -> f64 {
    let meta = heights.meta();
    let (row, col) = meta.row_col(index);
    let mut base = heights.data()[index];
    let mut consider = |r: usize, c: usize| {
        let j = meta.index(r, c);
        if heights.is_valid(j) {
            base = base.min(heights.data()[j]);
        }
    };
    if row > 0 {
        consider(row - 1, col);
    }
    if row + 1 < meta.height {
        consider(row + 1, col);
    }
    if col > 0 {
        consider(row, col - 1);
    }
    if col + 1 < meta.width {
        consider(row, col + 1);
    }
    base
}

/// Heights `base, base + step, ...` strictly below `top`, then `top` itself.
pub fn ladder(base: f64, top: f64, step: f64) -> impl Iterator<Item = f64> {
    let rungs = if base < top && step > 0.0 { ((top - base) / step).ceil() as usize } else { 0 };
    (0..rungs).map(move |k| base + k as f64 * step).filter(move |&h| h < top).chain(std::iter::once(top))
}

pub const DEFAULT_SIDE_STEP_M: f64 = 1.0;

fn side_splats(heights: &HeightRaster, step: f64) -> Vec<Splat> {
    let mut splats = Vec::with_capacity(heights.meta().len() * 2);
    for i in 0..heights.meta().len() {
        if !heights.is_valid(i) {
            continue;
        }
        let top = heights.data()[i];
        for height in ladder(base_height(heights, i), top, step) {
            splats.push(Splat { height, source: i });
        }
    }
    splats
}

/// Nadir-to-off-nadir reprojection of a height map that also draws building
/// walls: every pixel is splatted at each rung of a ladder from its lowest
/// 4-neighbor up to its own height. Output values are the rung heights.
pub fn reproject_with_sides(heights: &HeightRaster, view: &ViewGeometry) -> Result<ReprojectionResult<f64>> {
    reproject_with_sides_step(heights, view, DEFAULT_SIDE_STEP_M)
}

pub fn reproject_with_sides_step(
    heights: &HeightRaster,
    view: &ViewGeometry,
    step_m: f64,
) -> Result<ReprojectionResult<f64>> {
    if !(step_m > 0.0) {
        return Err(invalid_arg("side ladder step must be > 0"));
    }
    let mut splats = side_splats(heights, step_m);
    let (winner, zbuf) = zbuffer(&mut splats, heights.meta(), view, Direction::ToOffnadir);
    assemble(heights, winner, zbuf, |_, z| z)
}

/// Like [`reproject_with_sides`] but every rung carries the source pixel's value
/// from `values` (labels or colors on building walls).
pub fn reproject_values_with_sides<T: Clone>(
    values: &Raster<T>,
    heights: &HeightRaster,
    view: &ViewGeometry,
    step_m: f64,
) -> Result<ReprojectionResult<T>> {
    values.same_meta(heights, "reproject_values_with_sides")?;
    if !(step_m > 0.0) {
        return Err(invalid_arg("side ladder step must be > 0"));
    }
    let mut splats = side_splats(heights, step_m);
    let (winner, zbuf) = zbuffer(&mut splats, heights.meta(), view, Direction::ToOffnadir);
    assemble(values, winner, zbuf, |src, _| values.data()[src].clone())
}
