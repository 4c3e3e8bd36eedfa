//! Grid containers shared by every stage of the pipeline.
//!
//! A [`Raster`] is a row-major grid of values with planar geo-metadata and an
//! optional validity channel. Row indices grow southward and column indices
//! grow eastward; map `y` is northing, so it decreases with the row index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ground sampling distance in meters per pixel.
pub const DEFAULT_RESOLUTION: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    /// Map x (easting) of the top-left corner of pixel (0, 0).
    pub origin_x: f64,
    /// Map y (northing) of the top-left corner of pixel (0, 0).
    pub origin_y: f64,
    #[serde(default = "default_resolution")]
    pub spatial_resolution: f64,
    pub width: usize,
    pub height: usize,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

impl GridMeta {
    pub fn new(origin_x: f64, origin_y: f64, spatial_resolution: f64, width: usize, height: usize) -> Result<Self> {
        let meta = Self { origin_x, origin_y, spatial_resolution, width, height };
        meta.validate()?;
        Ok(meta)
    }

    /// Grid anchored at the map origin.
    pub fn with_size(width: usize, height: usize, spatial_resolution: f64) -> Result<Self> {
        Self::new(0.0, 0.0, spatial_resolution, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spatial_resolution.is_finite() && self.spatial_resolution > 0.0) {
            return Err(Error::InvalidGrid(format!("spatial_resolution must be > 0, got {}", self.spatial_resolution)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGrid(format!(
                "width and height must be >= 1, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    /// Map coordinates of a pixel center.
    #[inline]
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        let res = self.spatial_resolution;
        (self.origin_x + (col as f64 + 0.5) * res, self.origin_y - (row as f64 + 0.5) * res)
    }

    /// Fractional (row, col) of a map point, in pixel-center coordinates.
    #[inline]
    pub fn map_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let res = self.spatial_resolution;
        ((self.origin_y - y) / res - 0.5, (x - self.origin_x) / res - 0.5)
    }

    /// (min_x, min_y, max_x, max_y) of the grid footprint.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let res = self.spatial_resolution;
        (
            self.origin_x,
            self.origin_y - self.height as f64 * res,
            self.origin_x + self.width as f64 * res,
            self.origin_y,
        )
    }

    pub fn pixel_area(&self) -> f64 {
        self.spatial_resolution * self.spatial_resolution
    }

    /// Same shape and georeference, up to text round-off in the origin.
    pub fn aligned_with(&self, other: &GridMeta) -> bool {
        let res = self.spatial_resolution;
        self.width == other.width
            && self.height == other.height
            && (res - other.spatial_resolution).abs() <= 1e-12 * res
            && (self.origin_x - other.origin_x).abs() <= 1e-6 * res
            && (self.origin_y - other.origin_y).abs() <= 1e-6 * res
    }

    pub fn ensure_same(&self, other: &GridMeta, what: &str) -> Result<()> {
        if self.aligned_with(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}x{} @ {} ({}, {}) vs {}x{} @ {} ({}, {})",
                self.width,
                self.height,
                self.spatial_resolution,
                self.origin_x,
                self.origin_y,
                other.width,
                other.height,
                other.spatial_resolution,
                other.origin_x,
                other.origin_y
            )))
        }
    }

    /// Sub-grid starting at (row, col), `width`x`height` pixels.
    pub fn window(&self, row: usize, col: usize, width: usize, height: usize) -> Result<GridMeta> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::InvalidGrid(format!(
                "window {width}x{height} at ({row}, {col}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let res = self.spatial_resolution;
        GridMeta::new(self.origin_x + col as f64 * res, self.origin_y - row as f64 * res, res, width, height)
    }
}

/// Row-major grid of `T` with an optional validity channel.
///
/// `valid == None` means every pixel is valid. Invalid pixels keep whatever
/// value is stored in `data`; callers must consult [`Raster::is_valid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    meta: GridMeta,
    data: Vec<T>,
    valid: Option<Vec<bool>>,
}

pub type HeightRaster = Raster<f64>;
pub type FluxRaster = Raster<f64>;
pub type GrayRaster = Raster<u8>;
pub type MaskRaster = Raster<bool>;
pub type LabelRaster = Raster<u32>;
pub type Rgb = [u8; 3];
pub type ColorRaster = Raster<Rgb>;
/// Per-pixel unit normal in (east, north, up) components.
pub type NormalField = Raster<[f64; 3]>;

impl<T: Clone> Raster<T> {
    pub fn filled(meta: GridMeta, value: T) -> Self {
        Self { data: vec![value; meta.len()], meta, valid: None }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(meta: GridMeta, data: Vec<T>) -> Result<Self> {
        meta.validate()?;
        if data.len() != meta.len() {
            return Err(Error::InvalidGrid(format!("expected {} values, got {}", meta.len(), data.len())));
        }
        Ok(Self { meta, data, valid: None })
    }

    pub fn with_validity(mut self, valid: Option<Vec<bool>>) -> Result<Self> {
        if let Some(v) = &valid {
            if v.len() != self.meta.len() {
                return Err(Error::InvalidGrid(format!(
                    "validity mask has {} entries, expected {}",
                    v.len(),
                    self.meta.len()
                )));
            }
        }
        self.valid = match valid {
            Some(v) if v.iter().all(|&b| b) => None,
            other => other,
        };
        Ok(self)
    }

    pub fn from_fn(meta: GridMeta, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(meta.len());
        for row in 0..meta.height {
            for col in 0..meta.width {
                data.push(f(row, col));
            }
        }
        Self { meta, data, valid: None }
    }

    #[inline]
    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.meta.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.meta.height
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn validity(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    #[inline]
    pub fn is_valid(&self, index: usize) -> bool {
        self.valid.as_ref().is_none_or(|v| v[index])
    }

    #[inline]
    pub fn is_valid_at(&self, row: usize, col: usize) -> bool {
        self.is_valid(self.meta.index(row, col))
    }

    pub fn all_valid(&self) -> bool {
        self.valid.is_none()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.as_ref().map_or(self.data.len(), |v| v.iter().filter(|&&b| b).count())
    }

    pub fn set_valid(&mut self, index: usize, valid: bool) {
        match (&mut self.valid, valid) {
            (None, true) => {}
            (None, false) => {
                let mut v = vec![true; self.data.len()];
                v[index] = false;
                self.valid = Some(v);
            }
            (Some(v), b) => v[index] = b,
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &T {
        &self.data[self.meta.index(row, col)]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<&T> {
        if row >= self.meta.height || col >= self.meta.width {
            return None;
        }
        let i = self.meta.index(row, col);
        self.is_valid(i).then(|| &self.data[i])
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Raster<U> {
        Raster { meta: self.meta, data: self.data.iter().map(f).collect(), valid: self.valid.clone() }
    }

    pub fn same_meta<U>(&self, other: &Raster<U>, what: &str) -> Result<()> {
        self.meta.ensure_same(&other.meta, what)
    }
}

impl<T: Clone> Raster<T> {
    /// Copy out a window as a new raster with its own meta.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self> {
        let meta = self.meta.window(row, col, width, height)?;
        let mut data = Vec::with_capacity(meta.len());
        let mut valid = self.valid.as_ref().map(|_| Vec::with_capacity(meta.len()));
        for r in row..row + height {
            let start = self.meta.index(r, col);
            data.extend_from_slice(&self.data[start..start + width]);
            if let (Some(out), Some(src)) = (valid.as_mut(), self.valid.as_ref()) {
                out.extend_from_slice(&src[start..start + width]);
            }
        }
        Raster::from_vec(meta, data)?.with_validity(valid)
    }
}

impl MaskRaster {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Kind of instance map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Buildings,
    RoofSegments,
}

/// Per-pixel instance ids; 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMap {
    pub kind: InstanceKind,
    pub ids: LabelRaster,
}

impl InstanceMap {
    pub fn new(kind: InstanceKind, ids: LabelRaster) -> Self {
        Self { kind, ids }
    }

    pub fn meta(&self) -> &GridMeta {
        self.ids.meta()
    }

    /// Id at a pixel, treating invalid pixels as background.
    #[inline]
    pub fn id(&self, index: usize) -> u32 {
        if self.ids.is_valid(index) {
            self.ids.data()[index]
        } else {
            0
        }
    }

    /// Sorted distinct non-zero ids.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.meta().len()).map(|i| self.id(i)).filter(|&id| id > 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Pixel counts per non-zero id.
    pub fn areas_px(&self) -> std::collections::BTreeMap<u32, usize> {
        let mut out = std::collections::BTreeMap::new();
        for i in 0..self.meta().len() {
            let id = self.id(i);
            if id > 0 {
                *out.entry(id).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn occupancy(&self) -> MaskRaster {
        let data = (0..self.meta().len()).map(|i| self.id(i) > 0).collect();
        Raster::from_vec(*self.meta(), data).expect("shape preserved")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_rejects_bad_values() {
        assert!(GridMeta::new(0.0, 0.0, 0.0, 1, 1).is_err());
        assert!(GridMeta::new(0.0, 0.0, -0.25, 1, 1).is_err());
        assert!(GridMeta::new(0.0, 0.0, 0.25, 0, 4).is_err());
        assert!(GridMeta::new(f64::NAN, 0.0, 0.25, 1, 1).is_err());
        assert!(GridMeta::new(0.0, 0.0, 0.25, 1, 1).is_ok());
    }

    #[test]
    fn pixel_centers_follow_map_frame() {
        let meta = GridMeta::new(100.0, 200.0, 0.5, 4, 3).unwrap();
        assert_eq!(meta.pixel_center(0, 0), (100.25, 199.75));
        // x grows with column, y shrinks with row
        assert_eq!(meta.pixel_center(2, 3), (101.75, 198.75));
        let (r, c) = meta.map_to_pixel(101.75, 198.75);
        assert!((r - 2.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
        assert_eq!(meta.extent(), (100.0, 198.5, 102.0, 200.0));
    }

    #[test]
    fn validity_roundtrip() {
        let meta = GridMeta::with_size(3, 2, 1.0).unwrap();
        let mut r = Raster::filled(meta, 1.0);
        assert!(r.all_valid());
        r.set_valid(4, false);
        assert!(!r.is_valid(4));
        assert_eq!(r.valid_count(), 5);
        assert_eq!(r.get(1, 1), None);
        assert_eq!(r.get(1, 0), Some(&1.0));
        // an all-true mask collapses back to None
        let r = r.with_validity(Some(vec![true; 6])).unwrap();
        assert!(r.all_valid());
    }

    #[test]
    fn crop_keeps_georeference() {
        let meta = GridMeta::new(10.0, 20.0, 1.0, 4, 4).unwrap();
        let r = Raster::from_fn(meta, |row, col| (row * 4 + col) as f64);
        let c = r.crop(1, 2, 2, 3).unwrap();
        assert_eq!(c.meta().origin_x, 12.0);
        assert_eq!(c.meta().origin_y, 19.0);
        assert_eq!(c.data(), &[6.0, 7.0, 10.0, 11.0, 14.0, 15.0]);
        assert!(r.crop(3, 3, 2, 2).is_err());
    }
}
