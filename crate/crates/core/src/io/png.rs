//! PNG rasters with JSON sidecars carrying the grid georeference.
//!
//! The sidecar for `tile.rgb.png` is `tile.rgb.json`.

use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Rgb as ImgRgb, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{ColorRaster, GrayRaster, GridMeta, Raster, Rgb, DEFAULT_RESOLUTION};

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Decode PNG bytes into a color raster, georeferenced by an optional sidecar.
///
/// Without a sidecar the grid sits at the map origin with the default
/// resolution.
pub fn decode_color(png: &[u8], sidecar_json: Option<&str>) -> Result<ColorRaster> {
    let img = image::load_from_memory_with_format(png, image::ImageFormat::Png)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let meta = match sidecar_json {
        Some(text) => {
            let meta: GridMeta = serde_json::from_str(text)?;
            if meta.width != w || meta.height != h {
                return Err(Error::GridMismatch(format!(
                    "sidecar says {}x{}, image is {w}x{h}",
                    meta.width, meta.height
                )));
            }
            meta.validate()?;
            meta
        }
        None => GridMeta::with_size(w, h, DEFAULT_RESOLUTION)?,
    };
    let data = img.pixels().map(|p| p.0).collect();
    Raster::from_vec(meta, data)
}

pub fn read_color(path: impl AsRef<Path>) -> Result<ColorRaster> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let side = sidecar_path(path);
    let text = if side.exists() { Some(std::fs::read_to_string(&side)?) } else { None };
    decode_color(&bytes, text.as_deref())
}

fn write_sidecar(path: &Path, meta: &GridMeta) -> Result<()> {
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Invalid pixels are written black.
pub fn write_color(path: impl AsRef<Path>, r: &ColorRaster) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (r.width() as u32, r.height() as u32);
    let img: RgbImage = ImageBuffer::from_fn(w, h, |x, y| {
        let i = r.meta().index(y as usize, x as usize);
        ImgRgb(if r.is_valid(i) { r.data()[i] } else { [0, 0, 0] })
    });
    img.save_with_format(path, image::ImageFormat::Png)?;
    write_sidecar(path, r.meta())
}

pub fn write_gray(path: impl AsRef<Path>, r: &GrayRaster) -> Result<()> {
    let path = path.as_ref();
    let img =
        GrayImage::from_raw(r.width() as u32, r.height() as u32, r.data().to_vec()).expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)?;
    write_sidecar(path, r.meta())
}

const RAMP: [(f64, Rgb); 5] =
    [(0.0, [0, 0, 4]), (0.25, [87, 16, 110]), (0.5, [188, 55, 84]), (0.75, [249, 142, 9]), (1.0, [252, 255, 164])];

fn ramp_color(t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    for pair in RAMP.windows(2) {
        let ((t0, c0), (t1, c1)) = (pair[0], pair[1]);
        if t <= t1 {
            let f = (t - t0) / (t1 - t0);
            let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
            return [mix(c0[0], c1[0]), mix(c0[1], c1[1]), mix(c0[2], c1[2])];
        }
    }
    RAMP[RAMP.len() - 1].1
}

/// False-color rendering of a scalar raster, stretched between its valid min and max.
pub fn false_color(r: &Raster<f64>) -> ColorRaster {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in r.data().iter().enumerate() {
        if r.is_valid(i) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = r.map(|&v| ramp_color((v - lo) / span));
    for i in 0..r.data().len() {
        if !r.is_valid(i) {
            out.data_mut()[i] = [0, 0, 0];
        }
    }
    out
}
