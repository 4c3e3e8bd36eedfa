//! Bilinear resampling and DSM composition.

use crate::error::{Error, Result};
use crate::raster::{GridMeta, HeightRaster, Raster};

/// Bilinear sample at fractional pixel-center coordinates.
///
/// Returns `None` outside the hull of pixel centers, or when any sample with
/// non-zero weight is invalid.
#[inline]
pub fn bilinear_at(h: &HeightRaster, row_f: f64, col_f: f64) -> Option<f64> {
    let (w, ht) = (h.width(), h.height());
    if !(row_f >= 0.0 && col_f >= 0.0 && row_f <= (ht - 1) as f64 && col_f <= (w - 1) as f64) {
        return None;
    }
    let r0 = (row_f.floor() as usize).min(ht.saturating_sub(2));
    let c0 = (col_f.floor() as usize).min(w.saturating_sub(2));
    let fr = row_f - r0 as f64;
    let fc = col_f - c0 as f64;
    let get = |r: usize, c: usize| {
        let i = r * w + c;
        h.is_valid(i).then(|| h.data()[i])
    };
    // lerp form keeps constants exact and skips zero-weight samples
    let along_row = |r: usize| -> Option<f64> {
        let a = get(r, c0)?;
        if fc == 0.0 {
            return Some(a);
        }
        let b = get(r, c0 + 1)?;
        Some(a + fc * (b - a))
    };
    let top = along_row(r0)?;
    if fr == 0.0 {
        return Some(top);
    }
    let bottom = along_row(r0 + 1)?;
    Some(top + fr * (bottom - top))
}

/// Resample onto `target` by bilinear interpolation in map coordinates.
///
/// Target pixels whose centers fall outside the source footprint are flagged
/// invalid. Inside the footprint but beyond the outermost source centers the
/// edge value is replicated.
pub fn resample_bilinear(h: &HeightRaster, target: &GridMeta) -> Result<HeightRaster> {
    target.validate()?;
    let src = h.meta();
    if src == target {
        return Ok(h.clone());
    }
    let scale = target.spatial_resolution / src.spatial_resolution;
    let col_off = (target.origin_x - src.origin_x) / src.spatial_resolution;
    let row_off = (src.origin_y - target.origin_y) / src.spatial_resolution;
    let (sw, sh) = (src.width as f64, src.height as f64);

    let mut data = vec![0.0; target.len()];
    let mut valid = vec![false; target.len()];
    let mut inside = 0usize;
    for row in 0..target.height {
        let row_f = row_off + (row as f64 + 0.5) * scale - 0.5;
        for col in 0..target.width {
            let col_f = col_off + (col as f64 + 0.5) * scale - 0.5;
            if !(row_f >= -0.5 && row_f <= sh - 0.5 && col_f >= -0.5 && col_f <= sw - 0.5) {
                continue;
            }
            inside += 1;
            let rc = row_f.clamp(0.0, sh - 1.0);
            let cc = col_f.clamp(0.0, sw - 1.0);
            if let Some(v) = bilinear_at(h, rc, cc) {
                let i = target.index(row, col);
                data[i] = v;
                valid[i] = true;
            }
        }
    }
    if inside == 0 {
        return Err(Error::InvalidArgument("source and target grids do not overlap".into()));
    }
    Raster::from_vec(*target, data)?.with_validity(Some(valid))
}

/// Surface model as height map plus terrain, invalid where either is invalid.
pub fn compose_dsm(heightmap: &HeightRaster, terrain: &HeightRaster) -> Result<HeightRaster> {
    heightmap.same_meta(terrain, "compose_dsm")?;
    let meta = *heightmap.meta();
    let mut valid = vec![true; meta.len()];
    let data = heightmap
        .data()
        .iter()
        .zip(terrain.data())
        .enumerate()
        .map(|(i, (&hm, &t))| {
            if heightmap.is_valid(i) && terrain.is_valid(i) {
                hm + t
            } else {
                valid[i] = false;
                0.0
            }
        })
        .collect();
    Raster::from_vec(meta, data)?.with_validity(Some(valid))
}

/// Height above terrain, the inverse of [`compose_dsm`].
pub fn subtract_terrain(dsm: &HeightRaster, terrain: &HeightRaster) -> Result<HeightRaster> {
    dsm.same_meta(terrain, "subtract_terrain")?;
    let meta = *dsm.meta();
    let mut valid = vec![true; meta.len()];
    let data = dsm
        .data()
        .iter()
        .zip(terrain.data())
        .enumerate()
        .map(|(i, (&d, &t))| {
            if dsm.is_valid(i) && terrain.is_valid(i) {
                d - t
            } else {
                valid[i] = false;
                0.0
            }
        })
        .collect();
    Raster::from_vec(meta, data)?.with_validity(Some(valid))
}
