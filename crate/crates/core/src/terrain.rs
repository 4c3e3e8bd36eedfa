//! Gradients, surface normals, roof orientation and hillshade rendering.

use crate::error::{invalid_arg, Error, Result};
use crate::raster::{GrayRaster, HeightRaster, NormalField, Raster};

/// Below this pitch the fall-line bearing is reported as undefined.
pub const FLAT_PITCH_DEG: f64 = 0.5;

const UNIT_TOLERANCE: f64 = 1e-6;

/// Sobel gradients in meters per meter.
///
/// `gx` is positive when the surface rises eastward, `gy` when it rises
/// northward (toward row 0).
#[derive(Clone, Debug)]
pub struct Gradients {
    pub gx: HeightRaster,
    pub gy: HeightRaster,
}

/// Orientation of a surface element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation {
    pub pitch_deg: f64,
    /// Compass bearing of the downslope direction, `None` on near-flat surfaces.
    pub azimuth_deg: Option<f64>,
}

fn ensure_sobel_size(h: &HeightRaster) -> Result<()> {
    if h.width() < 3 || h.height() < 3 {
        return Err(Error::TooSmall(format!("sobel needs at least 3x3 pixels, got {}x{}", h.width(), h.height())));
    }
    Ok(())
}

/// 3x3 Sobel response at (row, col) given a sampler for neighbor offsets.
#[inline]
fn sobel_at(sample: impl Fn(isize, isize) -> f64, res: f64) -> (f64, f64) {
    let z = |dr, dc| sample(dr, dc);
    let east = z(-1, 1) + 2.0 * z(0, 1) + z(1, 1);
    let west = z(-1, -1) + 2.0 * z(0, -1) + z(1, -1);
    let north = z(-1, -1) + 2.0 * z(-1, 0) + z(-1, 1);
    let south = z(1, -1) + 2.0 * z(1, 0) + z(1, 1);
    let norm = 8.0 * res;
    ((east - west) / norm, (north - south) / norm)
}

/// Sobel gradients with edge replication at the raster border.
///
/// A gradient is invalid when any of the nine samples it reads is invalid.
pub fn sobel_gradients(h: &HeightRaster) -> Result<Gradients> {
    ensure_sobel_size(h)?;
    let meta = *h.meta();
    let (w, ht) = (meta.width as isize, meta.height as isize);
    let res = meta.spatial_resolution;
    let data = h.data();
    let mut gx = vec![0.0; meta.len()];
    let mut gy = vec![0.0; meta.len()];
    let mut valid = vec![true; meta.len()];
    for row in 0..ht {
        for col in 0..w {
            let idx = (row * w + col) as usize;
            let clamp = |dr: isize, dc: isize| {
                let r = (row + dr).clamp(0, ht - 1);
                let c = (col + dc).clamp(0, w - 1);
                (r * w + c) as usize
            };
            if !h.all_valid() {
                let ok = (-1..=1).all(|dr| (-1..=1).all(|dc| h.is_valid(clamp(dr, dc))));
                if !ok {
                    valid[idx] = false;
                    continue;
                }
            }
            let (x, y) = sobel_at(|dr, dc| data[clamp(dr, dc)], res);
            gx[idx] = x;
            gy[idx] = y;
        }
    }
    let valid = Some(valid);
    Ok(Gradients {
        gx: Raster::from_vec(meta, gx)?.with_validity(valid.clone())?,
        gy: Raster::from_vec(meta, gy)?.with_validity(valid)?,
    })
}

/// Sobel gradients restricted to a pixel region.
///
/// Samples that fall outside `region` (or are invalid) are replaced by the
/// reflection of the opposite sample through the center pixel, or for
/// diagonal samples by the sum of the two axis neighbors minus the center.
/// Both keep the response exact for planar patches up to the region border.
/// The center height is the last resort.
/// Pixels outside the region are flagged invalid.
pub fn sobel_gradients_within(h: &HeightRaster, region: &[bool]) -> Result<Gradients> {
    if region.len() != h.meta().len() {
        return Err(invalid_arg("region mask length does not match raster"));
    }
    sobel_restricted(h, |_, j| region[j])
}

/// Sobel gradients where each pixel only reads pixels carrying the same
/// non-zero id, with the same border handling as [`sobel_gradients_within`].
pub fn sobel_gradients_by_instance(h: &HeightRaster, ids: &[u32]) -> Result<Gradients> {
    if ids.len() != h.meta().len() {
        return Err(invalid_arg("instance id length does not match raster"));
    }
    sobel_restricted(h, |i, j| ids[j] != 0 && ids[j] == ids[i])
}

fn sobel_restricted(h: &HeightRaster, admits: impl Fn(usize, usize) -> bool) -> Result<Gradients> {
    ensure_sobel_size(h)?;
    let meta = *h.meta();
    let (w, ht) = (meta.width as isize, meta.height as isize);
    let res = meta.spatial_resolution;
    let data = h.data();
    let mut gx = vec![0.0; meta.len()];
    let mut gy = vec![0.0; meta.len()];
    let mut valid = vec![false; meta.len()];
    for row in 0..ht {
        for col in 0..w {
            let idx = (row * w + col) as usize;
            let usable = |r: isize, c: isize| -> Option<f64> {
                if r < 0 || c < 0 || r >= ht || c >= w {
                    return None;
                }
                let i = (r * w + c) as usize;
                (admits(idx, i) && h.is_valid(i)).then_some(data[i])
            };
            let Some(center) = usable(row, col) else {
                continue;
            };
            let reflected = |dr: isize, dc: isize| {
                usable(row + dr, col + dc).or_else(|| usable(row - dr, col - dc).map(|opp| 2.0 * center - opp))
            };
            let sample = |dr: isize, dc: isize| {
                reflected(dr, dc).unwrap_or_else(|| {
                    if dr != 0 && dc != 0 {
                        // planar identity z(dr,dc) = z(dr,0) + z(0,dc) - z(0,0)
                        reflected(dr, 0).unwrap_or(center) + reflected(0, dc).unwrap_or(center) - center
                    } else {
                        center
                    }
                })
            };
            let (x, y) = sobel_at(sample, res);
            gx[idx] = x;
            gy[idx] = y;
            valid[idx] = true;
        }
    }
    let valid = Some(valid);
    Ok(Gradients {
        gx: Raster::from_vec(meta, gx)?.with_validity(valid.clone())?,
        gy: Raster::from_vec(meta, gy)?.with_validity(valid)?,
    })
}

#[inline]
pub fn normal_from_gradient(gx: f64, gy: f64) -> [f64; 3] {
    let len = (gx * gx + gy * gy + 1.0).sqrt();
    [-gx / len, -gy / len, 1.0 / len]
}

pub fn normals_from_gradients(g: &Gradients) -> NormalField {
    let meta = *g.gx.meta();
    let data = g.gx.data().iter().zip(g.gy.data()).map(|(&x, &y)| normal_from_gradient(x, y)).collect();
    Raster::from_vec(meta, data)
        .and_then(|r| r.with_validity(g.gx.validity().map(<[bool]>::to_vec)))
        .expect("gradient shape")
}

/// Unit upward normals `normalize(-gx, -gy, 1)` from Sobel gradients.
pub fn surface_normals(h: &HeightRaster) -> Result<NormalField> {
    Ok(normals_from_gradients(&sobel_gradients(h)?))
}

/// Pitch and downslope bearing of a unit normal.
pub fn pitch_azimuth(n: [f64; 3]) -> Result<Orientation> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(invalid_arg(format!("normal is not unit length (|n| = {norm})")));
    }
    let pitch_deg = n[2].clamp(-1.0, 1.0).acos().to_degrees();
    let azimuth_deg = (pitch_deg >= FLAT_PITCH_DEG).then(|| bearing_deg(n[0], n[1]));
    Ok(Orientation { pitch_deg, azimuth_deg })
}

/// Compass bearing (clockwise from north, `[0, 360)`) of an (east, north) vector.
#[inline]
pub fn bearing_deg(east: f64, north: f64) -> f64 {
    let b = east.atan2(north).to_degrees().rem_euclid(360.0);
    if b >= 360.0 {
        0.0
    } else {
        b
    }
}

/// Unit vector toward the sun in (east, north, up).
#[inline]
pub fn sun_vector(elevation_deg: f64, azimuth_deg: f64) -> [f64; 3] {
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    [sa * ce, ca * ce, se]
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub const DEFAULT_HILLSHADE_ELEVATION: f64 = 45.0;
pub const DEFAULT_HILLSHADE_AZIMUTH: f64 = 315.0;

/// Lambertian hillshade, `255 * max(0, n . s)` rounded to 8 bits.
pub fn hillshade(h: &HeightRaster, sun_elevation_deg: f64, sun_azimuth_deg: f64) -> Result<GrayRaster> {
    if !(sun_elevation_deg > 0.0 && sun_elevation_deg <= 90.0) {
        return Err(invalid_arg(format!("sun elevation must be in (0, 90], got {sun_elevation_deg}")));
    }
    let normals = surface_normals(h)?;
    let s = sun_vector(sun_elevation_deg, sun_azimuth_deg);
    let data = normals
        .data()
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if normals.is_valid(i) {
                // the epsilon absorbs trig round-off such as sin(30 deg) < 0.5
                (255.0 * dot(n, s).max(0.0) + 1e-9).round().min(255.0) as u8
            } else {
                0
            }
        })
        .collect();
    Raster::from_vec(*h.meta(), data)?.with_validity(normals.validity().map(<[bool]>::to_vec))
}
