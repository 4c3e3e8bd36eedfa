//! Heightfield ray marching toward the sun.

use crate::raster::HeightRaster;
use crate::resample::bilinear_at;

use super::SunSample;

pub const DEFAULT_STEP_FRACTION: f64 = 0.5;
pub const DEFAULT_MAX_DISTANCE_M: f64 = 100.0;
pub const DEFAULT_TOLERANCE_M: f64 = 1e-3;

const BLOCK: usize = 8;

/// Marches rays across a DSM at fixed sample distances `k * step`.
///
/// A coarse grid of block maxima lets the march skip samples that cannot
/// possibly rise above the ray; the set of samples that can shade is the
/// same as a plain march.
#[derive(Clone, Debug)]
pub struct ShadeTracer<'a> {
    dsm: &'a HeightRaster,
    step_m: f64,
    max_distance_m: f64,
    tolerance_m: f64,
    global_max: f64,
    blocks_w: usize,
    /// Max valid height over each block and a two-pixel ring around it,
    /// which covers every bilinear sample taken inside the block with room
    /// for round-off at the block edge.
    block_max: Vec<f64>,
}

impl<'a> ShadeTracer<'a> {
    pub fn new(dsm: &'a HeightRaster) -> Self {
        let res = dsm.meta().spatial_resolution;
        Self::with_params(dsm, DEFAULT_STEP_FRACTION * res, DEFAULT_MAX_DISTANCE_M, DEFAULT_TOLERANCE_M)
    }

    pub fn with_params(dsm: &'a HeightRaster, step_m: f64, max_distance_m: f64, tolerance_m: f64) -> Self {
        let (w, h) = (dsm.width(), dsm.height());
        let (bw, bh) = (w.div_ceil(BLOCK), h.div_ceil(BLOCK));
        let mut block_max = vec![f64::NEG_INFINITY; bw * bh];
        for br in 0..bh {
            for bc in 0..bw {
                let mut m = f64::NEG_INFINITY;
                for r in (br * BLOCK).saturating_sub(2)..((br + 1) * BLOCK + 2).min(h) {
                    for c in (bc * BLOCK).saturating_sub(2)..((bc + 1) * BLOCK + 2).min(w) {
                        let i = r * w + c;
                        if dsm.is_valid(i) {
                            m = m.max(dsm.data()[i]);
                        }
                    }
                }
                block_max[br * bw + bc] = m;
            }
        }
        let global_max = block_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { dsm, step_m, max_distance_m, tolerance_m, global_max, blocks_w: bw, block_max }
    }

    /// Whether any DSM sample along the ray from pixel (row, col) toward the
    /// sun rises above the ray by more than the tolerance.
    pub fn is_shaded(&self, row: usize, col: usize, sun: &SunSample) -> bool {
        let idx = row * self.dsm.width() + col;
        let z0 = self.dsm.data()[idx];
        let res = self.dsm.meta().spatial_resolution;
        let (sa, ca) = sun.azimuth_deg.to_radians().sin_cos();
        let rise = sun.elevation_deg.to_radians().tan();
        // pixel units per meter of travel
        let (dr, dc) = (-ca / res, sa / res);
        let (hmax, wmax) = ((self.dsm.height() - 1) as f64, (self.dsm.width() - 1) as f64);
        let (r0, c0) = (row as f64, col as f64);
        let last = (self.max_distance_m / self.step_m + 1e-9).floor() as usize;
        let mut k = 1;
        while k <= last {
            let d = k as f64 * self.step_m;
            let ray = z0 + d * rise;
            if ray + self.tolerance_m >= self.global_max {
                return false;
            }
            let (rf, cf) = (r0 + d * dr, c0 + d * dc);
            if !(rf >= 0.0 && rf <= hmax && cf >= 0.0 && cf <= wmax) {
                return false;
            }
            let (br, bc) = (rf as usize / BLOCK, cf as usize / BLOCK);
            if self.block_max[br * self.blocks_w + bc] <= ray + self.tolerance_m {
                // nothing in this block can reach the ray, which only climbs
                let exit = exit_distance(rf, cf, dr, dc, br, bc);
                k = (((d + exit) / self.step_m).floor() as usize).max(k + 1);
                continue;
            }
            if let Some(z) = bilinear_at(self.dsm, rf, cf) {
                if z > ray + self.tolerance_m {
                    return true;
                }
            }
            k += 1;
        }
        false
    }
}

/// Distance (meters) from (rf, cf) along (dr, dc) to the edge of block (br, bc).
fn exit_distance(rf: f64, cf: f64, dr: f64, dc: f64, br: usize, bc: usize) -> f64 {
    let axis = |p: f64, v: f64, b: usize| {
        let lo = (b * BLOCK) as f64;
        let hi = lo + BLOCK as f64;
        if v > 0.0 {
            (hi - p) / v
        } else if v < 0.0 {
            (lo - p) / v
        } else {
            f64::INFINITY
        }
    };
    axis(rf, dr, br).min(axis(cf, dc, bc)).max(0.0)
}

/// One-off shading query with the default march parameters.
pub fn is_shaded(dsm: &HeightRaster, row: usize, col: usize, sun: &SunSample) -> bool {
    ShadeTracer::new(dsm).is_shaded(row, col, sun)
}
