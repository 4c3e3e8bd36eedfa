//! Grid packing of photovoltaic panels on roof segments.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::raster::{ColorRaster, FluxRaster, GridMeta, InstanceMap};
use crate::segment::SegmentStats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSpec {
    /// Edge running down the fall line, meters.
    pub length_m: f64,
    /// Edge running along the row, meters.
    pub width_m: f64,
    pub rated_power_w: f64,
    pub efficiency: f64,
    pub performance_ratio: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        Self { length_m: 1.65, width_m: 0.99, rated_power_w: 400.0, efficiency: 0.20, performance_ratio: 0.85 }
    }
}

impl PanelSpec {
    pub fn area_m2(&self) -> f64 {
        self.length_m * self.width_m
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length_m", self.length_m),
            ("width_m", self.width_m),
            ("rated_power_w", self.rated_power_w),
            ("efficiency", self.efficiency),
            ("performance_ratio", self.performance_ratio),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid_arg(format!("panel {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelPlacement {
    /// Rank in the output list.
    pub index: usize,
    pub segment_id: u32,
    pub building_id: u32,
    /// Plan-view corners in map meters (x east, y north), in ring order.
    pub footprint: [[f64; 2]; 4],
    /// Segment azimuth; `None` on flat segments.
    pub orientation_deg: Option<f64>,
    pub annual_energy_kwh: f64,
}

struct Candidate {
    footprint: [[f64; 2]; 4],
    first_pixel: usize,
    energy: f64,
}

/// Lay a panel grid on every segment and rank all placements by energy.
pub fn place_panels(
    segments: &InstanceMap,
    stats: &[SegmentStats],
    flux: &FluxRaster,
    spec: &PanelSpec,
) -> Result<Vec<PanelPlacement>> {
    segments.meta().ensure_same(flux.meta(), "flux raster")?;
    spec.validate()?;
    let meta = *segments.meta();
    let mut pixels: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for i in 0..meta.len() {
        let id = segments.id(i);
        if id > 0 {
            pixels.entry(id).or_default().push(i);
        }
    }
    let mut per_segment: Vec<(u32, u32, Option<f64>, Vec<Candidate>)> = stats
        .par_iter()
        .filter_map(|s| {
            let px = pixels.get(&s.id)?;
            let chosen = pack_segment(segments, flux, &meta, s, px, spec);
            Some((s.id, s.building_id, s.azimuth_deg, chosen))
        })
        .collect();
    per_segment.sort_by_key(|(id, ..)| *id);
    let mut all: Vec<(u32, u32, Option<f64>, Candidate)> = per_segment
        .into_iter()
        .flat_map(|(sid, bid, az, cands)| cands.into_iter().map(move |c| (sid, bid, az, c)))
        .collect();
    all.sort_by(|a, b| {
        b.3.energy.total_cmp(&a.3.energy).then(a.3.first_pixel.cmp(&b.3.first_pixel)).then(a.0.cmp(&b.0))
    });
    Ok(all
        .into_iter()
        .enumerate()
        .map(|(index, (segment_id, building_id, orientation_deg, c))| PanelPlacement {
            index,
            segment_id,
            building_id,
            footprint: c.footprint,
            orientation_deg,
            annual_energy_kwh: c.energy,
        })
        .collect())
}

fn pack_segment(
    segments: &InstanceMap,
    flux: &FluxRaster,
    meta: &GridMeta,
    stats: &SegmentStats,
    pixels: &[usize],
    spec: &PanelSpec,
) -> Vec<Candidate> {
    let res = meta.spatial_resolution;
    // flat roofs are packed as if they fell to the south
    let az = stats.azimuth_deg.unwrap_or(180.0).to_radians();
    let fall = [az.sin(), az.cos()];
    let along = [az.cos(), -az.sin()];
    let step_fall = spec.length_m * stats.pitch_deg.to_radians().cos();
    let step_along = spec.width_m;
    let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &i in pixels {
        let (r, c) = meta.row_col(i);
        let (x, y) = meta.pixel_center(r, c);
        for (dx, dy) in [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)] {
            let p = [x + dx * res, y + dy * res];
            let (u, v) = (p[0] * along[0] + p[1] * along[1], p[0] * fall[0] + p[1] * fall[1]);
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
    }
    let cols = ((u1 - u0) / step_along + 1e-9).floor() as usize;
    let rows = ((v1 - v0) / step_fall + 1e-9).floor() as usize;
    let to_map = |u: f64, v: f64| [u * along[0] + v * fall[0], u * along[1] + v * fall[1]];
    let factor = spec.area_m2() * spec.efficiency * spec.performance_ratio;
    let mut cands = Vec::new();
    for j in 0..rows {
        for k in 0..cols {
            let (ua, va) = (u0 + k as f64 * step_along, v0 + j as f64 * step_fall);
            let (ub, vb) = (ua + step_along, va + step_fall);
            let footprint = [to_map(ua, va), to_map(ub, va), to_map(ub, vb), to_map(ua, vb)];
            let Some(covered) = footprint_pixels(meta, &footprint) else {
                continue;
            };
            let inside = covered.iter().all(|&i| segments.id(i) == stats.id && flux.is_valid(i));
            if !inside || covered.is_empty() {
                continue;
            }
            let mean = covered.iter().map(|&i| flux.data()[i]).sum::<f64>() / covered.len() as f64;
            cands.push(Candidate { footprint, first_pixel: covered[0], energy: (mean * factor).max(0.0) });
        }
    }
    cands.sort_by(|a, b| b.energy.total_cmp(&a.energy).then(a.first_pixel.cmp(&b.first_pixel)));
    let mut chosen: Vec<Candidate> = Vec::new();
    for c in cands {
        if chosen.iter().all(|p| !polygons_overlap(&p.footprint, &c.footprint)) {
            chosen.push(c);
        }
    }
    chosen
}

/// Row-major indices of pixels whose squares overlap the footprint with
/// positive area; `None` if the footprint leaves the grid.
pub fn footprint_pixels(meta: &GridMeta, footprint: &[[f64; 2]; 4]) -> Option<Vec<usize>> {
    let res = meta.spatial_resolution;
    let (mut rmin, mut rmax, mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in footprint {
        let (r, c) = meta.map_to_pixel(p[0], p[1]);
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    let eps = 1e-9;
    if rmin < -0.5 - eps
        || cmin < -0.5 - eps
        || rmax > meta.height as f64 - 0.5 + eps
        || cmax > meta.width as f64 - 0.5 + eps
    {
        return None;
    }
    let lo = |v: f64| (v + 0.5).floor().max(0.0) as usize;
    let (r0, r1) = (lo(rmin), lo(rmax).min(meta.height - 1));
    let (c0, c1) = (lo(cmin), lo(cmax).min(meta.width - 1));
    let mut out = Vec::new();
    for r in r0..=r1 {
        for c in c0..=c1 {
            let (x, y) = meta.pixel_center(r, c);
            let h = res / 2.0;
            let square = [[x - h, y - h], [x + h, y - h], [x + h, y + h], [x - h, y + h]];
            if polygons_overlap(&square, footprint) {
                out.push(meta.index(r, c));
            }
        }
    }
    Some(out)
}

/// Separating-axis test for convex quads; touching edges do not overlap.
pub fn polygons_overlap(a: &[[f64; 2]; 4], b: &[[f64; 2]; 4]) -> bool {
    let eps = 1e-9;
    for poly in [a, b] {
        for k in 0..4 {
            let (p, q) = (poly[k], poly[(k + 1) % 4]);
            let axis = [q[1] - p[1], p[0] - q[0]];
            let norm = axis[0].hypot(axis[1]);
            if norm == 0.0 {
                continue;
            }
            let project = |s: &[[f64; 2]; 4]| {
                s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let d = (v[0] * axis[0] + v[1] * axis[1]) / norm;
                    (lo.min(d), hi.max(d))
                })
            };
            let ((alo, ahi), (blo, bhi)) = (project(a), project(b));
            if ahi <= blo + eps || bhi <= alo + eps {
                return false;
            }
        }
    }
    true
}

/// Annual energy per building, summing placements in ranked order and
/// stopping after `ceil(cap / rated_power)` panels when a cap is given.
pub fn building_energy(
    placements: &[PanelPlacement],
    cap_watts: Option<f64>,
    rated_power_w: f64,
) -> BTreeMap<u32, f64> {
    let limit = cap_watts.map(|w| (w / rated_power_w).ceil().max(0.0) as usize);
    let mut ranked: Vec<&PanelPlacement> = placements.iter().collect();
    ranked.sort_by_key(|p| p.index);
    let mut count: BTreeMap<u32, usize> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for p in ranked {
        let n = count.entry(p.building_id).or_insert(0);
        if limit.is_some_and(|l| *n >= l) {
            continue;
        }
        *n += 1;
        *out.entry(p.building_id).or_insert(0.0) += p.annual_energy_kwh;
    }
    out
}

/// Tint the pixels under each footprint, strongest for the best panels.
pub fn render_overlay(rgb: &ColorRaster, placements: &[PanelPlacement]) -> ColorRaster {
    let meta = *rgb.meta();
    let mut out = rgb.clone();
    let best = placements.iter().map(|p| p.annual_energy_kwh).fold(0.0, f64::max);
    for p in placements {
        let Some(px) = footprint_pixels(&meta, &p.footprint) else {
            continue;
        };
        let t = if best > 0.0 { p.annual_energy_kwh / best } else { 0.0 };
        let tint = [255.0 * t, 200.0 * t, 255.0 * (1.0 - t)];
        for i in px {
            let v = &mut out.data_mut()[i];
            for k in 0..3 {
                v[k] = (0.4 * v[k] as f64 + 0.6 * tint[k]).round() as u8;
            }
        }
    }
    out
}
