//! Planar roof segmentation by graph cut within building footprints.
//!
//! Each building is an independent Potts MRF over its pixels. The data term
//! is the capped angle between the pixel normal and a candidate plane normal,
//! optimized by alpha-expansion with exact min-cut moves. Costs are scaled to
//! integer millidegrees so energies compare exactly.

pub mod components;
pub mod labels;
pub mod mrf;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::{HeightRaster, InstanceKind, InstanceMap, NormalField, Raster};
use crate::terrain::{normals_from_gradients, pitch_azimuth, sobel_gradients_by_instance};

pub use labels::{angle_between_deg, plane_normal, PlaneLabelSet};
pub use mrf::{BinaryEnergy, PottsMrf};

const COST_SCALE: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentParams {
    /// Potts penalty in degrees per cut 4-neighbor pair.
    pub lambda: f64,
    /// Data cost cap in degrees.
    pub data_cap_deg: f64,
    /// Segments below this area are merged into a neighbor.
    pub min_area_m2: f64,
    pub passes: usize,
    pub labels: PlaneLabelSet,
    /// Rounds of re-running the expansion with one fitted plane per segment.
    pub refit_rounds: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            lambda: 15.0,
            data_cap_deg: 60.0,
            min_area_m2: 2.0,
            passes: 2,
            labels: PlaneLabelSet::default(),
            refit_rounds: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub id: u32,
    pub building_id: u32,
    pub pixel_count: usize,
    pub area_m2: f64,
    pub pitch_deg: f64,
    /// `None` for flat segments.
    pub azimuth_deg: Option<f64>,
    pub mean_normal: [f64; 3],
}

/// MRF energies of one building: per stage (the discrete label set, then
/// each refit round), the energy before the first pass and after each pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub building_id: u32,
    pub stages: Vec<Vec<i64>>,
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub segments: InstanceMap,
    pub stats: Vec<SegmentStats>,
    pub traces: Vec<EnergyTrace>,
}

pub fn segment_roofs(
    dsm: &HeightRaster,
    buildings: &InstanceMap,
    params: &SegmentParams,
) -> Result<(InstanceMap, Vec<SegmentStats>)> {
    let s = segment_roofs_detailed(dsm, buildings, params)?;
    Ok((s.segments, s.stats))
}

/// Per-pixel normals where each building only sees its own pixels.
pub fn building_normals(dsm: &HeightRaster, buildings: &InstanceMap) -> Result<NormalField> {
    dsm.same_meta(&buildings.ids, "building map")?;
    let ids: Vec<u32> = (0..dsm.meta().len()).map(|i| buildings.id(i)).collect();
    Ok(normals_from_gradients(&sobel_gradients_by_instance(dsm, &ids)?))
}

fn pixels_by_building(buildings: &InstanceMap, normals: &NormalField) -> BTreeMap<u32, Vec<usize>> {
    let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for i in 0..buildings.meta().len() {
        let id = buildings.id(i);
        if id > 0 && normals.is_valid(i) {
            out.entry(id).or_default().push(i);
        }
    }
    out
}

pub fn segment_roofs_detailed(
    dsm: &HeightRaster,
    buildings: &InstanceMap,
    params: &SegmentParams,
) -> Result<Segmentation> {
    let normals = building_normals(dsm, buildings)?;
    let meta = *dsm.meta();
    let min_pixels = (params.min_area_m2 / meta.pixel_area() - 1e-9).ceil().max(0.0) as usize;
    let groups: Vec<(u32, Vec<usize>)> = pixels_by_building(buildings, &normals).into_iter().collect();

    let solved: Vec<(Vec<usize>, EnergyTrace)> = groups
        .par_iter()
        .map(|(id, pixels)| {
            let (comp, stages) = segment_building(dsm, &normals, pixels, params, min_pixels);
            (comp, EnergyTrace { building_id: *id, stages })
        })
        .collect();

    // canonical ids by first pixel in row-major order
    let mut key = vec![None; meta.len()];
    for ((b, pixels), (comp, _)) in groups.iter().zip(&solved) {
        for (&i, &c) in pixels.iter().zip(comp) {
            key[i] = Some((*b, c));
        }
    }
    let mut ids = vec![0u32; meta.len()];
    let mut assigned: BTreeMap<(u32, usize), u32> = BTreeMap::new();
    for i in 0..meta.len() {
        if let Some(k) = key[i] {
            let next = assigned.len() as u32 + 1;
            ids[i] = *assigned.entry(k).or_insert(next);
        }
    }
    let segments = InstanceMap::new(InstanceKind::RoofSegments, Raster::from_vec(meta, ids)?);
    let stats = segment_stats(&segment_normals(dsm, &segments)?, &segments, buildings)?;
    Ok(Segmentation { segments, stats, traces: solved.into_iter().map(|(_, t)| t).collect() })
}

/// Normals where each pixel only reads pixels of its own segment.
pub fn segment_normals(dsm: &HeightRaster, segments: &InstanceMap) -> Result<NormalField> {
    dsm.same_meta(&segments.ids, "segment map")?;
    let ids: Vec<u32> = (0..dsm.meta().len()).map(|i| segments.id(i)).collect();
    Ok(normals_from_gradients(&sobel_gradients_by_instance(dsm, &ids)?))
}

/// The Potts MRF of a single building's pixels against candidate plane normals.
pub fn building_mrf(
    normals: &NormalField,
    pixels: &[usize],
    label_normals: &[[f64; 3]],
    params: &SegmentParams,
) -> PottsMrf {
    let width = normals.width();
    let nl = label_normals.len();
    let mut data = Vec::with_capacity(pixels.len() * nl);
    for &i in pixels {
        let n = normals.data()[i];
        for &ln in label_normals {
            let a = angle_between_deg(n, ln).min(params.data_cap_deg);
            data.push((a * COST_SCALE).round() as i64);
        }
    }
    let mut edges = Vec::new();
    for (p, &i) in pixels.iter().enumerate() {
        let right = (i % width + 1 < width).then(|| i + 1);
        for j in [right, Some(i + width)].into_iter().flatten() {
            if let Ok(q) = pixels.binary_search(&j) {
                edges.push((p, q));
            }
        }
    }
    PottsMrf { labels: nl, data, edges, lambda: (params.lambda * COST_SCALE).round() as i64 }
}

fn segment_building(
    dsm: &HeightRaster,
    normals: &NormalField,
    pixels: &[usize],
    params: &SegmentParams,
    min_pixels: usize,
) -> (Vec<usize>, Vec<Vec<i64>>) {
    let width = normals.width();
    let mrf = building_mrf(normals, pixels, params.labels.normals(), params);
    let (mut labels, energies) = mrf.alpha_expansion(mrf.data_argmin(), params.passes);
    let mut stages = vec![energies];
    for _ in 0..params.refit_rounds {
        let comp = components::label_components(pixels, &labels, width);
        let fitted = fitted_planes(dsm, normals, pixels, &comp, min_pixels);
        if fitted.is_empty() {
            break;
        }
        let planes: Vec<[f64; 3]> = fitted.iter().map(|f| f.1).collect();
        let mrf = building_mrf(normals, pixels, &planes, params);
        // start from the segment each pixel was in when it has a plane
        let argmin = mrf.data_argmin();
        let init =
            comp.iter().zip(argmin).map(|(c, best)| fitted.iter().position(|f| f.0 == *c).unwrap_or(best)).collect();
        let (refit, energies) = mrf.alpha_expansion(init, params.passes);
        labels = refit;
        stages.push(energies);
    }
    let comp = components::label_components(pixels, &labels, width);
    (components::merge_small(pixels, &comp, width, min_pixels), stages)
}

/// (component, mean segment-restricted normal) for components of at least
/// `min_pixels`, or for all components when none is that large.
fn fitted_planes(
    dsm: &HeightRaster,
    normals: &NormalField,
    pixels: &[usize],
    comp: &[usize],
    min_pixels: usize,
) -> Vec<(usize, [f64; 3])> {
    let count = comp.iter().copied().max().map_or(0, |m| m + 1);
    let local = local_segment_normals(dsm, pixels, comp);
    let mut sums = vec![([0.0f64; 3], 0usize); count];
    for (p, &c) in comp.iter().enumerate() {
        let n = local.as_ref().map_or(normals.data()[pixels[p]], |l| l[p]);
        (0..3).for_each(|k| sums[c].0[k] += n[k]);
        sums[c].1 += 1;
    }
    let big = sums.iter().any(|s| s.1 >= min_pixels);
    sums.iter()
        .enumerate()
        .filter(|(_, s)| !big || s.1 >= min_pixels)
        .filter_map(|(c, (sum, _))| {
            let len = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
            (len > 0.0).then(|| (c, [sum[0] / len, sum[1] / len, sum[2] / len]))
        })
        .collect()
}

/// Segment-restricted normals for one building, computed on its bounding box.
fn local_segment_normals(dsm: &HeightRaster, pixels: &[usize], comp: &[usize]) -> Option<Vec<[f64; 3]>> {
    let meta = dsm.meta();
    let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
    for &i in pixels {
        let (r, c) = meta.row_col(i);
        (r0, c0, r1, c1) = (r0.min(r), c0.min(c), r1.max(r), c1.max(c));
    }
    let (r0, c0) = (r0.saturating_sub(1), c0.saturating_sub(1));
    let (r1, c1) = ((r1 + 1).min(meta.height - 1), (c1 + 1).min(meta.width - 1));
    let (w, h) = (c1 - c0 + 1, r1 - r0 + 1);
    let crop = dsm.crop(r0, c0, w, h).ok()?;
    let mut ids = vec![0u32; w * h];
    let local_index = |i: usize| {
        let (r, c) = meta.row_col(i);
        (r - r0) * w + (c - c0)
    };
    for (&i, &c) in pixels.iter().zip(comp) {
        ids[local_index(i)] = c as u32 + 1;
    }
    let g = sobel_gradients_by_instance(&crop, &ids).ok()?;
    let n = normals_from_gradients(&g);
    Some(pixels.iter().map(|&i| n.data()[local_index(i)]).collect())
}

/// Stats per segment from the mean of its pixel normals, sorted by id.
pub fn segment_stats(
    normals: &NormalField,
    segments: &InstanceMap,
    buildings: &InstanceMap,
) -> Result<Vec<SegmentStats>> {
    normals.same_meta(&segments.ids, "segment map")?;
    normals.same_meta(&buildings.ids, "building map")?;
    let meta = *segments.meta();
    // sum of normals, count, parent building (lowest id seen)
    let mut acc: BTreeMap<u32, ([f64; 3], usize, u32)> = BTreeMap::new();
    for i in 0..meta.len() {
        let id = segments.id(i);
        if id == 0 {
            continue;
        }
        let e = acc.entry(id).or_insert(([0.0; 3], 0, u32::MAX));
        if normals.is_valid(i) {
            let n = normals.data()[i];
            (0..3).for_each(|k| e.0[k] += n[k]);
        }
        e.1 += 1;
        let b = buildings.id(i);
        if b > 0 {
            e.2 = e.2.min(b);
        }
    }
    acc.into_iter()
        .map(|(id, (sum, count, building))| {
            let len = (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt();
            let mean_normal = if len > 0.0 { [sum[0] / len, sum[1] / len, sum[2] / len] } else { [0.0, 0.0, 1.0] };
            let o = pitch_azimuth(mean_normal)?;
            Ok(SegmentStats {
                id,
                building_id: if building == u32::MAX { 0 } else { building },
                pixel_count: count,
                area_m2: count as f64 * meta.pixel_area(),
                pitch_deg: o.pitch_deg,
                azimuth_deg: o.azimuth_deg,
                mean_normal,
            })
        })
        .collect()
}

/// Fraction of each building's pixels covered by a roof segment.
pub fn coverage_fraction(buildings: &InstanceMap, segments: &InstanceMap) -> Result<BTreeMap<u32, f64>> {
    buildings.ids.same_meta(&segments.ids, "segment map")?;
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for i in 0..buildings.meta().len() {
        let b = buildings.id(i);
        if b == 0 {
            continue;
        }
        let e = counts.entry(b).or_insert((0, 0));
        e.0 += 1;
        if segments.id(i) > 0 {
            e.1 += 1;
        }
    }
    Ok(counts.into_iter().map(|(b, (total, covered))| (b, covered as f64 / total as f64)).collect())
}
