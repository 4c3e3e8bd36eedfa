//! Evaluation metrics: height error, segment matching and IoU, roof angle
//! errors and energy MAPE.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::masking::EvalMask;
use crate::raster::{HeightRaster, InstanceMap};
use crate::segment::SegmentStats;

/// Pixels a height metric is evaluated over.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    All,
    Buildings(&'a InstanceMap),
}

/// Mean absolute error over included, valid pixels of both rasters.
pub fn masked_mae(pred: &HeightRaster, label: &HeightRaster, mask: &EvalMask, region: Region) -> Result<f64> {
    pred.same_meta(label, "label raster")?;
    pred.same_meta(mask, "evaluation mask")?;
    if let Region::Buildings(b) = region {
        pred.same_meta(&b.ids, "building map")?;
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..pred.meta().len() {
        let in_region = match region {
            Region::All => true,
            Region::Buildings(b) => b.id(i) > 0,
        };
        if in_region && mask.data()[i] && pred.is_valid(i) && label.is_valid(i) {
            sum += (pred.data()[i] - label.data()[i]).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("no pixels left to evaluate".into()));
    }
    Ok(sum / count as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub label_id: u32,
    /// `None` when no predicted segment was left to claim.
    pub pred_id: Option<u32>,
    pub label_area_px: usize,
    pub intersection_px: usize,
    pub union_px: usize,
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
    /// Label-area weighted IoU, unmatched labels counting as 0.
    pub iou: f64,
}

/// Greedy matching: label segments by descending included area each claim the
/// unmatched prediction with the largest overlap (ties to the lower id).
pub fn match_and_iou(pred: &InstanceMap, label: &InstanceMap, mask: &EvalMask) -> Result<Matching> {
    pred.ids.same_meta(&label.ids, "label segments")?;
    pred.ids.same_meta(mask, "evaluation mask")?;
    let mut label_area: BTreeMap<u32, usize> = BTreeMap::new();
    let mut pred_area: BTreeMap<u32, usize> = BTreeMap::new();
    let mut overlap: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for i in 0..pred.meta().len() {
        if !mask.data()[i] {
            continue;
        }
        let (p, l) = (pred.id(i), label.id(i));
        if p > 0 {
            *pred_area.entry(p).or_insert(0) += 1;
        }
        if l > 0 {
            *label_area.entry(l).or_insert(0) += 1;
            if p > 0 {
                *overlap.entry(l).or_default().entry(p).or_insert(0) += 1;
            }
        }
    }
    if label_area.is_empty() {
        return Err(Error::Empty("no label segments inside the evaluation mask".into()));
    }
    let mut order: Vec<(u32, usize)> = label_area.iter().map(|(&l, &a)| (l, a)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut taken: BTreeSet<u32> = BTreeSet::new();
    let mut pairs = Vec::with_capacity(order.len());
    let (mut weighted, mut total) = (0.0, 0.0);
    for (l, area) in order {
        let best = overlap.get(&l).and_then(|cands| {
            cands
                .iter()
                .filter(|(p, _)| !taken.contains(p))
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&p, &n)| (p, n))
        });
        let pair = match best {
            Some((p, inter)) => {
                taken.insert(p);
                let union = area + pred_area[&p] - inter;
                MatchedPair {
                    label_id: l,
                    pred_id: Some(p),
                    label_area_px: area,
                    intersection_px: inter,
                    union_px: union,
                    iou: inter as f64 / union as f64,
                }
            }
            None => MatchedPair {
                label_id: l,
                pred_id: None,
                label_area_px: area,
                intersection_px: 0,
                union_px: area,
                iou: 0.0,
            },
        };
        weighted += pair.iou * area as f64;
        total += area as f64;
        pairs.push(pair);
    }
    Ok(Matching { pairs, iou: weighted / total })
}

/// Circular distance between two bearings, in `[0, 180]`.
pub fn azimuth_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleErrors {
    pub pitch_error_deg: f64,
    /// `None` when every matched pair has a flat side.
    pub azimuth_error_deg: Option<f64>,
    pub pairs: usize,
}

/// Label-area weighted pitch and azimuth errors over matched pairs.
pub fn segment_angle_errors(
    pred_stats: &[SegmentStats],
    label_stats: &[SegmentStats],
    matching: &Matching,
) -> Result<AngleErrors> {
    let pred: BTreeMap<u32, &SegmentStats> = pred_stats.iter().map(|s| (s.id, s)).collect();
    let label: BTreeMap<u32, &SegmentStats> = label_stats.iter().map(|s| (s.id, s)).collect();
    let (mut pitch_sum, mut pitch_w) = (0.0, 0.0);
    let (mut az_sum, mut az_w) = (0.0, 0.0);
    let mut pairs = 0;
    for m in &matching.pairs {
        let Some(pid) = m.pred_id else { continue };
        let (Some(p), Some(l)) = (pred.get(&pid), label.get(&m.label_id)) else {
            return Err(invalid_arg(format!("matched pair ({pid}, {}) has no stats", m.label_id)));
        };
        let w = l.area_m2;
        pitch_sum += w * (p.pitch_deg - l.pitch_deg).abs();
        pitch_w += w;
        if let (Some(pa), Some(la)) = (p.azimuth_deg, l.azimuth_deg) {
            az_sum += w * azimuth_distance_deg(pa, la);
            az_w += w;
        }
        pairs += 1;
    }
    if pairs == 0 {
        return Err(Error::Empty("matching has no matched pairs".into()));
    }
    Ok(AngleErrors {
        pitch_error_deg: if pitch_w > 0.0 { pitch_sum / pitch_w } else { 0.0 },
        azimuth_error_deg: (az_w > 0.0).then(|| az_sum / az_w),
        pairs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapeReport {
    pub mape: f64,
    pub compared: usize,
    /// Buildings present only in the prediction.
    pub skipped_pred_only: usize,
    /// Buildings present only in the labels.
    pub skipped_label_only: usize,
    pub per_building: BTreeMap<u32, f64>,
}

/// Mean absolute percentage error over buildings present in both maps.
pub fn mape(pred: &BTreeMap<u32, f64>, label: &BTreeMap<u32, f64>) -> Result<MapeReport> {
    let mut per_building = BTreeMap::new();
    for (id, &l) in label {
        let Some(&p) = pred.get(id) else { continue };
        if !(l > 0.0 && l.is_finite()) {
            return Err(invalid_arg(format!("label energy of building {id} must be > 0, got {l}")));
        }
        per_building.insert(*id, (p - l).abs() / l);
    }
    if per_building.is_empty() {
        return Err(Error::Empty("no buildings in common".into()));
    }
    let compared = per_building.len();
    Ok(MapeReport {
        mape: per_building.values().sum::<f64>() / compared as f64,
        compared,
        skipped_pred_only: pred.len() - compared,
        skipped_label_only: label.len() - compared,
        per_building,
    })
}

/// Everything `evaluate` reports. Fields are `None` when their inputs were absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall_mae_m: Option<f64>,
    pub building_mae_m: Option<f64>,
    pub pitch_error_deg: Option<f64>,
    pub azimuth_error_deg: Option<f64>,
    pub segment_iou_fraction: Option<f64>,
    pub mape_fraction: Option<f64>,
    pub mape_at_5kw_fraction: Option<f64>,
    pub segment_matches: Vec<MatchedPair>,
    pub building_ape: BTreeMap<u32, f64>,
    pub building_ape_at_5kw: BTreeMap<u32, f64>,
}
