//! Compare a prediction prefix against a label prefix.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use satsolar_core::io::{read_height, read_json, read_labels};
use satsolar_core::masking::{combine_masks, EvalMask};
use satsolar_core::metrics::{mape, masked_mae, match_and_iou, segment_angle_errors, MetricsReport, Region};
use satsolar_core::raster::{GridMeta, HeightRaster, InstanceKind, InstanceMap, Raster};
use satsolar_core::segment::SegmentStats;
use satsolar_core::{Error, Result};

use crate::paths::{with_suffix, BUILDINGS, DSM, ENERGY, SEGMENTS, STATS};

/// Building energies as written by the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyFile {
    pub cap_w: f64,
    pub uncapped_kwh: BTreeMap<u32, f64>,
    pub capped_kwh: BTreeMap<u32, f64>,
}

/// Whatever files exist under a prefix.
#[derive(Clone, Debug, Default)]
pub struct PrefixData {
    pub dsm: Option<HeightRaster>,
    pub buildings: Option<InstanceMap>,
    pub segments: Option<InstanceMap>,
    pub stats: Option<Vec<SegmentStats>>,
    pub energy: Option<EnergyFile>,
}

impl PrefixData {
    fn meta(&self) -> Option<GridMeta> {
        self.dsm
            .as_ref()
            .map(|d| *d.meta())
            .or_else(|| self.segments.as_ref().map(|s| *s.meta()))
            .or_else(|| self.buildings.as_ref().map(|b| *b.meta()))
    }
}

fn optional<T>(path: &Path, load: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
    if path.is_file() {
        load(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Load the DSM, buildings, segments, stats and energy files under `prefix`.
pub fn load_prefix(prefix: &Path) -> Result<PrefixData> {
    let labels = |kind| move |p: &Path| read_labels(p).map(|ids| InstanceMap::new(kind, ids));
    Ok(PrefixData {
        dsm: optional(&with_suffix(prefix, DSM), |p| read_height(p))?,
        buildings: optional(&with_suffix(prefix, BUILDINGS), labels(InstanceKind::Buildings))?,
        segments: optional(&with_suffix(prefix, SEGMENTS), labels(InstanceKind::RoofSegments))?,
        stats: optional(&with_suffix(prefix, STATS), |p| read_json(p))?,
        energy: optional(&with_suffix(prefix, ENERGY), |p| read_json(p))?,
    })
}

/// Every metric whose inputs are present on both sides.
pub fn evaluate(pred: &PrefixData, label: &PrefixData, masks: &[EvalMask]) -> Result<MetricsReport> {
    let meta = label.meta().or_else(|| pred.meta()).ok_or_else(|| Error::Empty("no rasters to evaluate".into()))?;
    let mask = if masks.is_empty() { Raster::filled(meta, true) } else { combine_masks(masks)? };
    let mut report = MetricsReport::default();
    if let (Some(p), Some(l)) = (&pred.dsm, &label.dsm) {
        report.overall_mae_m = Some(masked_mae(p, l, &mask, Region::All)?);
        if let Some(b) = &label.buildings {
            report.building_mae_m = Some(masked_mae(p, l, &mask, Region::Buildings(b))?);
        }
    }
    if let (Some(p), Some(l)) = (&pred.segments, &label.segments) {
        let matching = match_and_iou(p, l, &mask)?;
        report.segment_iou_fraction = Some(matching.iou);
        if let (Some(ps), Some(ls)) = (&pred.stats, &label.stats) {
            if matching.pairs.iter().any(|m| m.pred_id.is_some()) {
                let angles = segment_angle_errors(ps, ls, &matching)?;
                report.pitch_error_deg = Some(angles.pitch_error_deg);
                report.azimuth_error_deg = angles.azimuth_error_deg;
            }
        }
        report.segment_matches = matching.pairs;
    }
    if let (Some(p), Some(l)) = (&pred.energy, &label.energy) {
        let full = mape(&p.uncapped_kwh, &l.uncapped_kwh)?;
        let capped = mape(&p.capped_kwh, &l.capped_kwh)?;
        report.mape_fraction = Some(full.mape);
        report.mape_at_5kw_fraction = Some(capped.mape);
        report.building_ape = full.per_building;
        report.building_ape_at_5kw = capped.per_building;
    }
    Ok(report)
}
