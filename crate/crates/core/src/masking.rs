//! Pixel masks that exclude unreliable labels from losses and metrics.

use crate::error::{Error, Result};
use crate::raster::{InstanceMap, MaskRaster, Raster};
use crate::segment::coverage_fraction;

/// `true` where a pixel takes part in a metric.
pub type EvalMask = MaskRaster;

/// Excludes pixels whose building occupancy differs between two maps.
pub fn temporal_mismatch_mask(a: &InstanceMap, b: &InstanceMap) -> Result<EvalMask> {
    a.ids.same_meta(&b.ids, "second building map")?;
    let data = (0..a.meta().len()).map(|i| (a.id(i) > 0) == (b.id(i) > 0)).collect();
    Raster::from_vec(*a.meta(), data)
}

/// Excludes every pixel of buildings whose segment coverage is below `threshold`.
pub fn coverage_mask(buildings: &InstanceMap, segments: &InstanceMap, threshold: f64) -> Result<EvalMask> {
    let coverage = coverage_fraction(buildings, segments)?;
    let data = (0..buildings.meta().len())
        .map(|i| match buildings.id(i) {
            0 => true,
            b => coverage[&b] >= threshold,
        })
        .collect();
    Raster::from_vec(*buildings.meta(), data)
}

/// Pixelwise AND.
pub fn combine_masks(masks: &[EvalMask]) -> Result<EvalMask> {
    let (first, rest) = masks.split_first().ok_or_else(|| Error::Empty("no masks to combine".into()))?;
    let mut out = first.clone();
    for m in rest {
        out.same_meta(m, "mask")?;
        for (o, &v) in out.data_mut().iter_mut().zip(m.data()) {
            *o &= v;
        }
    }
    Ok(out)
}
