//! Annual solar flux over a surface model.

pub mod shade;
pub mod sun;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::raster::{FluxRaster, HeightRaster, NormalField, Raster};
use crate::terrain::{dot, sun_vector};

pub use shade::{is_shaded, ShadeTracer};
pub use sun::{declination_deg, sun_position, sun_positions, SunSample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrradianceModel {
    /// W/m^2 on a surface facing the sun.
    pub direct_normal_irradiance: f64,
    /// Isotropic sky term as a fraction of DNI.
    pub diffuse_fraction: f64,
}

impl Default for IrradianceModel {
    fn default() -> Self {
        Self { direct_normal_irradiance: 1000.0, diffuse_fraction: 0.0 }
    }
}

impl IrradianceModel {
    pub fn validate(&self) -> Result<()> {
        let dni = self.direct_normal_irradiance;
        if !(dni >= 0.0 && dni.is_finite()) {
            return Err(invalid_arg(format!("DNI must be >= 0, got {dni}")));
        }
        let f = self.diffuse_fraction;
        if !(0.0..1.0).contains(&f) {
            return Err(invalid_arg(format!("diffuse fraction must be in [0, 1), got {f}")));
        }
        Ok(())
    }
}

/// Annual flux in kWh/m^2 for every pixel with a valid DSM value and normal.
pub fn annual_flux(
    dsm: &HeightRaster,
    normals: &NormalField,
    suns: &[SunSample],
    model: &IrradianceModel,
) -> Result<FluxRaster> {
    annual_flux_within(dsm, normals, suns, model, None)
}

/// [`annual_flux`] restricted to `region`; pixels outside it are invalid.
pub fn annual_flux_within(
    dsm: &HeightRaster,
    normals: &NormalField,
    suns: &[SunSample],
    model: &IrradianceModel,
    region: Option<&[bool]>,
) -> Result<FluxRaster> {
    dsm.same_meta(normals, "normal field")?;
    model.validate()?;
    let meta = *dsm.meta();
    if region.is_some_and(|r| r.len() != meta.len()) {
        return Err(invalid_arg("flux region length does not match raster"));
    }
    let tracer = ShadeTracer::new(dsm);
    let dirs: Vec<[f64; 3]> = suns.iter().map(|s| sun_vector(s.elevation_deg, s.azimuth_deg)).collect();
    let dni = model.direct_normal_irradiance;
    let sky_hours: f64 = suns.iter().map(|s| s.weight_hours).sum();
    let rows: Vec<Vec<(f64, bool)>> = (0..meta.height)
        .into_par_iter()
        .map(|r| {
            (0..meta.width)
                .map(|c| {
                    let i = meta.index(r, c);
                    let wanted = region.is_none_or(|reg| reg[i]);
                    if !(wanted && dsm.is_valid(i) && normals.is_valid(i)) {
                        return (0.0, false);
                    }
                    let n = normals.data()[i];
                    let mut wh = 0.0;
                    for (sun, s) in suns.iter().zip(&dirs) {
                        let cos_inc = dot(n, *s);
                        if cos_inc > 0.0 && !tracer.is_shaded(r, c, sun) {
                            wh += sun.weight_hours * dni * cos_inc;
                        }
                    }
                    if model.diffuse_fraction > 0.0 {
                        wh += sky_hours * dni * model.diffuse_fraction * (1.0 + n[2]) / 2.0;
                    }
                    (wh / 1000.0, true)
                })
                .collect()
        })
        .collect();
    let (data, valid): (Vec<f64>, Vec<bool>) = rows.into_iter().flatten().unzip();
    Raster::from_vec(meta, data)?.with_validity(Some(valid))
}
