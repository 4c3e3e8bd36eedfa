//! Sun positions for a clear-sky year.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::terrain::bearing_deg;

pub const MAX_LATITUDE_DEG: f64 = 66.0;

const DAYS_IN_MONTH: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SunSample {
    pub elevation_deg: f64,
    /// Compass bearing toward the sun.
    pub azimuth_deg: f64,
    /// Hours of the year this sample stands for.
    pub weight_hours: f64,
}

/// Solar declination for day of year `n` (1 = January 1).
pub fn declination_deg(n: f64) -> f64 {
    23.45 * (360.0 * (284.0 + n) / 365.0).to_radians().sin()
}

/// (elevation, azimuth) in degrees for a latitude, declination and hour angle.
pub fn sun_position(latitude_deg: f64, declination_deg: f64, hour_angle_deg: f64) -> (f64, f64) {
    let (sp, cp) = latitude_deg.to_radians().sin_cos();
    let (sd, cd) = declination_deg.to_radians().sin_cos();
    let (sh, ch) = hour_angle_deg.to_radians().sin_cos();
    let elevation = (sp * sd + cp * cd * ch).clamp(-1.0, 1.0).asin().to_degrees();
    // east and north components of the sun direction
    let east = -sh * cd;
    let north = sd * cp - cd * sp * ch;
    (elevation, bearing_deg(east, north))
}

/// Day of year of the 15th of each month (non-leap year).
pub fn sample_days() -> [u32; 12] {
    let mut out = [0; 12];
    let mut start = 0;
    for (m, days) in DAYS_IN_MONTH.iter().enumerate() {
        out[m] = start + 15;
        start += days;
    }
    out
}

/// Sun samples on the 15th of each month at `samples_per_day` evenly spaced
/// solar times, each standing for the middle of its interval. Only samples
/// above the horizon are returned.
pub fn sun_positions(latitude_deg: f64, samples_per_day: usize) -> Result<Vec<SunSample>> {
    if !(latitude_deg.abs() <= MAX_LATITUDE_DEG) {
        return Err(invalid_arg(format!("latitude must be within +-{MAX_LATITUDE_DEG} degrees, got {latitude_deg}")));
    }
    if samples_per_day == 0 {
        return Err(invalid_arg("samples_per_day must be positive"));
    }
    let step_h = 24.0 / samples_per_day as f64;
    let mut out = Vec::new();
    for (m, n) in sample_days().into_iter().enumerate() {
        let decl = declination_deg(n as f64);
        let weight = DAYS_IN_MONTH[m] as f64 * step_h;
        for k in 0..samples_per_day {
            let t = (k as f64 + 0.5) * step_h;
            let (elevation_deg, azimuth_deg) = sun_position(latitude_deg, decl, 15.0 * (t - 12.0));
            if elevation_deg > 0.0 {
                out.push(SunSample { elevation_deg, azimuth_deg, weight_hours: weight });
            }
        }
    }
    Ok(out)
}
