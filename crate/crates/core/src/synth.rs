//! Procedural scenes with analytically known surfaces.
//!
//! Buildings are rotated rectangles with flat, gable or hip roofs. Every
//! roof face is a plane, and the roof surface is the lower envelope of its
//! face planes sampled at pixel centers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::raster::{ColorRaster, GridMeta, HeightRaster, InstanceKind, InstanceMap, Raster, Rgb};
use crate::segment::plane_normal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Terrain {
    Constant {
        elevation: f64,
    },
    /// `elevation + slope_x * x + slope_y * y` in map coordinates.
    Ramp {
        elevation: f64,
        slope_x: f64,
        slope_y: f64,
    },
}

impl Default for Terrain {
    fn default() -> Self {
        Terrain::Constant { elevation: 0.0 }
    }
}

impl Terrain {
    pub fn at(&self, x: f64, y: f64) -> f64 {
        match *self {
            Terrain::Constant { elevation } => elevation,
            Terrain::Ramp { elevation, slope_x, slope_y } => elevation + slope_x * x + slope_y * y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoofType {
    Flat,
    Gable,
    Hip,
}

/// A rectangular building. `orientation_deg` is the compass bearing of the
/// length axis, which is also the ridge direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub length: f64,
    pub width: f64,
    #[serde(default)]
    pub orientation_deg: f64,
    pub eave_height: f64,
    /// Defaults to the eave height (flat).
    #[serde(default)]
    pub ridge_height: Option<f64>,
    pub roof: RoofType,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub meta: GridMeta,
    #[serde(default)]
    pub terrain: Terrain,
    pub buildings: Vec<BuildingSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceTruth {
    pub segment_id: u32,
    pub building_id: u32,
    pub face: u8,
    pub pitch_deg: f64,
    /// `None` for flat roofs.
    pub azimuth_deg: Option<f64>,
    pub normal: [f64; 3],
    pub pixel_count: usize,
}

#[derive(Clone, Debug)]
pub struct SceneTruth {
    pub dsm: HeightRaster,
    pub dtm: HeightRaster,
    pub heightmap: HeightRaster,
    pub buildings: InstanceMap,
    pub segments: InstanceMap,
    pub faces: Vec<FaceTruth>,
    pub rgb: ColorRaster,
}

impl BuildingSpec {
    pub fn ridge(&self) -> f64 {
        self.ridge_height.unwrap_or(self.eave_height)
    }

    fn axes(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.orientation_deg.to_radians().sin_cos();
        // u along the ridge bearing, v a quarter turn clockwise from it
        ([s, c], [c, -s])
    }

    /// Coordinates of a map point along the ridge (u) and across it (v).
    pub fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = self.axes();
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        (dx * u[0] + dy * u[1], dx * v[0] + dy * v[1])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (du, dv) = self.local(x, y);
        du.abs() <= self.length / 2.0 && dv.abs() <= self.width / 2.0
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let (u, v) = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)].map(|(a, b)| {
            (self.center_x + a * hl * u[0] + b * hw * v[0], self.center_y + a * hl * u[1] + b * hw * v[1])
        })
    }

    pub fn face_count(&self) -> usize {
        match self.roof {
            RoofType::Flat => 1,
            RoofType::Gable => 2,
            RoofType::Hip => 4,
        }
    }

    /// Roof slope in meters per meter.
    pub fn slope(&self) -> f64 {
        match self.roof {
            RoofType::Flat => 0.0,
            _ => (self.ridge() - self.eave_height) / (self.width / 2.0),
        }
    }

    pub fn pitch_deg(&self) -> f64 {
        self.slope().atan().to_degrees()
    }

    /// Downslope bearing of a face: 0 and 1 fall toward +v and -v, 2 and 3
    /// toward +u and -u.
    pub fn face_azimuth(&self, face: usize) -> Option<f64> {
        if self.roof == RoofType::Flat {
            return None;
        }
        let turn = [90.0, 270.0, 0.0, 180.0][face];
        Some((self.orientation_deg + turn).rem_euclid(360.0))
    }

    /// Height above the eave line of each face plane at local (du, dv).
    fn face_heights(&self, du: f64, dv: f64) -> [f64; 4] {
        let k = self.slope();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [k * (hw - dv), k * (hw + dv), k * (hl - du), k * (hl + du)]
    }

    /// Roof height above the building base and the face it belongs to.
    pub fn roof_at(&self, x: f64, y: f64) -> (f64, usize) {
        let (du, dv) = self.local(x, y);
        let planes = self.face_heights(du, dv);
        let (face, rise) = planes[..self.face_count()]
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one face");
        let rise = if self.roof == RoofType::Flat { 0.0 } else { rise };
        (self.eave_height + rise, face)
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |msg: String| Err(invalid_arg(format!("building {index}: {msg}")));
        let vals = [
            self.center_x,
            self.center_y,
            self.length,
            self.width,
            self.orientation_deg,
            self.eave_height,
            self.ridge(),
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value".into());
        }
        if self.length <= 0.0 || self.width <= 0.0 {
            return bad("length and width must be positive".into());
        }
        if self.eave_height <= 0.0 {
            return bad("eave height must be positive".into());
        }
        if self.ridge() < self.eave_height {
            return bad("ridge height below eave height".into());
        }
        if self.roof == RoofType::Hip && self.length < self.width {
            return bad("hip roofs need length >= width".into());
        }
        Ok(())
    }
}

fn project(corners: &[(f64, f64); 4], axis: (f64, f64)) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.0 * axis.0 + p.1 * axis.1;
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis test for two rectangles; touching edges do not overlap.
fn rectangles_overlap(a: &BuildingSpec, b: &BuildingSpec) -> bool {
    let (ca, cb) = (a.corners(), b.corners());
    let mut axes = Vec::with_capacity(4);
    for r in [a, b] {
        let (u, v) = r.axes();
        axes.push((u[0], u[1]));
        axes.push((v[0], v[1]));
    }
    axes.into_iter().all(|ax| {
        let (a0, a1) = project(&ca, ax);
        let (b0, b1) = project(&cb, ax);
        a0 < b1 - 1e-9 && b0 < a1 - 1e-9
    })
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        let (x0, y0, x1, y1) = self.meta.extent();
        match self.terrain {
            Terrain::Constant { elevation } if elevation.is_finite() => {}
            Terrain::Ramp { elevation, slope_x, slope_y }
                if [elevation, slope_x, slope_y].iter().all(|v| v.is_finite()) => {}
            _ => return Err(invalid_arg("terrain values must be finite")),
        }
        for (i, b) in self.buildings.iter().enumerate() {
            b.validate(i)?;
            let eps = 1e-9 * self.meta.spatial_resolution;
            if b.corners().iter().any(|&(x, y)| x < x0 - eps || x > x1 + eps || y < y0 - eps || y > y1 + eps) {
                return Err(invalid_arg(format!("building {i}: footprint leaves the grid")));
            }
        }
        for i in 0..self.buildings.len() {
            for j in i + 1..self.buildings.len() {
                if rectangles_overlap(&self.buildings[i], &self.buildings[j]) {
                    return Err(invalid_arg(format!("buildings {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

fn face_color(segment_id: u32) -> Rgb {
    // golden-ratio hue walk keeps neighboring ids far apart
    let h = (segment_id as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let level = |v: f64| (60.0 + 180.0 * v).round() as u8;
    [level(r), level(g), level(b)]
}

fn ground_color(row: usize, col: usize) -> Rgb {
    let mut z = (row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (col as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z ^= z >> 31;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let n = (z >> 40) as u8 % 24;
    [70 + n, 95 + n, 55 + n / 2]
}

/// Rasterize a scene at pixel centers.
pub fn render_scene(spec: &SceneSpec) -> Result<SceneTruth> {
    spec.validate()?;
    let meta = spec.meta;
    let n = meta.len();
    let mut dtm = vec![0.0; n];
    let mut dsm = vec![0.0; n];
    let mut building_ids = vec![0u32; n];
    let mut face_of = vec![0u8; n];
    for r in 0..meta.height {
        for c in 0..meta.width {
            let i = meta.index(r, c);
            let (x, y) = meta.pixel_center(r, c);
            let ground = spec.terrain.at(x, y);
            dtm[i] = ground;
            dsm[i] = ground;
            if let Some((k, b)) = spec.buildings.iter().enumerate().find(|(_, b)| b.contains(x, y)) {
                let base = spec.terrain.at(b.center_x, b.center_y);
                let (z, face) = b.roof_at(x, y);
                dsm[i] = base + z;
                building_ids[i] = k as u32 + 1;
                face_of[i] = face as u8;
            }
        }
    }

    // segment ids follow (building, face) order, skipping faces with no pixels
    let mut counts: Vec<[usize; 4]> = vec![[0; 4]; spec.buildings.len()];
    for i in 0..n {
        if building_ids[i] > 0 {
            counts[building_ids[i] as usize - 1][face_of[i] as usize] += 1;
        }
    }
    let mut seg_of = vec![[0u32; 4]; spec.buildings.len()];
    let mut faces = Vec::new();
    for (k, b) in spec.buildings.iter().enumerate() {
        for f in 0..b.face_count() {
            if counts[k][f] == 0 {
                continue;
            }
            let id = faces.len() as u32 + 1;
            seg_of[k][f] = id;
            let azimuth = b.face_azimuth(f);
            faces.push(FaceTruth {
                segment_id: id,
                building_id: k as u32 + 1,
                face: f as u8,
                pitch_deg: b.pitch_deg(),
                azimuth_deg: azimuth,
                normal: match azimuth {
                    Some(a) => plane_normal(b.pitch_deg(), a),
                    None => [0.0, 0.0, 1.0],
                },
                pixel_count: counts[k][f],
            });
        }
    }
    let segment_ids: Vec<u32> = (0..n)
        .map(|i| match building_ids[i] {
            0 => 0,
            b => seg_of[b as usize - 1][face_of[i] as usize],
        })
        .collect();
    let rgb = Raster::from_fn(meta, |r, c| match segment_ids[meta.index(r, c)] {
        0 => ground_color(r, c),
        s => face_color(s),
    });

    let dsm = Raster::from_vec(meta, dsm)?;
    let dtm = Raster::from_vec(meta, dtm)?;
    let heightmap = Raster::from_vec(meta, dsm.data().iter().zip(dtm.data()).map(|(s, t)| s - t).collect())?;
    Ok(SceneTruth {
        dsm,
        dtm,
        heightmap,
        buildings: InstanceMap::new(InstanceKind::Buildings, Raster::from_vec(meta, building_ids)?),
        segments: InstanceMap::new(InstanceKind::RoofSegments, Raster::from_vec(meta, segment_ids)?),
        faces,
        rgb,
    })
}

/// DSM with seeded Gaussian noise of standard deviation `sigma_m`.
pub fn perturb(truth: &SceneTruth, sigma_m: f64, seed: u64) -> Result<HeightRaster> {
    if !(sigma_m >= 0.0 && sigma_m.is_finite()) {
        return Err(invalid_arg(format!("noise sigma must be >= 0, got {sigma_m}")));
    }
    if sigma_m == 0.0 {
        return Ok(truth.dsm.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_m).map_err(|e| invalid_arg(e.to_string()))?;
    let mut out = truth.dsm.clone();
    for v in out.data_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Knobs for [`random_scene`].
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSceneParams {
    pub meta: GridMeta,
    /// Side of the square cell each building is placed in, meters.
    pub cell_m: f64,
    pub roofs: Vec<RoofType>,
    pub pitch_range_deg: (f64, f64),
    pub eave_range_m: (f64, f64),
    /// Skip cells with this probability.
    pub empty_fraction: f64,
    pub terrain: Terrain,
}

impl RandomSceneParams {
    pub fn new(meta: GridMeta) -> Self {
        Self {
            meta,
            cell_m: 20.0,
            roofs: vec![RoofType::Flat, RoofType::Gable, RoofType::Hip],
            pitch_range_deg: (15.0, 40.0),
            eave_range_m: (3.0, 9.0),
            empty_fraction: 0.2,
            terrain: Terrain::default(),
        }
    }
}

/// Seeded random scene with one building per grid cell, never overlapping.
pub fn random_scene(params: &RandomSceneParams, seed: u64) -> Result<SceneSpec> {
    params.meta.validate()?;
    if params.roofs.is_empty() || params.cell_m <= 0.0 {
        return Err(invalid_arg("random scene needs roof types and a positive cell size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x0, y0, x1, y1) = params.meta.extent();
    let cols = ((x1 - x0) / params.cell_m).floor() as usize;
    let rows = ((y1 - y0) / params.cell_m).floor() as usize;
    let mut buildings = Vec::new();
    for cr in 0..rows {
        for cc in 0..cols {
            if rng.random_bool(params.empty_fraction.clamp(0.0, 1.0)) {
                continue;
            }
            let roof = params.roofs[rng.random_range(0..params.roofs.len())];
            // the footprint diagonal must fit inside 90% of the cell
            let max_diag = 0.9 * params.cell_m;
            let width = rng.random_range(0.3..0.5) * max_diag;
            let length = (width * rng.random_range(1.0..1.6)).min((max_diag * max_diag - width * width).sqrt());
            let orientation_deg = rng.random_range(0.0..180.0);
            let eave_height = rng.random_range(params.eave_range_m.0..=params.eave_range_m.1);
            let pitch = rng.random_range(params.pitch_range_deg.0..=params.pitch_range_deg.1);
            let ridge = match roof {
                RoofType::Flat => eave_height,
                _ => eave_height + pitch.to_radians().tan() * width / 2.0,
            };
            let slack = (params.cell_m - (length * length + width * width).sqrt()) / 2.0;
            let jitter_x = rng.random_range(-slack..=slack) * 0.5;
            let jitter_y = rng.random_range(-slack..=slack) * 0.5;
            buildings.push(BuildingSpec {
                center_x: x0 + (cc as f64 + 0.5) * params.cell_m + jitter_x,
                center_y: y1 - (cr as f64 + 0.5) * params.cell_m + jitter_y,
                length: length.max(width),
                width,
                orientation_deg,
                eave_height,
                ridge_height: Some(ridge),
                roof,
            });
        }
    }
    let spec = SceneSpec { meta: params.meta, terrain: params.terrain, buildings };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(roof: RoofType, width: f64, eave: f64, ridge: f64) -> SceneSpec {
        SceneSpec {
            meta: GridMeta::new(0.0, 20.0, 0.25, 80, 80).unwrap(),
            terrain: Terrain::Constant { elevation: 0.0 },
            buildings: vec![BuildingSpec {
                center_x: 10.0,
                center_y: 10.0,
                length: 12.0,
                width,
                orientation_deg: 0.0,
                eave_height: eave,
                ridge_height: Some(ridge),
                roof,
            }],
        }
    }

    #[test]
    fn flat_building_heights() {
        let t = render_scene(&one(RoofType::Flat, 8.0, 4.0, 4.0)).unwrap();
        for i in 0..t.dsm.meta().len() {
            let expected = if t.buildings.id(i) > 0 { 4.0 } else { 0.0 };
            assert_eq!(t.dsm.data()[i], expected);
        }
        assert_eq!(t.faces.len(), 1);
        assert_eq!(t.faces[0].azimuth_deg, None);
    }

    #[test]
    fn gable_pitch_is_analytic() {
        let spec = one(RoofType::Gable, 8.0, 4.0, 6.0);
        let t = render_scene(&spec).unwrap();
        let expected = (2.0f64 * 2.0 / 8.0).atan().to_degrees();
        assert!((expected - 26.565).abs() < 1e-3);
        assert_eq!(t.faces.len(), 2);
        for f in &t.faces {
            assert!((f.pitch_deg - expected).abs() < 1e-12);
        }
        // ridge along north: faces fall east and west
        assert_eq!(t.faces[0].azimuth_deg, Some(90.0));
        assert_eq!(t.faces[1].azimuth_deg, Some(270.0));
    }

    #[test]
    fn hip_faces_point_outward() {
        let mut spec = one(RoofType::Hip, 8.0, 4.0, 6.0);
        spec.buildings[0].orientation_deg = 30.0;
        let t = render_scene(&spec).unwrap();
        let az: Vec<f64> = t.faces.iter().map(|f| f.azimuth_deg.unwrap()).collect();
        assert_eq!(az, vec![120.0, 300.0, 30.0, 210.0]);
        let b = spec.buildings[0];
        for (r, c) in [(40, 40), (20, 35), (60, 45)] {
            let (x, y) = spec.meta.pixel_center(r, c);
            if !b.contains(x, y) {
                continue;
            }
            let (z, face) = b.roof_at(x, y);
            assert_eq!(t.dsm.at(r, c), &z);
            let seg = t.segments.ids.at(r, c);
            assert_eq!(t.faces[*seg as usize - 1].face as usize, face);
        }
    }

    #[test]
    fn heightmap_is_dsm_minus_dtm_on_ramp() {
        let mut spec = one(RoofType::Gable, 8.0, 4.0, 6.0);
        spec.terrain = Terrain::Ramp { elevation: 100.0, slope_x: 0.01, slope_y: -0.02 };
        let t = render_scene(&spec).unwrap();
        for i in 0..t.dsm.meta().len() {
            assert_eq!(t.heightmap.data()[i], t.dsm.data()[i] - t.dtm.data()[i]);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = one(RoofType::Gable, 8.0, 4.0, 3.0);
        assert!(render_scene(&s).is_err());
        s = one(RoofType::Hip, 14.0, 4.0, 6.0);
        assert!(s.validate().is_err());
        s = one(RoofType::Flat, 8.0, 4.0, 4.0);
        s.buildings[0].center_x = 1.0;
        assert!(s.validate().is_err());
        s = one(RoofType::Flat, 8.0, 4.0, 4.0);
        let mut other = s.buildings[0];
        other.center_x += 5.9;
        other.length = 4.0;
        other.orientation_deg = 90.0;
        s.buildings.push(other);
        assert!(s.validate().is_err());
        s.buildings[1].center_x += 0.2;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn segments_partition_buildings() {
        let meta = GridMeta::new(0.0, 100.0, 0.25, 400, 400).unwrap();
        let spec = random_scene(&RandomSceneParams::new(meta), 3).unwrap();
        let t = render_scene(&spec).unwrap();
        for i in 0..meta.len() {
            assert_eq!(t.buildings.id(i) > 0, t.segments.id(i) > 0);
        }
        for f in &t.faces {
            assert_eq!(t.segments.areas_px()[&f.segment_id], f.pixel_count);
        }
    }

    #[test]
    fn noise_is_seeded_and_has_the_right_spread() {
        let meta = GridMeta::with_size(256, 256, 0.25).unwrap();
        let spec = SceneSpec { meta, terrain: Terrain::default(), buildings: vec![] };
        let t = render_scene(&spec).unwrap();
        assert_eq!(perturb(&t, 0.0, 1).unwrap(), t.dsm);
        let a = perturb(&t, 0.05, 9).unwrap();
        assert_eq!(a, perturb(&t, 0.05, 9).unwrap());
        assert_ne!(a, perturb(&t, 0.05, 10).unwrap());
        let n = a.data().len() as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        let sd = (a.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.05).abs() < 0.005, "sd {sd}");
    }
}
