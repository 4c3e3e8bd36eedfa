//! Discrete plane orientations used as graph-cut labels.

use crate::terrain::dot;

/// Candidate roof-plane normals: one flat label followed by a pitch x azimuth grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneLabelSet {
    normals: Vec<[f64; 3]>,
    orientations: Vec<(f64, f64)>,
}

/// Unit normal of a plane with the given pitch whose fall line points along `azimuth_deg`.
pub fn plane_normal(pitch_deg: f64, azimuth_deg: f64) -> [f64; 3] {
    let (sp, cp) = pitch_deg.to_radians().sin_cos();
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    [sp * sa, sp * ca, cp]
}

/// Angle between two unit vectors in degrees.
#[inline]
pub fn angle_between_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
}

impl PlaneLabelSet {
    pub fn new(pitches_deg: &[f64], azimuths_deg: &[f64]) -> Self {
        let mut orientations = vec![(0.0, 0.0)];
        for &p in pitches_deg {
            for &a in azimuths_deg {
                orientations.push((p, a));
            }
        }
        let normals =
            orientations.iter().map(|&(p, a)| if p == 0.0 { [0.0, 0.0, 1.0] } else { plane_normal(p, a) }).collect();
        Self { normals, orientations }
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normal(&self, label: usize) -> [f64; 3] {
        self.normals[label]
    }

    /// (pitch, azimuth) in degrees; the flat label reports azimuth 0.
    pub fn orientation(&self, label: usize) -> (f64, f64) {
        self.orientations[label]
    }

    pub fn normals(&self) -> &[[f64; 3]] {
        &self.normals
    }
}

impl Default for PlaneLabelSet {
    /// Flat plus pitches 10..=50 step 10 times azimuths 0..330 step 30: 61 labels.
    fn default() -> Self {
        let pitches: Vec<f64> = (1..=5).map(|k| 10.0 * k as f64).collect();
        let azimuths: Vec<f64> = (0..12).map(|k| 30.0 * k as f64).collect();
        Self::new(&pitches, &azimuths)
    }
}
