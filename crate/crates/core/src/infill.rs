//! Occlusion infill for reprojected rasters.
//!
//! With a fill raster the occluded pixels are copied from it. Without one,
//! holes are seeded by interpolating along rows and columns between known
//! pixels (peeling inward where no line reaches one), relaxed by Jacobi
//! sweeps toward a harmonic fill, then softened with a 5x5 box blur so the
//! synthetic area stays visibly smoother than real imagery.

use crate::error::{Error, Result};
use crate::pixel::Blend;
use crate::raster::{MaskRaster, Raster};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionParams {
    /// Stop once no pixel changes by more than this in a sweep.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Half-width of the final box blur (2 gives a 5x5 window).
    pub blur_radius: usize,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self { tolerance: 0.5, max_iterations: 500, blur_radius: 2 }
    }
}

pub fn infill_occlusions<T: Blend>(
    img: &Raster<T>,
    occlusion: &MaskRaster,
    fill: Option<&Raster<T>>,
) -> Result<Raster<T>> {
    infill_with(img, occlusion, fill, &DiffusionParams::default())
}

pub fn infill_with<T: Blend>(
    img: &Raster<T>,
    occlusion: &MaskRaster,
    fill: Option<&Raster<T>>,
    params: &DiffusionParams,
) -> Result<Raster<T>> {
    img.same_meta(occlusion, "infill occlusion mask")?;
    let holes: Vec<usize> = (0..img.meta().len()).filter(|&i| occlusion.data()[i]).collect();
    if holes.is_empty() {
        return Ok(img.clone());
    }
    let mut out = img.clone();
    if let Some(fill) = fill {
        img.same_meta(fill, "infill fill raster")?;
        for &i in &holes {
            out.data_mut()[i] = fill.data()[i];
            out.set_valid(i, fill.is_valid(i));
        }
        return Ok(out);
    }

    let n = img.meta().len();
    let known: Vec<bool> = (0..n).map(|i| !occlusion.data()[i] && img.is_valid(i)).collect();
    if !known.iter().any(|&k| k) {
        return Err(Error::Empty("occlusion covers the whole raster and no fill was given".into()));
    }

    let meta = *img.meta();
    let (w, h) = (meta.width, meta.height);
    let neighbors = |i: usize| {
        let (r, c) = (i / w, i % w);
        let mut out = [usize::MAX; 4];
        if r > 0 {
            out[0] = i - w;
        }
        if r + 1 < h {
            out[1] = i + w;
        }
        if c > 0 {
            out[2] = i - 1;
        }
        if c + 1 < w {
            out[3] = i + 1;
        }
        out
    };

    let ch = T::CHANNELS;
    let mut values = vec![0.0; n * ch];
    for i in 0..n {
        if known[i] {
            for k in 0..ch {
                values[i * ch + k] = img.data()[i].channel(k);
            }
        }
    }

    let mut filled = known.clone();
    let mut acc = vec![0.0; ch];

    // Line seeding: blend linear interpolants along the row and the column,
    // weighting each by the inverse of its span.
    let mut seeded = Vec::new();
    for &i in &holes {
        let (r, c) = (i / w, i % w);
        let scan = |step: isize, along_row: bool| -> Option<(usize, usize)> {
            let (limit, pos) = if along_row { (w, c) } else { (h, r) };
            let mut k = pos as isize + step;
            let mut d = 1;
            while k >= 0 && (k as usize) < limit {
                let j = if along_row { r * w + k as usize } else { k as usize * w + c };
                if known[j] {
                    return Some((j, d));
                }
                k += step;
                d += 1;
            }
            None
        };
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut total = 0.0;
        for (a, b) in [(scan(-1, true), scan(1, true)), (scan(-1, false), scan(1, false))] {
            let (span, piece): (f64, Vec<f64>) = match (a, b) {
                (Some((ja, da)), Some((jb, db))) => {
                    let span = (da + db) as f64;
                    let t = da as f64 / span;
                    let v = (0..ch).map(|k| values[ja * ch + k] * (1.0 - t) + values[jb * ch + k] * t).collect();
                    (span, v)
                }
                (Some((j, d)), None) | (None, Some((j, d))) => {
                    // one-sided lines are weaker evidence
                    (4.0 * d as f64, (0..ch).map(|k| values[j * ch + k]).collect())
                }
                (None, None) => continue,
            };
            let wgt = 1.0 / span;
            total += wgt;
            for k in 0..ch {
                acc[k] += wgt * piece[k];
            }
        }
        if total > 0.0 {
            seeded.push((i, acc.iter().map(|a| a / total).collect::<Vec<_>>()));
        }
    }
    for (i, v) in seeded {
        values[i * ch..(i + 1) * ch].copy_from_slice(&v);
        filled[i] = true;
    }

    // Onion-peel seeding for whatever the lines missed.
    let mut frontier: Vec<usize> = holes.iter().copied().filter(|&i| !filled[i]).collect();
    while !frontier.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &frontier {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut count = 0.0;
            for j in neighbors(i) {
                if j != usize::MAX && filled[j] {
                    count += 1.0;
                    for k in 0..ch {
                        acc[k] += values[j * ch + k];
                    }
                }
            }
            if count > 0.0 {
                layer.push((i, acc.iter().map(|a| a / count).collect::<Vec<_>>()));
            } else {
                rest.push(i);
            }
        }
        if layer.is_empty() {
            // unreachable regions (only happens when non-occluded pixels are invalid)
            break;
        }
        for (i, v) in layer {
            values[i * ch..(i + 1) * ch].copy_from_slice(&v);
            filled[i] = true;
        }
        frontier = rest;
    }

    // Jacobi relaxation over reachable holes.
    let active: Vec<usize> = holes.iter().copied().filter(|&i| filled[i]).collect();
    let mut next = values.clone();
    for _ in 0..params.max_iterations {
        let mut max_change: f64 = 0.0;
        for &i in &active {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut count = 0.0;
            for j in neighbors(i) {
                if j != usize::MAX && filled[j] {
                    count += 1.0;
                    for k in 0..ch {
                        acc[k] += values[j * ch + k];
                    }
                }
            }
            for k in 0..ch {
                let v = acc[k] / count;
                max_change = max_change.max((v - values[i * ch + k]).abs());
                next[i * ch + k] = v;
            }
        }
        for &i in &active {
            values[i * ch..(i + 1) * ch].copy_from_slice(&next[i * ch..(i + 1) * ch]);
        }
        if max_change < params.tolerance {
            break;
        }
    }

    // Box blur restricted to filled holes, reading the relaxed field.
    let rad = params.blur_radius as isize;
    for &i in &active {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut count = 0.0;
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                let (rr, cc) = (r + dr, c + dc);
                if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                    continue;
                }
                let j = rr as usize * w + cc as usize;
                if !filled[j] {
                    continue;
                }
                count += 1.0;
                for k in 0..ch {
                    acc[k] += values[j * ch + k];
                }
            }
        }
        let px: Vec<f64> = acc.iter().map(|a| a / count).collect();
        out.data_mut()[i] = T::from_channels(&px);
        out.set_valid(i, true);
    }
    for &i in &holes {
        if !filled[i] {
            out.set_valid(i, false);
        }
    }
    Ok(out)
}
