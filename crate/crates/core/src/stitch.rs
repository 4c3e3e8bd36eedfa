//! Overlapping tiles and weighted-ramp mosaicking.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::pixel::Blend;
use crate::raster::{GridMeta, LabelRaster, Raster};

/// A tile and where its top-left pixel sits in the mosaic.
#[derive(Clone, Debug, PartialEq)]
pub struct TilePlacement<T> {
    pub tile: Raster<T>,
    pub row_offset: usize,
    pub col_offset: usize,
    /// Ramp width in pixels at each tile edge.
    pub margin: usize,
}

/// Pixel window of one tile inside a larger grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileWindow {
    pub row_offset: usize,
    pub col_offset: usize,
    pub width: usize,
    pub height: usize,
}

fn starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let stride = tile - overlap;
    let mut out: Vec<usize> = (0..).map(|k| k * stride).take_while(|&s| s + tile < len).collect();
    out.push(len - tile);
    out.dedup();
    out
}

/// Cover a grid with `tile`-sized windows overlapping by at least `overlap`.
pub fn split_tiles(meta: &GridMeta, tile: usize, overlap: usize) -> Result<Vec<TileWindow>> {
    if tile == 0 || overlap >= tile {
        return Err(invalid_arg(format!("tile size {tile} must exceed overlap {overlap}")));
    }
    let rows = starts(meta.height, tile, overlap);
    let cols = starts(meta.width, tile, overlap);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in &rows {
        for &c in &cols {
            out.push(TileWindow {
                row_offset: r,
                col_offset: c,
                width: tile.min(meta.width),
                height: tile.min(meta.height),
            });
        }
    }
    Ok(out)
}

/// Crop `raster` into the given windows.
pub fn split_raster<T: Clone>(
    raster: &Raster<T>,
    windows: &[TileWindow],
    margin: usize,
) -> Result<Vec<TilePlacement<T>>> {
    windows
        .iter()
        .map(|w| {
            Ok(TilePlacement {
                tile: raster.crop(w.row_offset, w.col_offset, w.width, w.height)?,
                row_offset: w.row_offset,
                col_offset: w.col_offset,
                margin,
            })
        })
        .collect()
}

/// Edge ramp: 1/(M+1) on the outermost pixel, rising to 1 after M pixels.
#[inline]
pub fn ramp(pos: usize, len: usize, margin: usize) -> f64 {
    let d = pos.min(len - 1 - pos);
    if d >= margin {
        1.0
    } else {
        (d + 1) as f64 / (margin + 1) as f64
    }
}

fn check_tiles<T>(tiles: &[TilePlacement<T>], mosaic: &GridMeta) -> Result<()> {
    mosaic.validate()?;
    if tiles.is_empty() {
        return Err(Error::Empty("no tiles to stitch".into()));
    }
    for (k, t) in tiles.iter().enumerate() {
        let m = t.tile.meta();
        if m.spatial_resolution != mosaic.spatial_resolution {
            return Err(Error::GridMismatch(format!(
                "tile {k} resolution {} differs from mosaic {}",
                m.spatial_resolution, mosaic.spatial_resolution
            )));
        }
        if t.row_offset + m.height > mosaic.height || t.col_offset + m.width > mosaic.width {
            return Err(Error::GridMismatch(format!(
                "tile {k} at ({}, {}) of size {}x{} exceeds the {}x{} mosaic",
                t.row_offset, t.col_offset, m.width, m.height, mosaic.width, mosaic.height
            )));
        }
    }
    Ok(())
}

/// Tile indices in a canonical order that does not depend on list order.
fn canonical_order<T>(tiles: &[TilePlacement<T>], value_cmp: impl Fn(&T, &T) -> Ordering) -> Vec<usize> {
    let key_cmp = |a: &TilePlacement<T>, b: &TilePlacement<T>| -> Ordering {
        (a.row_offset, a.col_offset, a.tile.width(), a.tile.height(), a.margin)
            .cmp(&(b.row_offset, b.col_offset, b.tile.width(), b.tile.height(), b.margin))
            .then_with(|| {
                for (x, y) in a.tile.data().iter().zip(b.tile.data()) {
                    let o = value_cmp(x, y);
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                a.tile.validity().cmp(&b.tile.validity())
            })
    };
    let mut order: Vec<usize> = (0..tiles.len()).collect();
    order.sort_by(|&i, &j| key_cmp(&tiles[i], &tiles[j]));
    order
}

/// Visit the valid contributions of every covering tile at each mosaic pixel,
/// in canonical tile order.
fn stitch_with<T, U, F>(tiles: &[TilePlacement<T>], mosaic: &GridMeta, canon: &[usize], combine: F) -> Result<Raster<U>>
where
    T: Copy + Send + Sync,
    U: Copy + Default + Send,
    F: Fn(&[(f64, T)]) -> Option<U> + Sync,
{
    let w = mosaic.width;
    let rows: Vec<Result<Vec<(U, bool)>>> = (0..mosaic.height)
        .into_par_iter()
        .map(|r| {
            let covering: Vec<&TilePlacement<T>> = canon
                .iter()
                .map(|&k| &tiles[k])
                .filter(|t| (t.row_offset..t.row_offset + t.tile.height()).contains(&r))
                .collect();
            let mut contrib = Vec::with_capacity(covering.len());
            let mut out = Vec::with_capacity(w);
            for c in 0..w {
                contrib.clear();
                let mut covered = false;
                for t in &covering {
                    let (tw, th) = (t.tile.width(), t.tile.height());
                    if !(t.col_offset..t.col_offset + tw).contains(&c) {
                        continue;
                    }
                    covered = true;
                    let (tr, tc) = (r - t.row_offset, c - t.col_offset);
                    let i = tr * tw + tc;
                    if t.tile.is_valid(i) {
                        let weight = ramp(tr, th, t.margin) * ramp(tc, tw, t.margin);
                        contrib.push((weight, t.tile.data()[i]));
                    }
                }
                if !covered {
                    return Err(Error::Uncovered { row: r, col: c });
                }
                out.push(match combine(&contrib) {
                    Some(v) => (v, true),
                    None => (U::default(), false),
                });
            }
            Ok(out)
        })
        .collect();
    let mut data = Vec::with_capacity(mosaic.len());
    let mut valid = Vec::with_capacity(mosaic.len());
    for row in rows {
        for (v, ok) in row? {
            data.push(v);
            valid.push(ok);
        }
    }
    let all = valid.iter().all(|&v| v);
    Raster::from_vec(*mosaic, data)?.with_validity(if all { None } else { Some(valid) })
}

/// Weighted average of overlapping tiles. Pixels where every covering tile
/// agrees keep that value exactly.
pub fn stitch<T: Blend + Default>(tiles: &[TilePlacement<T>], mosaic: &GridMeta) -> Result<Raster<T>> {
    check_tiles(tiles, mosaic)?;
    let canon = canonical_order(tiles, |x: &T, y: &T| {
        (0..T::CHANNELS).map(|k| x.channel(k).total_cmp(&y.channel(k))).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    });
    stitch_with(tiles, mosaic, &canon, |contrib| {
        let (_, first) = *contrib.first()?;
        if contrib.iter().all(|(_, v)| *v == first) {
            return Some(first);
        }
        let total: f64 = contrib.iter().map(|(w, _)| w).sum();
        let mut ch = [0.0; 4];
        for k in 0..T::CHANNELS {
            ch[k] = contrib.iter().map(|(w, v)| w * v.channel(k)).sum::<f64>() / total;
        }
        Some(T::from_channels(&ch[..T::CHANNELS]))
    })
}

/// Label mosaic by weighted vote: each pixel takes the label with the largest
/// summed weight, ties to the lower label.
pub fn stitch_labels(tiles: &[TilePlacement<u32>], mosaic: &GridMeta) -> Result<LabelRaster> {
    check_tiles(tiles, mosaic)?;
    let canon = canonical_order(tiles, u32::cmp);
    stitch_with(tiles, mosaic, &canon, |contrib| {
        let mut votes: BTreeMap<u32, f64> = BTreeMap::new();
        for &(w, v) in contrib {
            *votes.entry(v).or_insert(0.0) += w;
        }
        votes
            .into_iter()
            .fold(None, |best: Option<(u32, f64)>, (label, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((label, w)),
            })
            .map(|(label, _)| label)
    })
}

/// One entry of a stitch manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestTile {
    pub path: String,
    pub row_offset: usize,
    pub col_offset: usize,
}

/// On-disk description of a tile set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchManifest {
    pub mosaic: GridMeta,
    pub margin: usize,
    /// `true` for integer label rasters, stitched by vote.
    #[serde(default)]
    pub labels: bool,
    pub tiles: Vec<ManifestTile>,
}

impl StitchManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.mosaic.validate()?;
        if m.tiles.is_empty() {
            return Err(Error::Empty("stitch manifest lists no tiles".into()));
        }
        Ok(m)
    }
}
