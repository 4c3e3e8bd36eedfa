//! ESRI ASCII grid reading and writing.
//!
//! Header keys are matched case-insensitively. Both the `xllcorner` and
//! `xllcenter` flavors are accepted; files are always written with corners.
//! Pixels equal to `NODATA_value` become invalid.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GridMeta, HeightRaster, LabelRaster, MaskRaster, Raster};

/// Upper bound on `ncols * nrows` accepted by the parser.
pub const MAX_CELLS: usize = 1 << 28;

pub const FLOAT_NODATA: f64 = -9999.0;
pub const INT_NODATA: i64 = -1;

/// A parsed grid before it is converted into a typed raster.
#[derive(Clone, Debug, PartialEq)]
pub struct AsciiGrid {
    pub meta: GridMeta,
    pub nodata: Option<f64>,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_ascii_grid(text: &str) -> Result<AsciiGrid> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll: Option<(f64, bool)> = None;
    let mut yll: Option<(f64, bool)> = None;
    let mut cellsize = None;
    let mut nodata = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(lineno, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = parts.next().ok_or_else(|| perr(lineno + 1, format!("missing value for `{key}`")))?;
        let num: f64 = value.parse().map_err(|_| perr(lineno + 1, format!("bad number `{value}` for `{key}`")))?;
        if !num.is_finite() {
            return Err(perr(lineno + 1, format!("non-finite value for `{key}`")));
        }
        let count = |n: f64| -> Result<usize> {
            if n >= 1.0 && n.fract() == 0.0 && n <= MAX_CELLS as f64 {
                Ok(n as usize)
            } else {
                Err(perr(lineno + 1, format!("`{key}` must be a positive integer")))
            }
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(count(num)?),
            "nrows" => nrows = Some(count(num)?),
            "xllcorner" => xll = Some((num, false)),
            "xllcenter" => xll = Some((num, true)),
            "yllcorner" => yll = Some((num, false)),
            "yllcenter" => yll = Some((num, true)),
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = Some(num),
            other => return Err(perr(lineno + 1, format!("unknown header key `{other}`"))),
        }
        lines.next();
    }

    let missing = |k: &str| perr(1, format!("missing header `{k}`"));
    let width = ncols.ok_or_else(|| missing("ncols"))?;
    let height = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let (x, x_center) = xll.ok_or_else(|| missing("xllcorner"))?;
    let (y, y_center) = yll.ok_or_else(|| missing("yllcorner"))?;
    let cells = width.checked_mul(height).filter(|&n| n <= MAX_CELLS).ok_or_else(|| perr(1, "grid too large"))?;
    let origin_x = if x_center { x - cellsize / 2.0 } else { x };
    let south = if y_center { y - cellsize / 2.0 } else { y };
    let origin_y = south + height as f64 * cellsize;
    let meta = GridMeta::new(origin_x, origin_y, cellsize, width, height).map_err(|e| perr(1, e.to_string()))?;

    let mut values = Vec::with_capacity(cells.min(1 << 20));
    let mut valid = Vec::with_capacity(cells.min(1 << 20));
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            if values.len() == cells {
                return Err(perr(lineno + 1, format!("more than {cells} values")));
            }
            let v: f64 = tok.parse().map_err(|_| perr(lineno + 1, format!("bad value `{tok}`")))?;
            let is_nodata = nodata.is_some_and(|nd| v == nd);
            if !is_nodata && !v.is_finite() {
                return Err(perr(lineno + 1, format!("non-finite value `{tok}`")));
            }
            values.push(if is_nodata { 0.0 } else { v });
            valid.push(!is_nodata);
        }
    }
    if values.len() != cells {
        return Err(perr(text.lines().count(), format!("expected {cells} values, found {}", values.len())));
    }
    Ok(AsciiGrid { meta, nodata, values, valid })
}

impl AsciiGrid {
    pub fn into_height(self) -> Result<HeightRaster> {
        Raster::from_vec(self.meta, self.values)?.with_validity(Some(self.valid))
    }

    /// Non-negative integer labels; fractional or negative valid cells are rejected.
    pub fn into_labels(self) -> Result<LabelRaster> {
        let mut out = Vec::with_capacity(self.values.len());
        for (i, (&v, &ok)) in self.values.iter().zip(&self.valid).enumerate() {
            if !ok {
                out.push(0);
                continue;
            }
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                let (r, c) = self.meta.row_col(i);
                return Err(Error::InvalidArgument(format!("label at ({r}, {c}) is not a non-negative integer: {v}")));
            }
            out.push(v as u32);
        }
        Raster::from_vec(self.meta, out)?.with_validity(Some(self.valid))
    }

    /// Non-zero valid cells are true.
    pub fn into_mask(self) -> Result<MaskRaster> {
        let data = self.values.iter().zip(&self.valid).map(|(&v, &ok)| ok && v != 0.0).collect();
        Raster::from_vec(self.meta, data)
    }
}

fn write_header(out: &mut String, meta: &GridMeta, nodata: &str) {
    let south = meta.origin_y - meta.height as f64 * meta.spatial_resolution;
    let _ = writeln!(out, "ncols {}", meta.width);
    let _ = writeln!(out, "nrows {}", meta.height);
    let _ = writeln!(out, "xllcorner {}", meta.origin_x);
    let _ = writeln!(out, "yllcorner {south}");
    let _ = writeln!(out, "cellsize {}", meta.spatial_resolution);
    let _ = writeln!(out, "NODATA_value {nodata}");
}

fn write_rows(out: &mut String, meta: &GridMeta, mut cell: impl FnMut(usize, &mut String)) {
    for row in 0..meta.height {
        for col in 0..meta.width {
            if col > 0 {
                out.push(' ');
            }
            cell(meta.index(row, col), out);
        }
        out.push('\n');
    }
}

/// Pick a NODATA marker that no valid cell uses.
fn float_nodata(r: &HeightRaster) -> f64 {
    let valid = |i: usize| r.is_valid(i);
    let clashes = |nd: f64| r.data().iter().enumerate().any(|(i, &v)| valid(i) && v == nd);
    if !clashes(FLOAT_NODATA) {
        return FLOAT_NODATA;
    }
    let min = r.data().iter().enumerate().filter(|&(i, _)| valid(i)).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
    (min - 1.0).floor()
}

pub fn format_height_grid(r: &HeightRaster) -> String {
    let nodata = float_nodata(r);
    let mut out = String::with_capacity(r.data().len() * 8 + 128);
    write_header(&mut out, r.meta(), &nodata.to_string());
    write_rows(&mut out, r.meta(), |i, out| {
        let v = if r.is_valid(i) { r.data()[i] } else { nodata };
        let _ = write!(out, "{v}");
    });
    out
}

pub fn format_label_grid(r: &LabelRaster) -> String {
    let mut out = String::with_capacity(r.data().len() * 3 + 128);
    write_header(&mut out, r.meta(), &INT_NODATA.to_string());
    write_rows(&mut out, r.meta(), |i, out| {
        if r.is_valid(i) {
            let _ = write!(out, "{}", r.data()[i]);
        } else {
            let _ = write!(out, "{INT_NODATA}");
        }
    });
    out
}

pub fn format_mask_grid(r: &MaskRaster) -> String {
    let mut out = String::with_capacity(r.data().len() * 2 + 128);
    write_header(&mut out, r.meta(), &INT_NODATA.to_string());
    write_rows(&mut out, r.meta(), |i, out| {
        out.push(if r.data()[i] { '1' } else { '0' });
    });
    out
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<AsciiGrid> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_ascii_grid(&text).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })
}

pub fn read_height(path: impl AsRef<Path>) -> Result<HeightRaster> {
    read_grid(path)?.into_height()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelRaster> {
    read_grid(path)?.into_labels()
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskRaster> {
    read_grid(path)?.into_mask()
}

pub fn write_height(path: impl AsRef<Path>, r: &HeightRaster) -> Result<()> {
    Ok(std::fs::write(path, format_height_grid(r))?)
}

pub fn write_labels(path: impl AsRef<Path>, r: &LabelRaster) -> Result<()> {
    Ok(std::fs::write(path, format_label_grid(r))?)
}

pub fn write_mask(path: impl AsRef<Path>, r: &MaskRaster) -> Result<()> {
    Ok(std::fs::write(path, format_mask_grid(r))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str =
        "ncols 3\nnrows 2\nxllcorner 100\nyllcorner 50\ncellsize 0.5\nNODATA_value -9999\n1 2.5 -9999\n4 5 6\n";

    #[test]
    fn parses_header_and_nodata() {
        let g = parse_ascii_grid(SAMPLE).unwrap();
        assert_eq!(g.meta.width, 3);
        assert_eq!(g.meta.height, 2);
        assert_eq!(g.meta.origin_x, 100.0);
        assert_eq!(g.meta.origin_y, 51.0);
        assert_eq!(g.values, vec![1.0, 2.5, 0.0, 4.0, 5.0, 6.0]);
        assert_eq!(g.valid, vec![true, true, false, true, true, true]);
    }

    #[test]
    fn center_flavor_shifts_origin() {
        let text = "NCOLS 1\nNROWS 1\nXLLCENTER 1\nYLLCENTER 1\nCELLSIZE 2\n7\n";
        let g = parse_ascii_grid(text).unwrap();
        assert_eq!((g.meta.origin_x, g.meta.origin_y), (0.0, 2.0));
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n",
            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n",
            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0\n1\n",
            "ncols -1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n",
            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nabc\n",
            "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\ninf\n",
            "ncols 100000\nnrows 100000\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n",
            "ncols 1\nnrows 1\nbogus 3\n",
        ] {
            assert!(parse_ascii_grid(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn labels_must_be_integers() {
        let g = parse_ascii_grid(SAMPLE).unwrap();
        assert!(g.into_labels().is_err());
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -1\n3 -1\n";
        let l = parse_ascii_grid(text).unwrap().into_labels().unwrap();
        assert_eq!(l.data()[0], 3);
        assert!(!l.is_valid(1));
    }

    #[test]
    fn nodata_marker_avoids_valid_values() {
        let meta = GridMeta::with_size(2, 1, 1.0).unwrap();
        let mut r = Raster::from_vec(meta, vec![-9999.0, 3.0]).unwrap();
        r.set_valid(1, false);
        let back = parse_ascii_grid(&format_height_grid(&r)).unwrap().into_height().unwrap();
        assert_eq!(back.data()[0], -9999.0);
        assert!(back.is_valid(0) && !back.is_valid(1));
    }

    proptest! {
        #[test]
        fn height_grid_roundtrip(
            w in 1usize..6, h in 1usize..6,
            vals in proptest::collection::vec(-1e6f64..1e6, 36),
            holes in proptest::collection::vec(any::<bool>(), 36),
            ox in -1e6f64..1e6, res in 0.01f64..100.0,
        ) {
            let meta = GridMeta::new(ox, 0.0, res, w, h).unwrap();
            let n = meta.len();
            let r = Raster::from_vec(meta, vals[..n].to_vec()).unwrap()
                .with_validity(Some(holes[..n].to_vec())).unwrap();
            let back = parse_ascii_grid(&format_height_grid(&r)).unwrap().into_height().unwrap();
            prop_assert_eq!(back.meta().width, w);
            prop_assert_eq!(back.meta().spatial_resolution, res);
            for i in 0..n {
                prop_assert_eq!(back.is_valid(i), r.is_valid(i));
                if r.is_valid(i) {
                    prop_assert_eq!(back.data()[i], r.data()[i]);
                }
            }
        }
    }
}
