//! Grid storage, ESRI ASCII grid I/O and alignment checks.
//!
//! Cells are stored row-major, top row first: `values[row * ncols + col]`
//! with `row = 0` the northern-most row. This is the order in which an
//! ESRI ASCII grid file lists its cells, so reading and writing never
//! reorders anything.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Absolute tolerance, in map units, for comparing real header fields.
pub const ALIGN_TOL: f64 = 1e-9;

/// Default nodata value used when a file omits `NODATA_value`.
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Georeferencing of a grid, without its cell values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    /// x of the lower-left corner of the lower-left cell.
    pub xll: f64,
    /// y of the lower-left corner of the lower-left cell.
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

impl GridHeader {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64) -> Result<Self> {
        let h = GridHeader {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata: DEFAULT_NODATA,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn with_nodata(mut self, nodata: f64) -> Self {
        self.nodata = nodata;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ncols == 0 || self.nrows == 0 {
            return Err(Error::Dimension(format!(
                "grid must have at least one row and column, got {}x{}",
                self.nrows, self.ncols
            )));
        }
        if !(self.cellsize.is_finite() && self.cellsize > 0.0) {
            return Err(Error::Input(format!(
                "cellsize must be positive, got {}",
                self.cellsize
            )));
        }
        if !self.xll.is_finite() || !self.yll.is_finite() {
            return Err(Error::Input("lower-left corner must be finite".into()));
        }
        if self.nodata.is_nan() {
            return Err(Error::Input("nodata value must not be NaN".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Map coordinates of the centre of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let x = self.xll + (col as f64 + 0.5) * self.cellsize;
        let y = self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize;
        (x, y)
    }

    /// Map extent as `(xmin, ymin, xmax, ymax)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.xll,
            self.yll,
            self.xll + self.ncols as f64 * self.cellsize,
            self.yll + self.nrows as f64 * self.cellsize,
        )
    }

    /// Name of the first field that differs from `other`, if any.
    pub fn mismatch(&self, other: &GridHeader) -> Option<&'static str> {
        if self.ncols != other.ncols {
            Some("ncols")
        } else if self.nrows != other.nrows {
            Some("nrows")
        } else if (self.xll - other.xll).abs() > ALIGN_TOL {
            Some("xll")
        } else if (self.yll - other.yll).abs() > ALIGN_TOL {
            Some("yll")
        } else if (self.cellsize - other.cellsize).abs() > ALIGN_TOL {
            Some("cellsize")
        } else {
            None
        }
    }
}

/// A georeferenced single-band raster with a nodata mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    header: GridHeader,
    values: Vec<f64>,
}

impl Grid {
    /// Builds a grid, checking the header and that every value is either
    /// finite or exactly the nodata value.
    pub fn new(header: GridHeader, values: Vec<f64>) -> Result<Self> {
        header.validate()?;
        if values.len() != header.len() {
            return Err(Error::Dimension(format!(
                "expected {} values for {}x{} grid, got {}",
                header.len(),
                header.nrows,
                header.ncols,
                values.len()
            )));
        }
        let nodata_bits = header.nodata.to_bits();
        if let Some(i) = values
            .iter()
            .position(|v| !v.is_finite() && v.to_bits() != nodata_bits)
        {
            return Err(Error::Input(format!(
                "cell ({}, {}) holds non-finite value {}",
                i / header.ncols,
                i % header.ncols,
                values[i]
            )));
        }
        Ok(Grid { header, values })
    }

    /// Grid with every cell set to `value`.
    pub fn filled(header: GridHeader, value: f64) -> Result<Self> {
        Grid::new(header, vec![value; header.len()])
    }

    /// Builds a grid from a per-cell function; `None` becomes nodata.
    pub fn from_fn<F>(header: GridHeader, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Option<f64>,
    {
        let mut values = Vec::with_capacity(header.len());
        for row in 0..header.nrows {
            for col in 0..header.ncols {
                values.push(f(row, col).unwrap_or(header.nodata));
            }
        }
        Grid::new(header, values)
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn ncols(&self) -> usize {
        self.header.ncols
    }

    pub fn nrows(&self) -> usize {
        self.header.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.header.cellsize
    }

    pub fn nodata(&self) -> f64 {
        self.header.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Exact bit comparison against the nodata value.
    pub fn is_nodata_value(&self, v: f64) -> bool {
        v.to_bits() == self.header.nodata.to_bits()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * self.header.ncols + col];
        if self.is_nodata_value(v) {
            None
        } else {
            Some(v)
        }
    }

    /// Iterates over `(row, col, value)` of every valid cell in storage order.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let ncols = self.header.ncols;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !self.is_nodata_value(**v))
            .map(move |(i, v)| (i / ncols, i % ncols, *v))
    }

    /// Minimum and maximum over valid cells, `None` when every cell is nodata.
    pub fn value_range(&self) -> Option<(f64, f64)> {
        self.valid_cells().fold(None, |acc, (_, _, v)| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    /// Applies `f` to every valid cell; nodata passes through.
    pub fn map_valid<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<Grid> {
        let values = self
            .values
            .iter()
            .map(|&v| if self.is_nodata_value(v) { v } else { f(v) })
            .collect();
        Grid::new(self.header, values)
    }

    /// The 3x3 neighbourhood centred on `(row, col)`. Off-grid and nodata
    /// positions are `None`. `window[1][1]` is the centre; `window[0]` is
    /// the row above (north).
    pub fn focal_window(&self, row: usize, col: usize) -> Result<[[Option<f64>; 3]; 3]> {
        let (nrows, ncols) = (self.header.nrows, self.header.ncols);
        if row >= nrows || col >= ncols {
            return Err(Error::Index {
                row,
                col,
                nrows,
                ncols,
            });
        }
        let mut w = [[None; 3]; 3];
        for (dr, wrow) in w.iter_mut().enumerate() {
            for (dc, cell) in wrow.iter_mut().enumerate() {
                let r = row as isize + dr as isize - 1;
                let c = col as isize + dc as isize - 1;
                if r >= 0 && c >= 0 && (r as usize) < nrows && (c as usize) < ncols {
                    *cell = self.get(r as usize, c as usize);
                }
            }
        }
        Ok(w)
    }
}

/// Checks that all grids share ncols, nrows, xll, yll and cellsize.
pub fn assert_aligned(grids: &[&Grid]) -> Result<()> {
    let Some(first) = grids.first() else {
        return Err(Error::Input("no grids to align".into()));
    };
    for (i, g) in grids.iter().enumerate().skip(1) {
        if let Some(field) = first.header.mismatch(&g.header) {
            return Err(Error::Alignment { index: i, field });
        }
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads an ESRI ASCII grid.
///
/// Header keywords are case-insensitive and may appear in any order.
/// `xllcenter`/`yllcenter` are converted to corner coordinates. A missing
/// `NODATA_value` defaults to [`DEFAULT_NODATA`].
pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<Grid> {
    let path = path.as_ref();
    let text = io::read_to_string(path)?;
    parse_ascii_grid(&text, path)
}

/// Parses ASCII grid text; `path` is only used in error messages.
pub fn parse_ascii_grid(text: &str, path: &Path) -> Result<Grid> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut x_center = false;
    let mut y_center = false;
    let mut cellsize = None;
    let mut nodata = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(idx, line)) = lines.peek() {
        let mut toks = line.split_whitespace();
        let Some(key) = toks.next() else {
            lines.next();
            continue;
        };
        let key_lc = key.to_ascii_lowercase();
        let is_header = matches!(
            key_lc.as_str(),
            "ncols"
                | "nrows"
                | "xllcorner"
                | "yllcorner"
                | "xllcenter"
                | "yllcenter"
                | "cellsize"
                | "nodata_value"
        );
        if !is_header {
            break;
        }
        lines.next();
        let lineno = idx + 1;
        let raw = toks
            .next()
            .ok_or_else(|| parse_err(path, lineno, format!("missing value for {key}")))?;
        if toks.next().is_some() {
            return Err(parse_err(path, lineno, format!("trailing tokens after {key}")));
        }
        let real = || {
            raw.parse::<f64>()
                .map_err(|_| parse_err(path, lineno, format!("invalid number `{raw}` for {key}")))
        };
        let count = || {
            raw.parse::<usize>().map_err(|_| {
                parse_err(path, lineno, format!("invalid count `{raw}` for {key}"))
            })
        };
        match key_lc.as_str() {
            "ncols" => ncols = Some(count()?),
            "nrows" => nrows = Some(count()?),
            "xllcorner" => xll = Some(real()?),
            "yllcorner" => yll = Some(real()?),
            "xllcenter" => {
                xll = Some(real()?);
                x_center = true;
            }
            "yllcenter" => {
                yll = Some(real()?);
                y_center = true;
            }
            "cellsize" => cellsize = Some(real()?),
            _ => nodata = Some(real()?),
        }
    }

    let body_line = lines.peek().map(|(i, _)| i + 1).unwrap_or(1);
    let missing = |name: &str| parse_err(path, body_line, format!("header is missing {name}"));
    let ncols: usize = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows: usize = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize: f64 = cellsize.ok_or_else(|| missing("cellsize"))?;
    let mut xll: f64 = xll.ok_or_else(|| missing("xllcorner"))?;
    let mut yll: f64 = yll.ok_or_else(|| missing("yllcorner"))?;
    if x_center {
        xll -= cellsize / 2.0;
    }
    if y_center {
        yll -= cellsize / 2.0;
    }
    let header = GridHeader {
        ncols,
        nrows,
        xll,
        yll,
        cellsize,
        nodata: nodata.unwrap_or(DEFAULT_NODATA),
    };
    header
        .validate()
        .map_err(|e| parse_err(path, body_line, e.to_string()))?;

    let mut values = Vec::with_capacity(header.len());
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| parse_err(path, idx + 1, format!("invalid cell value `{tok}`")))?;
            values.push(v);
        }
    }
    if values.len() != header.len() {
        return Err(Error::Dimension(format!(
            "{}: header declares {}x{} = {} cells but body holds {}",
            path.display(),
            nrows,
            ncols,
            header.len(),
            values.len()
        )));
    }
    Grid::new(header, values)
}

/// Serializes a grid in ESRI ASCII grid format using the shortest decimal
/// representation that round-trips every value.
pub fn format_ascii_grid(grid: &Grid) -> String {
    let h = grid.header();
    let mut out = String::with_capacity(grid.values.len() * 8 + 128);
    // Writing into a String cannot fail.
    let _ = writeln!(out, "ncols {}", h.ncols);
    let _ = writeln!(out, "nrows {}", h.nrows);
    let _ = writeln!(out, "xllcorner {}", h.xll);
    let _ = writeln!(out, "yllcorner {}", h.yll);
    let _ = writeln!(out, "cellsize {}", h.cellsize);
    let _ = writeln!(out, "NODATA_value {}", h.nodata);
    for row in grid.values.chunks(h.ncols) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Writes a grid atomically (temporary file, then rename).
pub fn write_ascii_grid(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    io::atomic_write(path.as_ref(), format_ascii_grid(grid).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(ncols: usize, nrows: usize) -> GridHeader {
        GridHeader::new(ncols, nrows, 0.0, 0.0, 10.0).unwrap()
    }

    fn parse(text: &str) -> Result<Grid> {
        parse_ascii_grid(text, Path::new("test.asc"))
    }

    #[test]
    fn reads_two_by_two() {
        let g = parse(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2\n3 4\n",
        )
        .unwrap();
        assert_eq!(g.ncols(), 2);
        assert_eq!(g.nrows(), 2);
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 4.0]);
        // top-left cell is the first value
        assert_eq!(g.get(0, 0), Some(1.0));
        assert_eq!(g.get(1, 0), Some(3.0));
    }

    #[test]
    fn short_body_is_dimension_error() {
        let err = parse(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n1 2\n3\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }

    #[test]
    fn malformed_header_names_line() {
        let err = parse("ncols 2\nnrows two\nxllcorner 0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn center_keywords_convert_to_corner() {
        let g = parse(
            "NCOLS 1\nNROWS 1\nXLLCENTER 5\nYLLCENTER 15\nCELLSIZE 10\nnodata_value -1\n7\n",
        )
        .unwrap();
        assert_eq!(g.header().xll, 0.0);
        assert_eq!(g.header().yll, 10.0);
        assert_eq!(g.nodata(), -1.0);
    }

    #[test]
    fn single_zero_cell_body() {
        let g = Grid::filled(header(1, 1), 0.0).unwrap();
        let text = format_ascii_grid(&g);
        assert_eq!(text.lines().last(), Some("0"));
    }

    #[test]
    fn nodata_written_verbatim() {
        let h = header(2, 1).with_nodata(-9999.0);
        let g = Grid::new(h, vec![1.5, -9999.0]).unwrap();
        let text = format_ascii_grid(&g);
        assert_eq!(text.lines().last(), Some("1.5 -9999"));
        let back = parse(&text).unwrap();
        assert_eq!(back.get(0, 1), None);
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_non_finite_cells() {
        assert!(Grid::new(header(1, 1), vec![f64::NAN]).is_err());
        assert!(Grid::new(header(1, 1), vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn aligned_checks() {
        let a = Grid::filled(header(3, 2), 1.0).unwrap();
        let b = Grid::filled(header(3, 2), 2.0).unwrap();
        assert!(assert_aligned(&[&a]).is_ok());
        assert!(assert_aligned(&[&a, &b]).is_ok());
        let c = Grid::filled(GridHeader::new(3, 2, 0.0, 0.0, 10.5).unwrap(), 0.0).unwrap();
        match assert_aligned(&[&a, &b, &c]).unwrap_err() {
            Error::Alignment { index, field } => {
                assert_eq!(index, 2);
                assert_eq!(field, "cellsize");
            }
            other => panic!("unexpected {other}"),
        }
        let shifted = Grid::filled(GridHeader::new(3, 2, 1e-10, 0.0, 10.0).unwrap(), 0.0).unwrap();
        assert!(assert_aligned(&[&a, &shifted]).is_ok());
    }

    #[test]
    fn focal_window_center_and_corner() {
        let g = Grid::new(header(3, 3), (1..=9).map(f64::from).collect()).unwrap();
        let w = g.focal_window(1, 1).unwrap();
        let flat: Vec<f64> = w.iter().flatten().map(|v| v.unwrap()).collect();
        assert_eq!(flat, g.values());

        let w = g.focal_window(0, 0).unwrap();
        assert_eq!(w.iter().flatten().filter(|v| v.is_none()).count(), 5);
        assert_eq!(w[1][1], Some(1.0));
        assert_eq!(w[2][2], Some(5.0));

        let c = Grid::filled(header(5, 4), 3.25).unwrap();
        let w = c.focal_window(2, 2).unwrap();
        assert!(w.iter().flatten().all(|v| *v == Some(3.25)));

        assert!(matches!(g.focal_window(3, 0), Err(Error::Index { .. })));
    }

    #[test]
    fn cell_centers_follow_top_row_first() {
        let h = GridHeader::new(2, 3, 100.0, 200.0, 10.0).unwrap();
        assert_eq!(h.cell_center(0, 0), (105.0, 225.0));
        assert_eq!(h.cell_center(2, 1), (115.0, 205.0));
    }
}
