use std::path::Path;

use crate::error::Result;
use crate::io;
use crate::raster::Grid;

/// Encodes a grid as a binary 8-bit PGM, scaling `[min, max]` of the valid
/// cells onto `[0, 255]`. Nodata cells are 0; a constant grid renders as 255.
pub fn encode_pgm(grid: &Grid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.ncols(), grid.nrows()).into_bytes();
    let range = grid.value_range();
    out.extend(grid.values().iter().map(|&v| {
        if grid.is_nodata_value(v) {
            return 0u8;
        }
        match range {
            Some((lo, hi)) if hi > lo => ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8,
            _ => 255,
        }
    }));
    out
}

pub fn render_map(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    io::atomic_write(path.as_ref(), &encode_pgm(grid))
}
