use crate::error::{Error, Result};
use crate::raster::Grid;

/// Terrain ruggedness: square root of the summed squared differences between
/// a cell and its valid 3x3 neighbours. Nodata centres stay nodata.
pub fn tri(grid: &Grid) -> Result<Grid> {
    Grid::from_fn(*grid.header(), |row, col| {
        let center = grid.get(row, col)?;
        let window = grid.focal_window(row, col).ok()?;
        let mut sum = 0.0;
        for (i, r) in window.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                if i == 1 && j == 1 {
                    continue;
                }
                if let Some(v) = v {
                    let d = v - center;
                    sum += d * d;
                }
            }
        }
        Some(sum.sqrt())
    })
}

/// Negative 4-neighbour Laplacian, `-(z_xx + z_yy)`.
///
/// Positive on convex-up surfaces. Border cells and cells with nodata in the
/// 4-neighbourhood are nodata. For depth grids negate the input first so
/// anticlines come out positive.
pub fn curvature(grid: &Grid) -> Result<Grid> {
    let (nrows, ncols) = (grid.nrows(), grid.ncols());
    if nrows < 3 || ncols < 3 {
        return Err(Error::Dimension(format!(
            "curvature needs at least 3x3 cells, got {nrows}x{ncols}"
        )));
    }
    let h2 = grid.cellsize() * grid.cellsize();
    Grid::from_fn(*grid.header(), |row, col| {
        if row == 0 || col == 0 || row + 1 == nrows || col + 1 == ncols {
            return None;
        }
        let c = grid.get(row, col)?;
        let n = grid.get(row - 1, col)?;
        let s = grid.get(row + 1, col)?;
        let w = grid.get(row, col - 1)?;
        let e = grid.get(row, col + 1)?;
        let zxx = (e - 2.0 * c + w) / h2;
        let zyy = (n - 2.0 * c + s) / h2;
        Some(-(zxx + zyy))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridHeader;

    fn grid(ncols: usize, nrows: usize, cs: f64, f: impl Fn(f64, f64) -> f64) -> Grid {
        let h = GridHeader::new(ncols, nrows, 0.0, 0.0, cs).unwrap();
        Grid::from_fn(h, |r, c| {
            let (x, y) = h.cell_center(r, c);
            Some(f(x, y))
        })
        .unwrap()
    }

    #[test]
    fn tri_constant_is_zero() {
        let g = grid(6, 5, 1.0, |_, _| 12.5);
        assert!(tri(&g).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tri_center_spike() {
        let h = GridHeader::new(3, 3, 0.0, 0.0, 1.0).unwrap();
        let mut v = vec![1.0; 9];
        v[4] = 0.0;
        let t = tri(&Grid::new(h, v).unwrap()).unwrap();
        assert_eq!(t.get(1, 1), Some(8f64.sqrt()));
        assert!((t.get(1, 1).unwrap() - 2.8284271).abs() < 1e-7);
    }

    #[test]
    fn tri_skips_nodata() {
        let h = GridHeader::new(3, 1, 0.0, 0.0, 1.0).unwrap();
        let g = Grid::new(h, vec![-9999.0, 2.0, 5.0]).unwrap();
        let t = tri(&g).unwrap();
        assert_eq!(t.get(0, 0), None);
        assert_eq!(t.get(0, 1), Some(3.0));
    }

    #[test]
    fn curvature_plane_and_quadratics() {
        let plane = curvature(&grid(7, 6, 1.0, |x, y| 2.0 * x + 3.0 * y)).unwrap();
        for (_, _, v) in plane.valid_cells() {
            assert!(v.abs() < 1e-9);
        }
        let parab = curvature(&grid(7, 6, 1.0, |x, _| x * x)).unwrap();
        assert_eq!(parab.valid_cells().count(), 5 * 4);
        for (_, _, v) in parab.valid_cells() {
            assert_eq!(v, -2.0);
        }
        let dome = curvature(&grid(7, 7, 1.0, |x, y| -(x * x + y * y))).unwrap();
        for (_, _, v) in dome.valid_cells() {
            assert_eq!(v, 4.0);
        }
        assert_eq!(dome.get(0, 3), None);
    }

    #[test]
    fn curvature_too_small() {
        let g = grid(2, 5, 1.0, |x, _| x);
        assert!(matches!(curvature(&g), Err(Error::Dimension(_))));
    }
}
