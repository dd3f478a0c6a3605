use super::{FeatureSet, Geometry};
use crate::error::{Error, Result};
use crate::raster::{Grid, GridHeader};

/// Euclidean distance from `(px, py)` to the segment `a`–`b`.
pub fn point_segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    (px - qx).hypot(py - qy)
}

/// Distance from every cell centre to the nearest feature geometry.
///
/// Exact brute force over all points and polyline segments.
pub fn distance_transform(features: &FeatureSet, header: &GridHeader) -> Result<Grid> {
    if features.geometries.is_empty() {
        return Err(Error::Input("distance transform needs at least one geometry".into()));
    }
    Grid::from_fn(*header, |row, col| {
        let (cx, cy) = header.cell_center(row, col);
        let mut best = f64::INFINITY;
        for g in &features.geometries {
            let d = match g {
                Geometry::Point(x, y) => (cx - x).hypot(cy - y),
                Geometry::Line(v) => v
                    .windows(2)
                    .map(|s| point_segment_distance(cx, cy, s[0], s[1]))
                    .fold(f64::INFINITY, f64::min),
            };
            best = best.min(d);
        }
        Some(best)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geoprocess::FeatureKind;

    #[test]
    fn three_four_five() {
        let h = GridHeader::new(10, 10, 0.0, 0.0, 1.0).unwrap();
        let (x, y) = h.cell_center(2, 1);
        let f = FeatureSet::new(FeatureKind::ClosureCenters, vec![Geometry::Point(x, y)]).unwrap();
        let g = distance_transform(&f, &h).unwrap();
        assert_eq!(g.get(2, 1), Some(0.0));
        assert!((g.get(6, 4).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn on_line_is_zero() {
        let h = GridHeader::new(5, 5, 0.0, 0.0, 2.0).unwrap();
        let f = FeatureSet::new(
            FeatureKind::FaultLines,
            vec![Geometry::Line(vec![(0.0, 5.0), (10.0, 5.0)])],
        )
        .unwrap();
        let g = distance_transform(&f, &h).unwrap();
        // row 2 centres sit at y = 5
        for col in 0..5 {
            assert_eq!(g.get(2, col), Some(0.0));
            assert_eq!(g.get(0, col), Some(4.0));
        }
    }

    #[test]
    fn degenerate_segment() {
        assert_eq!(point_segment_distance(3.0, 4.0, (0.0, 0.0), (0.0, 0.0)), 5.0);
        assert_eq!(point_segment_distance(5.0, 1.0, (0.0, 0.0), (2.0, 0.0)), 10f64.sqrt());
    }

    #[test]
    fn empty_is_error() {
        let h = GridHeader::new(2, 2, 0.0, 0.0, 1.0).unwrap();
        let f = FeatureSet::new(FeatureKind::FaultLines, vec![]).unwrap();
        assert!(distance_transform(&f, &h).is_err());
    }
}
