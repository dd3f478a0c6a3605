//! Factor-map construction: interpolation of point data, distance
//! rasterization of vector features, terrain derivatives and fuzzy
//! membership normalization.

mod distance;
mod fuzzy;
mod interpolate;
mod terrain;

use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

pub use distance::{distance_transform, point_segment_distance};
pub use fuzzy::{
    classify_threshold, equal_interval_bins, fuzzy_normalize, negate, FuzzyParams, FuzzyShape,
    DEFAULT_SPREAD,
};
pub use interpolate::{
    idw_interpolate, kriging_interpolate, Neighbors, Variogram, VariogramModel, COINCIDENT_TOL,
};
pub use terrain::{curvature, tri};

/// A measured value at a map location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl PointSample {
    pub fn new(x: f64, y: f64, value: f64) -> Self {
        PointSample { x, y, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    FaultLines,
    AnticlineAxes,
    ClosureCenters,
    AnomalyCenters,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(f64, f64),
    /// At least two vertices.
    Line(Vec<(f64, f64)>),
}

/// Vector geometries of one feature family.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    pub geometries: Vec<Geometry>,
}

impl FeatureSet {
    pub fn new(kind: FeatureKind, geometries: Vec<Geometry>) -> Result<Self> {
        for (i, g) in geometries.iter().enumerate() {
            let ok = match g {
                Geometry::Point(x, y) => x.is_finite() && y.is_finite(),
                Geometry::Line(v) => {
                    if v.len() < 2 {
                        return Err(Error::Input(format!(
                            "geometry {i}: polyline needs at least 2 vertices"
                        )));
                    }
                    v.iter().all(|(x, y)| x.is_finite() && y.is_finite())
                }
            };
            if !ok {
                return Err(Error::Input(format!("geometry {i}: non-finite vertex")));
            }
        }
        Ok(FeatureSet { kind, geometries })
    }
}

/// Parses the plain-text geometry format: one `POINT x y` or
/// `LINE x1 y1 x2 y2 ...` per line. Blank lines and `#` comments are ignored.
pub fn parse_features(text: &str, kind: FeatureKind, path: &Path) -> Result<FeatureSet> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut geometries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let tag = toks.next().unwrap_or_default().to_ascii_uppercase();
        let nums = toks
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| perr(idx + 1, format!("invalid coordinate `{t}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let geom = match tag.as_str() {
            "POINT" if nums.len() == 2 => Geometry::Point(nums[0], nums[1]),
            "POINT" => return Err(perr(idx + 1, "POINT takes exactly 2 coordinates".into())),
            "LINE" if nums.len() >= 4 && nums.len() % 2 == 0 => {
                Geometry::Line(nums.chunks_exact(2).map(|c| (c[0], c[1])).collect())
            }
            "LINE" => {
                return Err(perr(
                    idx + 1,
                    "LINE takes an even number (>= 4) of coordinates".into(),
                ))
            }
            other => return Err(perr(idx + 1, format!("unknown geometry tag `{other}`"))),
        };
        geometries.push(geom);
    }
    FeatureSet::new(kind, geometries).map_err(|e| perr(0, e.to_string()))
}

pub fn read_features(path: impl AsRef<Path>, kind: FeatureKind) -> Result<FeatureSet> {
    let path = path.as_ref();
    parse_features(&io::read_to_string(path)?, kind, path)
}

pub fn format_features(set: &FeatureSet) -> String {
    let mut out = String::new();
    for g in &set.geometries {
        match g {
            Geometry::Point(x, y) => out.push_str(&format!("POINT {x} {y}\n")),
            Geometry::Line(v) => {
                out.push_str("LINE");
                for (x, y) in v {
                    out.push_str(&format!(" {x} {y}"));
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Reads point samples from a CSV file with header `x,y,value`.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<PointSample>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["x", "y", "value"] {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected header `x,y,value`, found `{}`", cols.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = |k: usize| -> Result<f64> {
            let s = rec.get(k).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    msg: format!("invalid number `{s}`"),
                })
        };
        out.push(PointSample::new(field(0)?, field(1)?, field(2)?));
    }
    Ok(out)
}

pub fn format_points_csv(points: &[PointSample]) -> String {
    let mut out = String::from("x,y,value\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.x, p.y, p.value));
    }
    out
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.display().to_string(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_geometry_file() {
        let text = "# faults\nLINE 0 0 10 0 10 5\n\nPOINT 3 4\n";
        let set = parse_features(text, FeatureKind::FaultLines, Path::new("f.txt")).unwrap();
        assert_eq!(set.geometries.len(), 2);
        assert_eq!(
            set.geometries[0],
            Geometry::Line(vec![(0.0, 0.0), (10.0, 0.0), (10.0, 5.0)])
        );
        let back =
            parse_features(&format_features(&set), FeatureKind::FaultLines, Path::new("f")).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn rejects_bad_geometry() {
        let p = Path::new("g.txt");
        assert!(parse_features("LINE 0 0", FeatureKind::FaultLines, p).is_err());
        assert!(parse_features("LINE 0 0 1", FeatureKind::FaultLines, p).is_err());
        assert!(parse_features("POLY 0 0", FeatureKind::FaultLines, p).is_err());
        match parse_features("POINT 1 2\nPOINT a b", FeatureKind::ClosureCenters, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reads_points_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pts.csv");
        let pts = vec![PointSample::new(1.0, 2.0, 3.5), PointSample::new(-1.0, 0.25, 0.0)];
        std::fs::write(&p, format_points_csv(&pts)).unwrap();
        assert_eq!(read_points_csv(&p).unwrap(), pts);

        std::fs::write(&p, "a,b,c\n1,2,3\n").unwrap();
        assert!(matches!(read_points_csv(&p), Err(Error::Parse { .. })));
    }
}
