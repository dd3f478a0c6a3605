//! Rock-Eval source-rock indices and per-well aggregation.
//!
//! Indices are computed per record and then aggregated (mean and maximum)
//! per well. Averaging the S-values first would give a different answer
//! whenever TOC varies between samples of the same well.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geoprocess::{csv_err, PointSample};

/// One Rock-Eval pyrolysis measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct RockEvalRecord {
    pub well_id: String,
    pub x: f64,
    pub y: f64,
    /// Free hydrocarbons, mg HC/g rock.
    pub s1: f64,
    /// Kerogen-cracked hydrocarbons, mg HC/g rock.
    pub s2: f64,
    /// CO2 released, mg CO2/g rock.
    pub s3: f64,
    /// Total organic carbon, weight %.
    pub toc: f64,
    /// Temperature of the S2 maximum, °C.
    pub tmax: f64,
}

impl RockEvalRecord {
    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.y, self.s1, self.s2, self.s3, self.toc, self.tmax];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("well {}: non-finite field", self.well_id)));
        }
        if self.s1 < 0.0 || self.s2 < 0.0 || self.s3 < 0.0 {
            return Err(Error::Domain(format!(
                "well {}: S1, S2 and S3 must be non-negative",
                self.well_id
            )));
        }
        if self.toc <= 0.0 {
            return Err(Error::Domain(format!(
                "well {}: TOC must be positive, got {}",
                self.well_id, self.toc
            )));
        }
        Ok(())
    }
}

fn require_toc(r: &RockEvalRecord) -> Result<()> {
    if r.toc > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "well {}: TOC must be positive, got {}",
            r.well_id, r.toc
        )))
    }
}

/// OI = S3 / TOC, mg CO2/g TOC.
pub fn oxygen_index(r: &RockEvalRecord) -> Result<f64> {
    require_toc(r)?;
    Ok(r.s3 / r.toc)
}

/// PI = S1 / (S1 + S2). Early oil generation typically shows 0.05 to 0.1.
pub fn production_index(r: &RockEvalRecord) -> Result<f64> {
    let pp = r.s1 + r.s2;
    if pp <= 0.0 {
        return Err(Error::Domain(format!(
            "well {}: production index undefined for S1 + S2 = 0",
            r.well_id
        )));
    }
    Ok(r.s1 / pp)
}

/// PP = S1 + S2, mg HC/g rock.
pub fn production_potential(r: &RockEvalRecord) -> f64 {
    r.s1 + r.s2
}

/// HI = S2 / TOC, mg HC/g TOC.
pub fn hydrogen_index(r: &RockEvalRecord) -> Result<f64> {
    require_toc(r)?;
    Ok(r.s2 / r.toc)
}

/// The six per-well factor families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeochemIndex {
    Oi,
    Pi,
    Pp,
    Hi,
    Tmax,
    Toc,
}

impl GeochemIndex {
    pub const ALL: [GeochemIndex; 6] = [
        GeochemIndex::Oi,
        GeochemIndex::Pi,
        GeochemIndex::Pp,
        GeochemIndex::Hi,
        GeochemIndex::Tmax,
        GeochemIndex::Toc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeochemIndex::Oi => "oi",
            GeochemIndex::Pi => "pi",
            GeochemIndex::Pp => "pp",
            GeochemIndex::Hi => "hi",
            GeochemIndex::Tmax => "tmax",
            GeochemIndex::Toc => "toc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        GeochemIndex::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
    }

    pub fn evaluate(self, r: &RockEvalRecord) -> Result<f64> {
        match self {
            GeochemIndex::Oi => oxygen_index(r),
            GeochemIndex::Pi => production_index(r),
            GeochemIndex::Pp => Ok(production_potential(r)),
            GeochemIndex::Hi => hydrogen_index(r),
            GeochemIndex::Tmax => Ok(r.tmax),
            GeochemIndex::Toc => Ok(r.toc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Mean,
    Max,
}

impl Aggregate {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(Aggregate::Mean),
            "max" => Some(Aggregate::Max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellIndexSummary {
    pub well_id: String,
    pub x: f64,
    pub y: f64,
    /// Indexed in [`GeochemIndex::ALL`] order.
    pub stats: [Stat; 6],
}

impl WellIndexSummary {
    pub fn stat(&self, index: GeochemIndex) -> Stat {
        self.stats[index as usize]
    }

    pub fn value(&self, index: GeochemIndex, agg: Aggregate) -> f64 {
        let s = self.stat(index);
        match agg {
            Aggregate::Mean => s.mean,
            Aggregate::Max => s.max,
        }
    }
}

/// Mean and maximum of each index per well, sorted by well id.
///
/// Values are summed in sorted order so the result does not depend on the
/// order of `records`.
pub fn summarize_wells(records: &[RockEvalRecord]) -> Result<Vec<WellIndexSummary>> {
    let mut wells: BTreeMap<&str, Vec<&RockEvalRecord>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        wells.entry(r.well_id.as_str()).or_default().push(r);
    }
    wells
        .into_iter()
        .map(|(id, recs)| {
            let (x, y) = (recs[0].x, recs[0].y);
            if let Some(bad) = recs
                .iter()
                .find(|r| (r.x - x).abs() > 1e-9 || (r.y - y).abs() > 1e-9)
            {
                return Err(Error::Input(format!(
                    "well {id}: inconsistent coordinates ({x}, {y}) vs ({}, {})",
                    bad.x, bad.y
                )));
            }
            let mut stats = [Stat { mean: 0.0, max: 0.0 }; 6];
            for (slot, idx) in stats.iter_mut().zip(GeochemIndex::ALL) {
                let mut vals = recs
                    .iter()
                    .map(|r| idx.evaluate(r))
                    .collect::<Result<Vec<f64>>>()?;
                vals.sort_by(f64::total_cmp);
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let max = *vals.last().expect("well has records");
                *slot = Stat {
                    mean: mean.min(max),
                    max,
                };
            }
            Ok(WellIndexSummary {
                well_id: id.to_string(),
                x,
                y,
                stats,
            })
        })
        .collect()
}

/// One point sample per well carrying the chosen index statistic.
pub fn well_points(
    summaries: &[WellIndexSummary],
    index: GeochemIndex,
    agg: Aggregate,
) -> Vec<PointSample> {
    summaries
        .iter()
        .map(|s| PointSample::new(s.x, s.y, s.value(index, agg)))
        .collect()
}

pub const ROCK_EVAL_HEADER: [&str; 8] = ["well_id", "x", "y", "S1", "S2", "S3", "TOC", "Tmax"];

/// Reads Rock-Eval records from CSV with header
/// `well_id,x,y,S1,S2,S3,TOC,Tmax`. Records with TOC <= 0 are rejected.
pub fn read_rock_eval_csv(path: impl AsRef<Path>) -> Result<Vec<RockEvalRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ROCK_EVAL_HEADER {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected header `{}`", ROCK_EVAL_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            let s = rec.get(k).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                msg: format!("invalid {} value `{s}`", ROCK_EVAL_HEADER[k]),
            })
        };
        let r = RockEvalRecord {
            well_id: rec.get(0).unwrap_or("").to_string(),
            x: num(1)?,
            y: num(2)?,
            s1: num(3)?,
            s2: num(4)?,
            s3: num(5)?,
            toc: num(6)?,
            tmax: num(7)?,
        };
        r.validate().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line,
            msg: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub fn format_rock_eval_csv(records: &[RockEvalRecord]) -> String {
    let mut out = ROCK_EVAL_HEADER.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.well_id, r.x, r.y, r.s1, r.s2, r.s3, r.toc, r.tmax
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, s1: f64, s2: f64, s3: f64, toc: f64) -> RockEvalRecord {
        RockEvalRecord {
            well_id: id.into(),
            x: 1.0,
            y: 2.0,
            s1,
            s2,
            s3,
            toc,
            tmax: 435.0,
        }
    }

    #[test]
    fn oxygen_index_cases() {
        assert_eq!(oxygen_index(&rec("a", 1.0, 1.0, 0.0, 2.0)).unwrap(), 0.0);
        assert_eq!(oxygen_index(&rec("a", 1.0, 1.0, 1.5, 3.0)).unwrap(), 0.5);
        assert!(matches!(
            oxygen_index(&rec("a", 1.0, 1.0, 1.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn production_index_cases() {
        assert_eq!(production_index(&rec("a", 0.0, 5.0, 0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(production_index(&rec("a", 2.5, 2.5, 0.0, 1.0)).unwrap(), 0.5);
        assert!(production_index(&rec("a", 0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn potential_and_hydrogen() {
        assert_eq!(production_potential(&rec("a", 0.0, 0.0, 0.0, 1.0)), 0.0);
        assert!((production_potential(&rec("a", 0.3, 4.7, 0.0, 1.0)) - 5.0).abs() < 1e-15);
        assert_eq!(hydrogen_index(&rec("a", 0.0, 0.0, 0.0, 1.0)).unwrap(), 0.0);
        // S2 = 3, TOC = 0.5 gives 6 as a plain ratio (600 with TOC read as a percentage).
        assert_eq!(hydrogen_index(&rec("a", 0.0, 3.0, 0.0, 0.5)).unwrap(), 6.0);
        let h1 = hydrogen_index(&rec("a", 0.0, 2.0, 0.0, 0.8)).unwrap();
        let h2 = hydrogen_index(&rec("a", 0.0, 4.0, 0.0, 0.8)).unwrap();
        assert_eq!(h2, 2.0 * h1);
    }

    #[test]
    fn single_record_mean_equals_max() {
        let s = summarize_wells(&[rec("w", 1.0, 3.0, 0.5, 2.0)]).unwrap();
        assert_eq!(s.len(), 1);
        for st in s[0].stats {
            assert_eq!(st.mean, st.max);
        }
    }

    #[test]
    fn pi_mean_and_max() {
        // PI 0.2 and 0.4
        let s = summarize_wells(&[rec("w", 1.0, 4.0, 0.0, 1.0), rec("w", 2.0, 3.0, 0.0, 1.0)])
            .unwrap();
        let pi = s[0].stat(GeochemIndex::Pi);
        assert!((pi.mean - 0.3).abs() < 1e-15);
        assert!((pi.max - 0.4).abs() < 1e-15);
    }

    #[test]
    fn mean_of_index_not_index_of_means() {
        // HI 4/1 = 4 and 4/4 = 1 -> mean 2.5; index of means = 4 / 2.5 = 1.6
        let recs = [rec("w", 0.0, 4.0, 0.0, 1.0), rec("w", 0.0, 4.0, 0.0, 4.0)];
        let s = summarize_wells(&recs).unwrap();
        assert_eq!(s[0].stat(GeochemIndex::Hi).mean, 2.5);
        assert_eq!(s[0].stat(GeochemIndex::Hi).max, 4.0);
    }

    #[test]
    fn inconsistent_coordinates() {
        let mut b = rec("w", 1.0, 1.0, 1.0, 1.0);
        b.x = 5.0;
        let err = summarize_wells(&[rec("w", 1.0, 1.0, 1.0, 1.0), b]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn csv_round_trip_and_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("wells.csv");
        let recs = vec![rec("w1", 0.5, 3.0, 0.7, 1.2), rec("w2", 0.1, 0.4, 0.2, 0.9)];
        std::fs::write(&p, format_rock_eval_csv(&recs)).unwrap();
        assert_eq!(read_rock_eval_csv(&p).unwrap(), recs);

        std::fs::write(&p, "well_id,x,y,S1,S2,S3,TOC,Tmax\nw,0,0,1,1,1,0,430\n").unwrap();
        match read_rock_eval_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
