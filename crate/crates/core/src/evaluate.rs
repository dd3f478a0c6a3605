//! Sample assembly, seeded partitioning and validation metrics.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geoprocess::classify_threshold;
use crate::io;
use crate::raster::{assert_aligned, Grid};

/// Default cutoff for turning continuous potential into presence/absence.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Default train/test/validation fractions.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

/// Aligned factor values and binary targets for every fully valid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub feature_names: Vec<String>,
    /// `len() × n_features`, row-major.
    pub rows: Vec<f64>,
    pub targets: Vec<f64>,
    /// `(row, col)` of each sample in the source grids.
    pub cell_index: Vec<(usize, usize)>,
}

impl SampleMatrix {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_features();
        &self.rows[i * n..(i + 1) * n]
    }
}

/// Collects every cell valid in all factors and in the target, in row-major
/// cell order. Target values must be 0 or 1.
pub fn build_samples(stack: &[&Grid], names: &[String], target: &Grid) -> Result<SampleMatrix> {
    if stack.is_empty() {
        return Err(Error::Input("no factor grids".into()));
    }
    if names.len() != stack.len() {
        return Err(Error::Input(format!(
            "{} factor names for {} grids",
            names.len(),
            stack.len()
        )));
    }
    let mut all: Vec<&Grid> = stack.to_vec();
    all.push(target);
    assert_aligned(&all)?;

    let ncols = target.ncols();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut cell_index = Vec::new();
    'cells: for i in 0..target.header().len() {
        let t = target.values()[i];
        if target.is_nodata_value(t) {
            continue;
        }
        let start = rows.len();
        for g in stack {
            let v = g.values()[i];
            if g.is_nodata_value(v) {
                rows.truncate(start);
                continue 'cells;
            }
            rows.push(v);
        }
        if t != 0.0 && t != 1.0 {
            return Err(Error::Input(format!(
                "target cell ({}, {}) is {t}, expected 0 or 1",
                i / ncols,
                i % ncols
            )));
        }
        targets.push(t);
        cell_index.push((i / ncols, i % ncols));
    }
    Ok(SampleMatrix {
        feature_names: names.to_vec(),
        rows,
        targets,
        cell_index,
    })
}

/// Disjoint, exhaustive partition of sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub fractions: [f64; 3],
    pub seed: u64,
}

/// Seeded Fisher-Yates shuffle of `0..m`, sliced into train, test and
/// validation parts by rounding `fraction × m`.
pub fn split(m: usize, fractions: [f64; 3], seed: u64) -> Result<Split> {
    if m < 3 {
        return Err(Error::Input(format!("need at least 3 samples to split, got {m}")));
    }
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must be non-negative and sum to 1, got {fractions:?}"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fractions[0] * m as f64).round() as usize).min(m);
    let n_test = ((fractions[1] * m as f64).round() as usize).min(m - n_train);
    let val_idx = idx.split_off(n_train + n_test);
    let test_idx = idx.split_off(n_train);
    Ok(Split {
        train_idx: idx,
        test_idx,
        val_idx,
        fractions,
        seed,
    })
}

fn check_lengths(pred: &[f64], obs: &[f64], min: usize) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::Dimension(format!(
            "prediction has {} values, observation {}",
            pred.len(),
            obs.len()
        )));
    }
    if pred.len() < min {
        return Err(Error::Input(format!("need at least {min} values, got {}", pred.len())));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson_r(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs, 2)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mo = obs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, o) in pred.iter().zip(obs) {
        let (dp, dobs) = (p - mp, o - mo);
        sxy += dp * dobs;
        sxx += dp * dp;
        syy += dobs * dobs;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric(
            "correlation of a constant vector".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs, 1)?;
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Counts agreement over cells valid in both binary maps.
pub fn confusion(pred: &Grid, truth: &Grid) -> Result<ConfusionMatrix> {
    assert_aligned(&[pred, truth])?;
    let mut cm = ConfusionMatrix::default();
    let ncols = pred.ncols();
    for (i, (&p, &t)) in pred.values().iter().zip(truth.values()).enumerate() {
        if pred.is_nodata_value(p) || truth.is_nodata_value(t) {
            continue;
        }
        let cell = (i / ncols, i % ncols);
        let bin = |v: f64, which: &str| -> Result<bool> {
            if v == 1.0 {
                Ok(true)
            } else if v == 0.0 {
                Ok(false)
            } else {
                Err(Error::Input(format!(
                    "{which} cell ({}, {}) holds non-binary value {v}",
                    cell.0, cell.1
                )))
            }
        };
        match (bin(p, "prediction")?, bin(t, "truth")?) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Cohen's kappa for a two-class confusion matrix.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("kappa of an empty confusion matrix".into()));
    }
    let n = total as f64;
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let po = (tp + tn) / n;
    let pe = ((tp + fp) * (tp + fn_) + (fn_ + tn) * (fp + tn)) / (n * n);
    if pe == 1.0 {
        return Err(Error::UndefinedMetric(
            "kappa undefined when expected agreement is 1".into(),
        ));
    }
    Ok((po - pe) / (1.0 - pe))
}

/// 1 where `potential >= threshold`, else 0; nodata passes through.
pub fn binarize(potential: &Grid, threshold: f64) -> Result<Grid> {
    classify_threshold(potential, threshold)
}

/// Flat `key=value` metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub r: f64,
    pub rmse: f64,
    pub kappa: f64,
    pub confusion: ConfusionMatrix,
    pub seed: u64,
    pub threshold: f64,
}

impl MetricsReport {
    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "r={}", self.r);
        let _ = writeln!(s, "rmse={}", self.rmse);
        let _ = writeln!(s, "kappa={}", self.kappa);
        let _ = writeln!(s, "tp={}", self.confusion.tp);
        let _ = writeln!(s, "fp={}", self.confusion.fp);
        let _ = writeln!(s, "fn={}", self.confusion.fn_);
        let _ = writeln!(s, "tn={}", self.confusion.tn);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "threshold={}", self.threshold);
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut get = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            get.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        fn field<T: std::str::FromStr>(
            get: &std::collections::HashMap<String, (usize, String)>,
            key: &str,
            path: &Path,
        ) -> Result<T> {
            let (line, v) = get.get(key).ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: format!("missing key `{key}`"),
            })?;
            v.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: *line,
                msg: format!("invalid value for `{key}`"),
            })
        }
        Ok(MetricsReport {
            r: field(&get, "r", path)?,
            rmse: field(&get, "rmse", path)?,
            kappa: field(&get, "kappa", path)?,
            confusion: ConfusionMatrix {
                tp: field(&get, "tp", path)?,
                fp: field(&get, "fp", path)?,
                fn_: field(&get, "fn", path)?,
                tn: field(&get, "tn", path)?,
            },
            seed: field(&get, "seed", path)?,
            threshold: field(&get, "threshold", path)?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        io::atomic_write(path.as_ref(), self.format().as_bytes())
    }
}

/// Metrics of a continuous potential map against a binary truth map over the
/// cells valid in both.
pub fn evaluate_maps(potential: &Grid, truth: &Grid, threshold: f64, seed: u64) -> Result<MetricsReport> {
    assert_aligned(&[potential, truth])?;
    let (mut pred, mut obs) = (Vec::new(), Vec::new());
    for (&p, &t) in potential.values().iter().zip(truth.values()) {
        if !potential.is_nodata_value(p) && !truth.is_nodata_value(t) {
            pred.push(p);
            obs.push(t);
        }
    }
    let cm = confusion(&binarize(potential, threshold)?, truth)?;
    Ok(MetricsReport {
        r: pearson_r(&pred, &obs)?,
        rmse: rmse(&pred, &obs)?,
        kappa: kappa(&cm)?,
        confusion: cm,
        seed,
        threshold,
    })
}
