//! Synthetic basin with planted oil fields, for end-to-end testing.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geochem::{self, RockEvalRecord};
use crate::geoprocess::{self, FeatureKind, FeatureSet, Geometry, PointSample};
use crate::io;
use crate::raster::{self, Grid, GridHeader};

/// Smallest grid dimension the generator accepts.
pub const MIN_SYNTH_SIZE: usize = 100;

const N_WELLS: usize = 80;
const N_GRAVITY: usize = 250;

#[derive(Debug, Clone, Copy)]
struct Field {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    theta: f64,
}

impl Field {
    /// Normalized elliptical radius; the field is `rho <= 1`.
    fn rho(&self, x: f64, y: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    fn axis(&self) -> Vec<(f64, f64)> {
        let (s, c) = self.theta.sin_cos();
        let h = 1.6 * self.a;
        vec![
            (self.cx - h * c, self.cy - h * s),
            (self.cx + h * c, self.cy + h * s),
        ]
    }
}

/// What the generator planted.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub n_fields: usize,
    /// Fraction of cells inside a field.
    pub coverage: f64,
    pub config_path: PathBuf,
    pub files: Vec<PathBuf>,
}

fn plant_fields(rng: &mut ChaCha8Rng, header: &GridHeader) -> Vec<Field> {
    let (x0, y0, x1, y1) = header.extent();
    let size = (x1 - x0).min(y1 - y0);
    let n = rng.gen_range(3..=6);
    let mut fields: Vec<Field> = Vec::with_capacity(n);
    let mut attempts = 0;
    while fields.len() < n && attempts < 10_000 {
        attempts += 1;
        let a = rng.gen_range(0.07..0.11) * size;
        let b = a * rng.gen_range(0.65..0.9);
        let margin = 1.3 * a;
        let f = Field {
            cx: rng.gen_range(x0 + margin..x1 - margin),
            cy: rng.gen_range(y0 + margin..y1 - margin),
            a,
            b,
            theta: rng.gen_range(0.0..PI),
        };
        let clear = fields.iter().all(|g| {
            let d = ((f.cx - g.cx).powi(2) + (f.cy - g.cy).powi(2)).sqrt();
            d > 1.6 * (f.a + g.a)
        });
        if clear {
            fields.push(f);
        }
    }
    fields
}

fn nearest_rho(fields: &[Field], x: f64, y: f64) -> f64 {
    fields
        .iter()
        .map(|f| f.rho(x, y))
        .fold(f64::INFINITY, f64::min)
}

fn halo(fields: &[Field], x: f64, y: f64, width: f64) -> f64 {
    let r = nearest_rho(fields, x, y);
    (-r * r / (2.0 * width * width)).exp()
}

fn uniform_point(rng: &mut ChaCha8Rng, header: &GridHeader) -> (f64, f64) {
    let (x0, y0, x1, y1) = header.extent();
    (rng.gen_range(x0..x1), rng.gen_range(y0..y1))
}

fn point_in_field(rng: &mut ChaCha8Rng, f: &Field, max_rho: f64) -> (f64, f64) {
    loop {
        let u = rng.gen_range(-1.0..1.0);
        let v = rng.gen_range(-1.0..1.0);
        if u * u + v * v <= 1.0 {
            let (s, c) = f.theta.sin_cos();
            let (u, v) = (u * f.a * max_rho, v * f.b * max_rho);
            return (f.cx + u * c - v * s, f.cy + u * s + v * c);
        }
    }
}

fn structure_grid(rng: &mut ChaCha8Rng, header: &GridHeader, fields: &[Field]) -> Result<Grid> {
    let (x0, y0, x1, y1) = header.extent();
    let size = (x1 - x0).max(y1 - y0);
    let tilt = (rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let wavelength = rng.gen_range(size / 3.0..size);
            let dir = rng.gen_range(0.0..PI);
            let k = 2.0 * PI / wavelength;
            (k * dir.cos(), k * dir.sin(), rng.gen_range(0.0..2.0 * PI), 20.0)
        })
        .collect();
    let amps: Vec<f64> = fields.iter().map(|_| rng.gen_range(250.0..400.0)).collect();
    Grid::from_fn(*header, |r, c| {
        let (x, y) = header.cell_center(r, c);
        let mut depth = 2500.0 + tilt.0 * (x - x0) + tilt.1 * (y - y0);
        for &(kx, ky, phase, amp) in &waves {
            depth += amp * (kx * x + ky * y + phase).sin();
        }
        for (f, amp) in fields.iter().zip(&amps) {
            let rho = f.rho(x, y);
            depth -= amp * (-rho * rho).exp();
        }
        Some(depth)
    })
}

fn fault_lines(rng: &mut ChaCha8Rng, header: &GridHeader) -> Result<FeatureSet> {
    let (x0, y0, x1, y1) = header.extent();
    let size = (x1 - x0).min(y1 - y0);
    let n = rng.gen_range(4..=8);
    let lines = (0..n)
        .map(|_| {
            let mut p = uniform_point(rng, header);
            let mut dir = rng.gen_range(0.0..2.0 * PI);
            let n_vertices = rng.gen_range(2..=4);
            let seg = rng.gen_range(0.1..0.2) * size;
            let mut pts = vec![p];
            for _ in 1..n_vertices {
                dir += rng.gen_range(-0.4..0.4);
                p = (
                    (p.0 + seg * dir.cos()).clamp(x0, x1),
                    (p.1 + seg * dir.sin()).clamp(y0, y1),
                );
                pts.push(p);
            }
            Geometry::Line(pts)
        })
        .collect();
    FeatureSet::new(FeatureKind::FaultLines, lines)
}

fn gravity_points(rng: &mut ChaCha8Rng, header: &GridHeader, fields: &[Field]) -> Vec<PointSample> {
    let (x0, y0, x1, y1) = header.extent();
    let size = (x1 - x0).max(y1 - y0);
    let grad = (rng.gen_range(-3.0..3.0) / size, rng.gen_range(-3.0..3.0) / size);
    let highs: Vec<f64> = fields.iter().map(|_| rng.gen_range(4.0..6.0)).collect();
    (0..N_GRAVITY)
        .map(|_| {
            let (x, y) = uniform_point(rng, header);
            let mut g = grad.0 * (x - x0) + grad.1 * (y - y0);
            for (f, h) in fields.iter().zip(&highs) {
                let rho = f.rho(x, y);
                g += h * (-rho * rho / (2.0 * 1.2 * 1.2)).exp();
            }
            g += rng.gen_range(-0.3..0.3);
            PointSample::new(x, y, g)
        })
        .collect()
}

fn rock_eval(rng: &mut ChaCha8Rng, header: &GridHeader, fields: &[Field]) -> Vec<RockEvalRecord> {
    let n_inside = N_WELLS / 3;
    let mut records = Vec::new();
    for w in 0..N_WELLS {
        let (x, y) = if w < n_inside {
            let f = &fields[w % fields.len()];
            point_in_field(rng, f, 0.95)
        } else {
            loop {
                let p = uniform_point(rng, header);
                if nearest_rho(fields, p.0, p.1) > 1.0 {
                    break p;
                }
            }
        };
        let q = halo(fields, x, y, 1.5);
        for _ in 0..rng.gen_range(1..=3) {
            let toc = 1.0 + 2.5 * q + rng.gen_range(-0.2..0.2);
            let hi = 1.5 + 4.0 * q + rng.gen_range(-0.3..0.3);
            let pi = 0.05 + 0.1 * q + rng.gen_range(-0.01..0.01);
            let oi = 0.8 - 0.5 * q + rng.gen_range(-0.05..0.05);
            let s2 = hi * toc;
            records.push(RockEvalRecord {
                well_id: format!("W{:03}", w + 1),
                x,
                y,
                s1: pi * s2 / (1.0 - pi),
                s2,
                s3: oi * toc,
                toc,
                tmax: 425.0 + 15.0 * q + rng.gen_range(-2.0..2.0),
            });
        }
    }
    records
}

/// The default 17-factor configuration over the generated files.
fn synth_config(anticline_mid: f64, curvature_mid: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Synthetic basin; every path is relative to this file.");
    let _ = writeln!(s, "target = truth.asc");
    let _ = writeln!(s, "output_dir = out");
    let _ = writeln!(s, "split_seed = 42");
    let _ = writeln!(s, "split_fractions = 0.70 0.15 0.15");
    let _ = writeln!(s, "threshold = 0.5");
    for index in ["toc", "pp", "tmax", "pi", "oi", "hi"] {
        for stat_key in ["mean", "max"] {
            let shape = if index == "oi" {
                "linear_decreasing"
            } else {
                "linear_increasing"
            };
            let _ = writeln!(s, "\n[factor {index}_{stat_key}]");
            let _ = writeln!(s, "kind = wells");
            let _ = writeln!(s, "source = wells.csv");
            let _ = writeln!(s, "index = {index}");
            let _ = writeln!(s, "stat = {stat_key}");
            let _ = writeln!(s, "chain = idw 2 all | fuzzy {shape} auto");
        }
    }
    let _ = write!(
        s,
        "
[factor gravity]
kind = points
source = bouguer.csv
chain = kriging auto | fuzzy linear_increasing auto

[factor anticline_proximity]
kind = features
feature_kind = anticline_axes
source = anticlines.txt
chain = distance | fuzzy small {anticline_mid} 5

[factor fault_proximity]
kind = features
feature_kind = fault_lines
source = faults.txt
chain = distance | fuzzy linear_decreasing auto

[factor topography]
kind = grid
source = structure.asc
chain = tri | fuzzy linear_increasing auto

[factor curvature]
kind = grid
source = structure.asc
chain = negate | curvature | fuzzy large {curvature_mid} 2

[model mlp]
type = mlp
layers = 17 10 5 1
algorithm = levenberg_marquardt
error_goal = 0.005
max_epochs = 60
seed = 1

[model mlp_shallow]
type = mlp
layers = 17 15 1
algorithm = levenberg_marquardt
error_goal = 0.005
max_epochs = 60
seed = 1

[model anfis]
type = anfis
radius = 0.5
epochs = 300
"
    );
    s
}

/// Writes a synthetic basin into `dir`: `truth.asc`, `structure.asc`,
/// `faults.txt`, `anticlines.txt`, `wells.csv`, `bouguer.csv` and a ready
/// `synth.cfg`. The same seed and header always give the same bytes.
pub fn generate_synthetic_basin(seed: u64, header: &GridHeader, dir: &Path) -> Result<SynthSummary> {
    header.validate()?;
    if header.ncols < MIN_SYNTH_SIZE || header.nrows < MIN_SYNTH_SIZE {
        return Err(Error::Input(format!(
            "synthetic basin needs at least {MIN_SYNTH_SIZE}x{MIN_SYNTH_SIZE} cells, got {}x{}",
            header.ncols, header.nrows
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (fields, truth) = loop {
        let fields = plant_fields(&mut rng, header);
        let truth = Grid::from_fn(*header, |r, c| {
            let (x, y) = header.cell_center(r, c);
            Some(if nearest_rho(&fields, x, y) <= 1.0 { 1.0 } else { 0.0 })
        })?;
        let coverage = truth.values().iter().sum::<f64>() / header.len() as f64;
        if fields.len() >= 3 && (0.02..=0.20).contains(&coverage) {
            break (fields, truth);
        }
    };
    let coverage = truth.values().iter().sum::<f64>() / header.len() as f64;

    let structure = structure_grid(&mut rng, header, &fields)?;
    let faults = fault_lines(&mut rng, header)?;
    let anticlines = FeatureSet::new(
        FeatureKind::AnticlineAxes,
        fields.iter().map(|f| Geometry::Line(f.axis())).collect(),
    )?;
    let gravity = gravity_points(&mut rng, header, &fields);
    let wells = rock_eval(&mut rng, header, &fields);

    let anticline_mid = fields.iter().map(|f| f.b).sum::<f64>() / fields.len() as f64;
    let curv = geoprocess::curvature(&geoprocess::negate(&structure)?)?;
    let peak = curv.value_range().map(|(_, hi)| hi).unwrap_or(1.0);
    let curvature_mid = if peak > 0.0 { 0.1 * peak } else { 1e-6 };

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        io::atomic_write(&path, text.as_bytes())?;
        files.push(path);
        Ok(())
    };
    put("truth.asc", raster::format_ascii_grid(&truth))?;
    put("structure.asc", raster::format_ascii_grid(&structure))?;
    put("faults.txt", geoprocess::format_features(&faults))?;
    put("anticlines.txt", geoprocess::format_features(&anticlines))?;
    put("wells.csv", geochem::format_rock_eval_csv(&wells))?;
    put("bouguer.csv", geoprocess::format_points_csv(&gravity))?;
    put("synth.cfg", synth_config(anticline_mid, curvature_mid))?;

    Ok(SynthSummary {
        n_fields: fields.len(),
        coverage,
        config_path: dir.join("synth.cfg"),
        files,
    })
}
