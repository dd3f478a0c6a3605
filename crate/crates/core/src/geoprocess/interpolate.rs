use super::PointSample;
use crate::error::{Error, Result};
use crate::linalg::LuSolver;
use crate::raster::{Grid, GridHeader};

/// Distance (map units) below which a cell centre is treated as lying on a
/// sample.
pub const COINCIDENT_TOL: f64 = 1e-12;

/// How many samples contribute to each IDW estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbors {
    All,
    Nearest(usize),
}

/// Inverse-distance-weighted interpolation onto the cell centres of `header`.
pub fn idw_interpolate(
    samples: &[PointSample],
    header: &GridHeader,
    power: f64,
    neighbors: Neighbors,
) -> Result<Grid> {
    if samples.is_empty() {
        return Err(Error::Input("IDW needs at least one sample".into()));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Input(format!("IDW power must be positive, got {power}")));
    }
    let k = match neighbors {
        Neighbors::All => samples.len(),
        Neighbors::Nearest(0) => {
            return Err(Error::Input("IDW neighbor count must be positive".into()))
        }
        Neighbors::Nearest(k) => k.min(samples.len()),
    };

    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
    Grid::from_fn(*header, |row, col| {
        let (cx, cy) = header.cell_center(row, col);
        dist.clear();
        dist.extend(
            samples
                .iter()
                .enumerate()
                .map(|(i, s)| ((s.x - cx).hypot(s.y - cy), i)),
        );
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
        }
        // Deterministic summation order independent of the selection.
        dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if dist[0].0 < COINCIDENT_TOL {
            return Some(samples[dist[0].1].value);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(d, i) in dist.iter() {
            let w = d.powf(-power);
            num += w * samples[i].value;
            den += w;
        }
        Some(num / den)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariogramModel {
    Spherical,
    /// Uses the practical range: 95% of the partial sill is reached at `range`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variogram {
    pub model: VariogramModel,
    pub nugget: f64,
    pub sill: f64,
    pub range: f64,
}

impl Variogram {
    /// Spherical model, zero nugget, sill equal to the sample variance and
    /// range equal to half the diagonal of the grid extent.
    pub fn default_for(samples: &[PointSample], header: &GridHeader) -> Variogram {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().map(|s| s.value).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.value - mean).powi(2)).sum::<f64>() / n;
        let (x0, y0, x1, y1) = header.extent();
        Variogram {
            model: VariogramModel::Spherical,
            nugget: 0.0,
            sill: if var > 0.0 { var } else { 1.0 },
            range: 0.5 * (x1 - x0).hypot(y1 - y0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.nugget >= 0.0
            && self.sill > self.nugget
            && self.range > 0.0
            && self.sill.is_finite()
            && self.range.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "invalid variogram: need sill > nugget >= 0 and range > 0, got {self:?}"
            )))
        }
    }

    /// Semivariance at lag `h`; zero at `h == 0`.
    pub fn gamma(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let partial = self.sill - self.nugget;
        let shape = match self.model {
            VariogramModel::Spherical => {
                if h >= self.range {
                    1.0
                } else {
                    let r = h / self.range;
                    1.5 * r - 0.5 * r * r * r
                }
            }
            VariogramModel::Exponential => 1.0 - (-3.0 * h / self.range).exp(),
        };
        self.nugget + partial * shape
    }
}

/// Ordinary kriging with a Lagrange multiplier enforcing unit weight sum.
pub fn kriging_interpolate(
    samples: &[PointSample],
    header: &GridHeader,
    variogram: &Variogram,
) -> Result<Grid> {
    variogram.validate()?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::Input("kriging needs at least two samples".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&samples[i], &samples[j]);
            if (a.x - b.x).hypot(a.y - b.y) < COINCIDENT_TOL {
                return Err(Error::Numerical(format!(
                    "singular kriging matrix: samples {i} and {j} share location ({}, {})",
                    a.x, a.y
                )));
            }
        }
    }

    let m = n + 1;
    let mut k = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&samples[i], &samples[j]);
            k[i * m + j] = variogram.gamma((a.x - b.x).hypot(a.y - b.y));
        }
        k[i * m + n] = 1.0;
        k[n * m + i] = 1.0;
    }
    let lu = LuSolver::new(&k, m)
        .ok_or_else(|| Error::Numerical("singular kriging matrix".into()))?;

    let mut rhs = vec![0.0; m];
    let mut failed = false;
    let grid = Grid::from_fn(*header, |row, col| {
        let (cx, cy) = header.cell_center(row, col);
        for (r, s) in rhs.iter_mut().zip(samples) {
            let d = (s.x - cx).hypot(s.y - cy);
            if d < COINCIDENT_TOL && variogram.nugget == 0.0 {
                return Some(s.value);
            }
            *r = variogram.gamma(d);
        }
        rhs[n] = 1.0;
        match lu.solve(&rhs) {
            Some(lambda) => Some(lambda[..n].iter().zip(samples).map(|(l, s)| l * s.value).sum()),
            None => {
                failed = true;
                None
            }
        }
    })?;
    if failed {
        return Err(Error::Numerical("kriging solve failed".into()));
    }
    Ok(grid)
}
