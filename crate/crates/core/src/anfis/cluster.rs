use super::{AnfisModel, Dataset, GaussianMf};
use crate::error::{Error, Result};

/// Lower bound on premise widths.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Subtractive clustering parameters, in normalized input space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterConfig {
    pub radius: f64,
    pub squash: f64,
    pub accept_ratio: f64,
    pub reject_ratio: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            radius: 0.5,
            squash: 1.25,
            accept_ratio: 0.5,
            reject_ratio: 0.15,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.radius <= 1.0
            && self.squash > 1.0
            && self.reject_ratio > 0.0
            && self.reject_ratio < self.accept_ratio
            && self.accept_ratio <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid cluster config: need 0 < radius <= 1, squash > 1, \
                 0 < reject < accept <= 1; got {self:?}"
            )))
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Subtractive clustering of the rows of `data`.
///
/// Every point starts with potential `Σ_j exp(−4‖x_i − x_j‖² / r_a²)`. The
/// highest-potential point becomes a centre and the potential around it is
/// reduced with radius `squash · r_a`. Candidates above `accept_ratio` of the
/// first centre's potential are accepted, those below `reject_ratio` end the
/// search, and those in between are accepted only if they are far enough
/// from the existing centres relative to their potential.
pub fn subtractive_cluster(data: &Dataset, cfg: &ClusterConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Input("subtractive clustering needs at least one row".into()));
    }
    let n = data.len();
    let alpha = 4.0 / (cfg.radius * cfg.radius);
    let rb = cfg.squash * cfg.radius;
    let beta = 4.0 / (rb * rb);

    let mut potential = vec![0.0; n];
    for i in 0..n {
        let xi = data.row(i);
        potential[i] += 1.0;
        for j in i + 1..n {
            let p = (-alpha * sq_dist(xi, data.row(j))).exp();
            potential[i] += p;
            potential[j] += p;
        }
    }

    let argmax = |p: &[f64]| {
        p.iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
    };

    let (first_idx, first_pot) = argmax(&potential);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut candidate = (first_idx, first_pot);
    loop {
        let (k, pk) = candidate;
        if !(pk > 0.0) {
            break;
        }
        let accept = if centers.is_empty() || pk > cfg.accept_ratio * first_pot {
            true
        } else if pk < cfg.reject_ratio * first_pot {
            break;
        } else {
            let d_min = centers
                .iter()
                .map(|c| sq_dist(c, data.row(k)).sqrt())
                .fold(f64::INFINITY, f64::min);
            d_min / cfg.radius + pk / first_pot >= 1.0
        };
        if accept {
            let center = data.row(k).to_vec();
            for (i, p) in potential.iter_mut().enumerate() {
                *p -= pk * (-beta * sq_dist(&center, data.row(i))).exp();
                if *p < 0.0 {
                    *p = 0.0;
                }
            }
            centers.push(center);
        } else {
            potential[k] = 0.0;
        }
        candidate = argmax(&potential);
    }
    Ok(centers)
}

/// One rule per centre with Gaussian widths `r_a · (max_d − min_d) / √8`
/// and zero consequents.
pub fn init_from_clusters(
    centers: &[Vec<f64>],
    data: &Dataset,
    cfg: &ClusterConfig,
) -> Result<AnfisModel> {
    if centers.is_empty() {
        return Err(Error::Input("at least one cluster centre is required".into()));
    }
    let n = data.n_features();
    if centers.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension(format!(
            "cluster centres must have {n} coordinates"
        )));
    }
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in data.rows() {
        for d in 0..n {
            lo[d] = lo[d].min(row[d]);
            hi[d] = hi[d].max(row[d]);
        }
    }
    let sigmas: Vec<f64> = (0..n)
        .map(|d| {
            let range = if hi[d] >= lo[d] { hi[d] - lo[d] } else { 0.0 };
            (cfg.radius * range / 8f64.sqrt()).max(SIGMA_FLOOR)
        })
        .collect();
    let premise = centers
        .iter()
        .flat_map(|c| {
            c.iter()
                .zip(&sigmas)
                .map(|(&center, &sigma)| GaussianMf { center, sigma })
        })
        .collect();
    AnfisModel::new(n, premise, vec![0.0; centers.len() * (n + 1)])
}
