//! First-order Sugeno ANFIS with Gaussian premises.
//!
//! The five layers are evaluated as: Gaussian memberships per rule and
//! input, product firing strength per rule, normalization of firing
//! strengths, rule consequent `p·x + r` weighted by the normalized strength,
//! and the sum of the weighted consequents.
//!
//! Firing strengths are products of up to hundreds of Gaussians and underflow
//! easily, so the normalization is carried out on log firing strengths.

mod cluster;
mod train;

pub use cluster::{init_from_clusters, subtractive_cluster, ClusterConfig, SIGMA_FLOOR};
pub use train::{
    lse_consequents, premise_gradient, train_hybrid, HybridConfig, HybridOutcome, LseReport,
    LSE_RIDGE,
};

use crate::error::{Error, Result};

/// `μ(x) = exp(−(x − c)² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMf {
    pub center: f64,
    pub sigma: f64,
}

impl GaussianMf {
    pub fn new(center: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite() && center.is_finite()) {
            return Err(Error::Input(format!(
                "invalid Gaussian membership (c={center}, sigma={sigma})"
            )));
        }
        Ok(GaussianMf { center, sigma })
    }

    #[inline]
    pub fn log_membership(&self, x: f64) -> f64 {
        let d = x - self.center;
        -d * d / (2.0 * self.sigma * self.sigma)
    }

    pub fn membership(&self, x: f64) -> f64 {
        self.log_membership(x).exp()
    }
}

/// Rule base of a first-order Sugeno system.
#[derive(Debug, Clone, PartialEq)]
pub struct AnfisModel {
    n_inputs: usize,
    n_rules: usize,
    /// `n_rules × n_inputs`, rule-major.
    premise: Vec<GaussianMf>,
    /// `n_rules × (n_inputs + 1)`: input coefficients followed by intercept.
    consequent: Vec<f64>,
}

/// All intermediate layer outputs for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct AnfisForward {
    /// Layer 1, `n_rules × n_inputs`.
    pub memberships: Vec<f64>,
    /// Layer 2, product of memberships per rule (may underflow to 0).
    pub firing: Vec<f64>,
    /// Layer 3, normalized firing strengths; sums to 1.
    pub normalized: Vec<f64>,
    /// Rule consequents `f_r = p_r·x + r_r`.
    pub rule_outputs: Vec<f64>,
    /// Layer 4, `w̄_r f_r`.
    pub weighted: Vec<f64>,
    /// Layer 5.
    pub output: f64,
}

impl AnfisModel {
    pub fn new(
        n_inputs: usize,
        premise: Vec<GaussianMf>,
        consequent: Vec<f64>,
    ) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::Dimension("ANFIS needs at least one input".into()));
        }
        if premise.is_empty() || premise.len() % n_inputs != 0 {
            return Err(Error::Dimension(format!(
                "premise count {} is not a positive multiple of {n_inputs} inputs",
                premise.len()
            )));
        }
        let n_rules = premise.len() / n_inputs;
        if consequent.len() != n_rules * (n_inputs + 1) {
            return Err(Error::Dimension(format!(
                "expected {} consequent coefficients, got {}",
                n_rules * (n_inputs + 1),
                consequent.len()
            )));
        }
        for mf in &premise {
            GaussianMf::new(mf.center, mf.sigma)?;
        }
        if consequent.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite consequent coefficient".into()));
        }
        Ok(AnfisModel {
            n_inputs,
            n_rules,
            premise,
            consequent,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    pub fn premise(&self) -> &[GaussianMf] {
        &self.premise
    }

    pub fn rule_premise(&self, rule: usize) -> &[GaussianMf] {
        &self.premise[rule * self.n_inputs..(rule + 1) * self.n_inputs]
    }

    pub fn consequent(&self) -> &[f64] {
        &self.consequent
    }

    pub fn rule_consequent(&self, rule: usize) -> &[f64] {
        let w = self.n_inputs + 1;
        &self.consequent[rule * w..(rule + 1) * w]
    }

    pub fn set_consequent(&mut self, consequent: Vec<f64>) -> Result<()> {
        if consequent.len() != self.consequent.len() {
            return Err(Error::Dimension(format!(
                "expected {} consequent coefficients, got {}",
                self.consequent.len(),
                consequent.len()
            )));
        }
        self.consequent = consequent;
        Ok(())
    }

    /// Premise parameters flattened as `[c, σ]` per rule and input.
    pub fn premise_params(&self) -> Vec<f64> {
        self.premise
            .iter()
            .flat_map(|mf| [mf.center, mf.sigma])
            .collect()
    }

    pub fn set_premise_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != 2 * self.premise.len() {
            return Err(Error::Dimension(format!(
                "expected {} premise parameters, got {}",
                2 * self.premise.len(),
                params.len()
            )));
        }
        for (mf, p) in self.premise.iter_mut().zip(params.chunks_exact(2)) {
            *mf = GaussianMf::new(p[0], p[1])?;
        }
        Ok(())
    }

    pub(crate) fn premise_mut(&mut self) -> &mut [GaussianMf] {
        &mut self.premise
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs {
            return Err(Error::Dimension(format!(
                "model expects {} inputs, got {}",
                self.n_inputs,
                x.len()
            )));
        }
        Ok(())
    }

    /// Log firing strength of every rule.
    pub(crate) fn log_firing(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = self
                .rule_premise(r)
                .iter()
                .zip(x)
                .map(|(mf, &xd)| mf.log_membership(xd))
                .sum();
        }
    }

    /// Normalized firing strengths written to `out`, via log-sum-exp.
    pub(crate) fn normalized_weights(&self, x: &[f64], out: &mut [f64]) {
        self.log_firing(x, out);
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }

    #[inline]
    pub(crate) fn rule_output(&self, rule: usize, x: &[f64]) -> f64 {
        let c = self.rule_consequent(rule);
        c[..self.n_inputs]
            .iter()
            .zip(x)
            .map(|(p, xd)| p * xd)
            .sum::<f64>()
            + c[self.n_inputs]
    }

    /// Full layer-by-layer evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<AnfisForward> {
        self.check_input(x)?;
        let memberships: Vec<f64> = (0..self.n_rules)
            .flat_map(|r| {
                self.rule_premise(r)
                    .iter()
                    .zip(x)
                    .map(|(mf, &xd)| mf.membership(xd))
            })
            .collect();
        let mut log_w = vec![0.0; self.n_rules];
        self.log_firing(x, &mut log_w);
        let firing = log_w.iter().map(|l| l.exp()).collect();
        let mut normalized = vec![0.0; self.n_rules];
        self.normalized_weights(x, &mut normalized);
        let rule_outputs: Vec<f64> = (0..self.n_rules).map(|r| self.rule_output(r, x)).collect();
        let weighted: Vec<f64> = normalized
            .iter()
            .zip(&rule_outputs)
            .map(|(w, f)| w * f)
            .collect();
        let output = weighted.iter().sum();
        Ok(AnfisForward {
            memberships,
            firing,
            normalized,
            rule_outputs,
            weighted,
            output,
        })
    }

    /// Output only, reusing `buf` (length `n_rules`) for the weights.
    pub(crate) fn output_with(&self, x: &[f64], buf: &mut [f64]) -> f64 {
        self.normalized_weights(x, buf);
        buf.iter()
            .enumerate()
            .map(|(r, w)| w * self.rule_output(r, x))
            .sum()
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut buf = vec![0.0; self.n_rules];
        Ok(self.output_with(x, &mut buf))
    }
}

/// Row-major feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    n_features: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(n_features: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n_features == 0 || x.len() != n_features * y.len() {
            return Err(Error::Dimension(format!(
                "{} values do not form {} rows of {n_features} features",
                x.len(),
                y.len()
            )));
        }
        Ok(Dataset { n_features, x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Dataset::new(n, rows.concat(), y)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.x
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }
}

/// Mean squared error of the model over a dataset; 0 when empty.
pub fn mse(model: &AnfisModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    if data.n_features() != model.n_inputs() {
        return Err(Error::Dimension(format!(
            "dataset has {} features, model expects {}",
            data.n_features(),
            model.n_inputs()
        )));
    }
    let mut buf = vec![0.0; model.n_rules()];
    let sse: f64 = data
        .rows()
        .zip(data.targets())
        .map(|(x, t)| {
            let e = model.output_with(x, &mut buf) - t;
            e * e
        })
        .sum();
    Ok(sse / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mf(c: f64, s: f64) -> GaussianMf {
        GaussianMf::new(c, s).unwrap()
    }

    #[test]
    fn identical_premises_average_consequents() {
        let m = AnfisModel::new(
            2,
            vec![mf(0.2, 0.3), mf(0.5, 0.1), mf(0.2, 0.3), mf(0.5, 0.1)],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 3.0],
        )
        .unwrap();
        let f = m.forward(&[0.7, -0.1]).unwrap();
        assert_eq!(f.normalized, vec![0.5, 0.5]);
        assert_eq!(f.output, 2.0);
    }

    #[test]
    fn single_rule_is_its_consequent() {
        let m = AnfisModel::new(2, vec![mf(0.0, 1.0), mf(1.0, 2.0)], vec![2.0, -1.0, 0.5]).unwrap();
        let f = m.forward(&[3.0, 4.0]).unwrap();
        assert_eq!(f.normalized, vec![1.0]);
        assert_eq!(f.output, 2.0 * 3.0 - 4.0 + 0.5);
    }

    #[test]
    fn far_inputs_stay_finite() {
        let m = AnfisModel::new(
            1,
            vec![mf(0.0, 1e-3), mf(1.0, 1e-3)],
            vec![0.0, 1.0, 0.0, 5.0],
        )
        .unwrap();
        let f = m.forward(&[100.0]).unwrap();
        assert!(f.firing.iter().all(|w| *w == 0.0));
        assert_eq!(f.normalized, vec![0.0, 1.0]);
        assert_eq!(f.output, 5.0);
    }

    #[test]
    fn shape_errors() {
        assert!(AnfisModel::new(2, vec![mf(0.0, 1.0)], vec![0.0; 3]).is_err());
        assert!(AnfisModel::new(1, vec![mf(0.0, 1.0)], vec![0.0; 3]).is_err());
        assert!(GaussianMf::new(0.0, 0.0).is_err());
        let m = AnfisModel::new(1, vec![mf(0.0, 1.0)], vec![0.0; 2]).unwrap();
        assert!(m.forward(&[1.0, 2.0]).is_err());
    }
}
