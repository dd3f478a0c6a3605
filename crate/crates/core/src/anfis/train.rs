use super::{mse, AnfisModel, Dataset, SIGMA_FLOOR};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mlp::{EpochRecord, StopReason};

/// Ridge added to the consequent normal equations.
pub const LSE_RIDGE: f64 = 1e-8;

/// Pivot ratio below which the consequent problem is reported rank deficient.
const RANK_TOL: f64 = 1e-13;

/// Refinement passes after the damped solve.
const REFINE_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LseReport {
    /// The unregularized normal matrix was singular or nearly so.
    pub rank_deficient: bool,
    /// Ridge actually used (escalated only if the solve failed).
    pub ridge: f64,
}

fn design_matrix(model: &AnfisModel, data: &Dataset) -> Vec<f64> {
    let (n, r) = (model.n_inputs(), model.n_rules());
    let width = r * (n + 1);
    let mut a = vec![0.0; data.len() * width];
    let mut wbar = vec![0.0; r];
    for (i, x) in data.rows().enumerate() {
        model.normalized_weights(x, &mut wbar);
        let row = &mut a[i * width..(i + 1) * width];
        for (rule, w) in wbar.iter().enumerate() {
            let block = &mut row[rule * (n + 1)..(rule + 1) * (n + 1)];
            for (b, xd) in block.iter_mut().zip(x) {
                *b = w * xd;
            }
            block[n] = *w;
        }
    }
    a
}

/// Least-squares consequents for fixed premises.
///
/// Row `i` of the design matrix holds `[w̄_r x_i, w̄_r]` for every rule `r`,
/// so the model output is `A θ`. The normal equations are factored with a
/// ridge of [`LSE_RIDGE`] (raised tenfold only if factorization fails), and
/// the damped solution is then refined against the undamped equations.
pub fn lse_consequents(model: &AnfisModel, data: &Dataset) -> Result<(Vec<f64>, LseReport)> {
    if data.n_features() != model.n_inputs() {
        return Err(Error::Dimension(format!(
            "dataset has {} features, model expects {}",
            data.n_features(),
            model.n_inputs()
        )));
    }
    let width = model.n_rules() * (model.n_inputs() + 1);
    if data.is_empty() {
        return Ok((
            vec![0.0; width],
            LseReport {
                rank_deficient: true,
                ridge: LSE_RIDGE,
            },
        ));
    }
    let a = design_matrix(model, data);
    let ata = linalg::gram(&a, data.len(), width);
    let atb = linalg::at_b(&a, data.len(), width, data.targets());
    drop(a);

    let rank_deficient = linalg::spd_pivot_ratio(&ata, width)
        .map(|ratio| ratio < RANK_TOL)
        .unwrap_or(true);
    let mut ridge = LSE_RIDGE;
    let solver = loop {
        let mut damped = ata.clone();
        for i in 0..width {
            damped[i * width + i] += ridge;
        }
        if let Some(s) = linalg::SpdSolver::new(&damped, width) {
            break s;
        }
        if ridge >= 1.0 {
            return Err(Error::Numerical(
                "consequent normal equations could not be solved".into(),
            ));
        }
        ridge *= 10.0;
    };
    let unsolved = || Error::Numerical("consequent normal equations could not be solved".into());
    let mut theta = solver.solve(&atb).ok_or_else(unsolved)?;
    // Iterated refinement against the undamped equations removes most of the
    // ridge bias in well-determined directions; null directions stay at zero.
    for _ in 0..REFINE_STEPS {
        let resid: Vec<f64> = (0..width)
            .map(|i| {
                let row = &ata[i * width..(i + 1) * width];
                atb[i] - row.iter().zip(&theta).map(|(a, t)| a * t).sum::<f64>()
            })
            .collect();
        let delta = solver.solve(&resid).ok_or_else(unsolved)?;
        theta.iter_mut().zip(&delta).for_each(|(t, d)| *t += d);
    }
    Ok((
        theta,
        LseReport {
            rank_deficient,
            ridge,
        },
    ))
}

/// Gradient of the training MSE with respect to the premise parameters, in
/// [`AnfisModel::premise_params`] order.
pub fn premise_gradient(model: &AnfisModel, data: &Dataset) -> Result<Vec<f64>> {
    let (n, r) = (model.n_inputs(), model.n_rules());
    if data.n_features() != n {
        return Err(Error::Dimension(format!(
            "dataset has {} features, model expects {n}",
            data.n_features()
        )));
    }
    let mut grad = vec![0.0; 2 * n * r];
    if data.is_empty() {
        return Ok(grad);
    }
    let mut wbar = vec![0.0; r];
    let mut f = vec![0.0; r];
    let scale = 2.0 / data.len() as f64;
    for (x, t) in data.rows().zip(data.targets()) {
        model.normalized_weights(x, &mut wbar);
        for (rule, fr) in f.iter_mut().enumerate() {
            *fr = model.rule_output(rule, x);
        }
        let out: f64 = wbar.iter().zip(&f).map(|(w, fr)| w * fr).sum();
        let err = scale * (out - t);
        for rule in 0..r {
            // ∂F/∂log w_r
            let g = err * wbar[rule] * (f[rule] - out);
            if g == 0.0 {
                continue;
            }
            for (d, mf) in model.rule_premise(rule).iter().enumerate() {
                let diff = x[d] - mf.center;
                let s2 = mf.sigma * mf.sigma;
                let k = 2 * (rule * n + d);
                grad[k] += g * diff / s2;
                grad[k + 1] += g * diff * diff / (s2 * mf.sigma);
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    pub epochs: usize,
    /// Premise gradient step.
    pub learning_rate: f64,
    /// Target training MSE.
    pub error_goal: f64,
    /// Step multiplier applied when the epoch error rises.
    pub rate_decay: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            epochs: 300,
            learning_rate: 0.01,
            error_goal: 0.005,
            rate_decay: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutcome {
    /// Model with the lowest test error seen (train error when no test set).
    pub model: AnfisModel,
    /// Entry 0 is the state after the initial least-squares pass.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop: StopReason,
    /// Epochs whose consequent problem was rank deficient.
    pub rank_deficient_epochs: Vec<usize>,
}

/// Hybrid learning: least squares for the consequents alternating with a
/// gradient-descent step on the Gaussian premises.
///
/// The initial least-squares pass counts as epoch 0. Each further epoch
/// moves the premises by `−η ∇MSE`, then re-solves the consequents.
pub fn train_hybrid(
    model: &AnfisModel,
    train: &Dataset,
    test: &Dataset,
    cfg: &HybridConfig,
) -> Result<HybridOutcome> {
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    if !(cfg.error_goal > 0.0) {
        return Err(Error::Config(format!(
            "error goal must be positive, got {}",
            cfg.error_goal
        )));
    }
    if train.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    let has_test = !test.is_empty();
    let mut m = model.clone();
    let mut eta = cfg.learning_rate;
    let mut rank_deficient_epochs = Vec::new();

    let mut evaluate = |m: &mut AnfisModel, epoch: usize| -> Result<EpochRecord> {
        let (theta, report) = lse_consequents(m, train)?;
        if report.rank_deficient {
            rank_deficient_epochs.push(epoch);
        }
        m.set_consequent(theta)?;
        let rec = EpochRecord {
            epoch,
            train_mse: mse(m, train)?,
            test_mse: mse(m, test)?,
        };
        if !rec.train_mse.is_finite() || !rec.test_mse.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: non-finite ANFIS error")));
        }
        Ok(rec)
    };

    let first = evaluate(&mut m, 0)?;
    let score = |r: &EpochRecord| if has_test { r.test_mse } else { r.train_mse };
    let mut best = (score(&first), 0usize, m.clone());
    let mut history = vec![first];
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=cfg.epochs {
        let prev = *history.last().expect("non-empty");
        if prev.train_mse <= cfg.error_goal {
            stop = StopReason::ErrorGoal;
            break;
        }
        let grad = premise_gradient(&m, train)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training(format!("epoch {epoch}: non-finite premise gradient")));
        }
        for (mf, g) in m.premise_mut().iter_mut().zip(grad.chunks_exact(2)) {
            mf.center -= eta * g[0];
            mf.sigma = (mf.sigma - eta * g[1]).max(SIGMA_FLOOR);
        }
        let rec = evaluate(&mut m, epoch)?;
        if rec.train_mse > prev.train_mse {
            eta *= cfg.rate_decay;
        }
        if score(&rec) < best.0 {
            best = (score(&rec), epoch, m.clone());
        }
        history.push(rec);
    }
    if stop == StopReason::MaxEpochs
        && history.last().is_some_and(|r| r.train_mse <= cfg.error_goal)
    {
        stop = StopReason::ErrorGoal;
    }

    Ok(HybridOutcome {
        model: best.2,
        history,
        best_epoch: best.1,
        stop,
        rank_deficient_epochs,
    })
}
