//! Multilayer perceptron with sigmoid hidden layers and a linear output
//! layer, trained by online backpropagation or Levenberg-Marquardt.
//!
//! Parameters are flattened layer by layer, each layer contributing its
//! weight matrix (row-major, one row per unit) followed by its biases. The
//! same order is used by [`MlpWeights::params`], the gradient buffers and
//! the Levenberg-Marquardt Jacobian columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Damping above which Levenberg-Marquardt gives up.
pub const LM_LAMBDA_MAX: f64 = 1e10;
const LM_LAMBDA_MIN: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sigmoid" => Some(Activation::Sigmoid),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, u: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-u).exp()),
            Activation::Linear => u,
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

/// Layer sizes, input first and output last, with one or two hidden layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    layer_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if !(3..=4).contains(&layer_sizes.len()) {
            return Err(Error::Config(format!(
                "MLP needs 1 or 2 hidden layers, got layer sizes {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive: {layer_sizes:?}"
            )));
        }
        Ok(Topology { layer_sizes })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }
}

/// One fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub activation: Activation,
    /// `n_out × n_in`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn n_params(&self) -> usize {
        self.n_out * (self.n_in + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    layers: Vec<Layer>,
}

/// Activations of every layer for one input; `activations[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least one layer")
    }
}

/// An input vector and its target output.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl Pattern {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Self {
        Pattern { input, target }
    }
}

impl MlpWeights {
    /// Uniform random initialization in [-0.5, 0.5].
    pub fn init(topology: &Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = topology.layer_sizes();
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (n_in, n_out) = (w[0], w[1]);
                let activation = if i + 2 == sizes.len() {
                    Activation::Linear
                } else {
                    Activation::Sigmoid
                };
                let weights = (0..n_in * n_out).map(|_| rng.gen_range(-0.5..=0.5)).collect();
                let bias = (0..n_out).map(|_| rng.gen_range(-0.5..=0.5)).collect();
                Layer {
                    n_in,
                    n_out,
                    activation,
                    weights,
                    bias,
                }
            })
            .collect();
        MlpWeights { layers }
    }

    /// Builds a network from explicit layers, checking shape consistency.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Dimension("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.n_in == 0 || l.n_out == 0 {
                return Err(Error::Dimension(format!("layer {i} has an empty side")));
            }
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(Error::Dimension(format!(
                    "layer {i}: expected {}x{} weights and {} biases",
                    l.n_out, l.n_in, l.n_out
                )));
            }
            if i > 0 && layers[i - 1].n_out != l.n_in {
                return Err(Error::Dimension(format!(
                    "layer {i} expects {} inputs but previous layer has {} units",
                    l.n_in,
                    layers[i - 1].n_out
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(MlpWeights { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in)
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().expect("non-empty").n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            l.bias.copy_from_slice(&params[off..off + l.n_out]);
            off += l.n_out;
        }
        Ok(())
    }

    /// `params += scale * step`.
    fn add_scaled(&mut self, step: &[f64], scale: f64) {
        let mut it = step.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w += scale * it.next().expect("step length checked by caller");
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.n_inputs(),
                x.len()
            )));
        }
        Ok(())
    }

    fn check_pattern(&self, p: &Pattern) -> Result<()> {
        self.check_input(&p.input)?;
        if p.target.len() != self.n_outputs() {
            return Err(Error::Dimension(format!(
                "network has {} outputs, pattern target has {}",
                self.n_outputs(),
                p.target.len()
            )));
        }
        Ok(())
    }

    fn forward_unchecked(&self, x: &[f64]) -> ForwardPass {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for l in &self.layers {
            let prev = activations.last().expect("input pushed");
            let next: Vec<f64> = l
                .weights
                .chunks_exact(l.n_in)
                .zip(&l.bias)
                .map(|(row, b)| {
                    let u = row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>() + b;
                    l.activation.apply(u)
                })
                .collect();
            activations.push(next);
        }
        ForwardPass { activations }
    }

    /// Forward pass keeping every layer's activations.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    /// Network output for one input.
    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.activations.pop().expect("non-empty"))
    }

    /// Back-propagates `d_out = ∂L/∂output` and writes `∂L/∂params` into
    /// `grad` (flattened parameter order).
    fn backward(&self, pass: &ForwardPass, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.layers.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }

        let last = &self.layers[n_layers - 1];
        let mut delta: Vec<f64> = d_out
            .iter()
            .zip(&pass.activations[n_layers])
            .map(|(g, a)| g * last.activation.derivative_from_output(*a))
            .collect();

        for li in (0..n_layers).rev() {
            let l = &self.layers[li];
            let input = &pass.activations[li];
            let g = &mut grad[offsets[li]..offsets[li] + l.n_params()];
            let (gw, gb) = g.split_at_mut(l.n_in * l.n_out);
            for (j, d) in delta.iter().enumerate() {
                for (gwi, a) in gw[j * l.n_in..(j + 1) * l.n_in].iter_mut().zip(input) {
                    *gwi = d * a;
                }
                gb[j] = *d;
            }
            if li == 0 {
                break;
            }
            let below = &self.layers[li - 1];
            let mut next = vec![0.0; l.n_in];
            for (j, d) in delta.iter().enumerate() {
                for (n, w) in next.iter_mut().zip(&l.weights[j * l.n_in..(j + 1) * l.n_in]) {
                    *n += w * d;
                }
            }
            for (n, a) in next.iter_mut().zip(input) {
                *n *= below.activation.derivative_from_output(*a);
            }
            delta = next;
        }
    }

    /// Gradient of `½ Σ_k (t_k − o_k)²` for one pattern.
    pub fn pattern_gradient(&self, p: &Pattern) -> Result<Vec<f64>> {
        self.check_pattern(p)?;
        let pass = self.forward_unchecked(&p.input);
        let d_out: Vec<f64> = pass.output().iter().zip(&p.target).map(|(o, t)| o - t).collect();
        let mut grad = vec![0.0; self.n_params()];
        self.backward(&pass, &d_out, &mut grad);
        Ok(grad)
    }

    /// Gradient of `½ Σ_p Σ_k (t_pk − o_pk)²`.
    pub fn loss_gradient(&self, patterns: &[Pattern]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.n_params()];
        for p in patterns {
            for (t, g) in total.iter_mut().zip(self.pattern_gradient(p)?) {
                *t += g;
            }
        }
        Ok(total)
    }

    /// `½ Σ_p Σ_k (t_pk − o_pk)²`.
    pub fn half_sse(&self, patterns: &[Pattern]) -> Result<f64> {
        let mut sum = 0.0;
        for p in patterns {
            self.check_pattern(p)?;
            let o = self.forward_unchecked(&p.input);
            sum += o
                .output()
                .iter()
                .zip(&p.target)
                .map(|(o, t)| (t - o) * (t - o))
                .sum::<f64>();
        }
        Ok(0.5 * sum)
    }

    /// Mean squared error over all outputs of all patterns; 0 when empty.
    pub fn mse(&self, patterns: &[Pattern]) -> Result<f64> {
        if patterns.is_empty() {
            return Ok(0.0);
        }
        let n = (patterns.len() * self.n_outputs()) as f64;
        Ok(2.0 * self.half_sse(patterns)? / n)
    }
}

/// One sequential pass of the delta rule over `patterns`.
///
/// Output deltas are `t − o` (linear output), hidden deltas are
/// `o(1 − o) Σ δ_k w_jk`, and each weight moves by `η δ_j o_i` right after
/// its pattern. The returned MSE accumulates each pattern's error before its
/// own update.
pub fn backprop_epoch(
    weights: &MlpWeights,
    patterns: &[Pattern],
    eta: f64,
) -> Result<(MlpWeights, f64)> {
    if !(eta >= 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!("learning rate must lie in [0, 1], got {eta}")));
    }
    let mut w = weights.clone();
    let mut grad = vec![0.0; w.n_params()];
    let mut sse = 0.0;
    for p in patterns {
        w.check_pattern(p)?;
        let pass = w.forward_unchecked(&p.input);
        let d_out: Vec<f64> = pass.output().iter().zip(&p.target).map(|(o, t)| o - t).collect();
        sse += d_out.iter().map(|d| d * d).sum::<f64>();
        w.backward(&pass, &d_out, &mut grad);
        w.add_scaled(&grad, -eta);
    }
    let n = (patterns.len() * w.n_outputs()).max(1) as f64;
    Ok((w, sse / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Backprop,
    LevenbergMarquardt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Backprop only, in (0, 1].
    pub learning_rate: f64,
    pub lm_lambda0: f64,
    pub lm_lambda_factor: f64,
    pub max_epochs: usize,
    /// Target training MSE.
    pub error_goal: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::LevenbergMarquardt,
            learning_rate: 0.1,
            lm_lambda0: 1e-3,
            lm_lambda_factor: 10.0,
            max_epochs: 100,
            error_goal: 0.005,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.algorithm == Algorithm::Backprop
            && !(self.learning_rate > 0.0 && self.learning_rate <= 1.0)
        {
            return bad(format!("learning rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if !(self.lm_lambda0 > 0.0) {
            return bad(format!("lm_lambda0 must be positive, got {}", self.lm_lambda0));
        }
        if !(self.lm_lambda_factor > 1.0) {
            return bad(format!(
                "lm_lambda_factor must exceed 1, got {}",
                self.lm_lambda_factor
            ));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if !(self.error_goal > 0.0) {
            return bad(format!("error_goal must be positive, got {}", self.error_goal));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ErrorGoal,
    MaxEpochs,
    LambdaOverflow,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::ErrorGoal => "error_goal",
            StopReason::MaxEpochs => "max_epochs",
            StopReason::LambdaOverflow => "lambda_overflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights with the lowest test error seen (train error when no test set).
    pub weights: MlpWeights,
    /// Entry 0 is the state before the first update.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop: StopReason,
}

struct BestTracker {
    score: f64,
    epoch: usize,
    weights: MlpWeights,
}

impl BestTracker {
    fn offer(&mut self, rec: &EpochRecord, has_test: bool, w: &MlpWeights) {
        let score = if has_test { rec.test_mse } else { rec.train_mse };
        if score < self.score {
            self.score = score;
            self.epoch = rec.epoch;
            self.weights = w.clone();
        }
    }
}

/// Residuals `o − t` and their Jacobian `∂o/∂w`, one row per pattern output.
fn jacobian(w: &MlpWeights, patterns: &[Pattern]) -> (Vec<f64>, Vec<f64>) {
    let (m, np) = (w.n_outputs(), w.n_params());
    let mut jac = vec![0.0; patterns.len() * m * np];
    let mut res = Vec::with_capacity(patterns.len() * m);
    let mut unit = vec![0.0; m];
    for (pi, p) in patterns.iter().enumerate() {
        let pass = w.forward_unchecked(&p.input);
        for (k, (o, t)) in pass.output().iter().zip(&p.target).enumerate() {
            res.push(o - t);
            unit.iter_mut().for_each(|u| *u = 0.0);
            unit[k] = 1.0;
            let row = (pi * m + k) * np;
            w.backward(&pass, &unit, &mut jac[row..row + np]);
        }
    }
    (res, jac)
}

/// Levenberg-Marquardt training.
///
/// Each epoch linearizes the residuals once and then solves
/// `(JᵀJ + λI) Δw = −Jᵀe`, raising λ by `lm_lambda_factor` until the step
/// lowers the training MSE; an accepted step lowers λ by the same factor.
pub fn train_lm(
    weights: &MlpWeights,
    train: &[Pattern],
    test: &[Pattern],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.algorithm != Algorithm::LevenbergMarquardt {
        return Err(Error::Config("train_lm requires the levenberg_marquardt algorithm".into()));
    }
    if train.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    for p in train.iter().chain(test) {
        weights.check_pattern(p)?;
    }

    let has_test = !test.is_empty();
    let np = weights.n_params();
    let n_res = train.len() * weights.n_outputs();
    let mut w = weights.clone();
    let mut lambda = cfg.lm_lambda0;
    let mut train_mse = w.mse(train)?;
    let first = EpochRecord {
        epoch: 0,
        train_mse,
        test_mse: w.mse(test)?,
    };
    let mut best = BestTracker {
        score: f64::INFINITY,
        epoch: 0,
        weights: w.clone(),
    };
    best.offer(&first, has_test, &w);
    let mut history = vec![first];
    let mut stop = StopReason::MaxEpochs;

    if train_mse <= cfg.error_goal {
        stop = StopReason::ErrorGoal;
    } else {
        for epoch in 1..=cfg.max_epochs {
            let (res, jac) = jacobian(&w, train);
            let jtj = linalg::gram(&jac, n_res, np);
            let jte = linalg::at_b(&jac, n_res, np, &res);
            drop(jac);

            let mut accepted = None;
            let mut any_solution = false;
            while lambda <= LM_LAMBDA_MAX {
                let mut a = jtj.clone();
                for i in 0..np {
                    a[i * np + i] += lambda;
                }
                match linalg::solve_spd(&a, np, &jte) {
                    Some(step) => {
                        any_solution = true;
                        let mut cand = w.clone();
                        cand.add_scaled(&step, -1.0);
                        let cand_mse = cand.mse(train)?;
                        if cand_mse.is_finite() && cand_mse < train_mse {
                            lambda = (lambda / cfg.lm_lambda_factor).max(LM_LAMBDA_MIN);
                            accepted = Some((cand, cand_mse));
                            break;
                        }
                        lambda *= cfg.lm_lambda_factor;
                    }
                    None => lambda *= cfg.lm_lambda_factor,
                }
            }
            let Some((cand, cand_mse)) = accepted else {
                if !any_solution {
                    return Err(Error::Training(format!(
                        "epoch {epoch}: damped normal equations singular up to lambda {LM_LAMBDA_MAX:e}"
                    )));
                }
                stop = StopReason::LambdaOverflow;
                break;
            };
            w = cand;
            train_mse = cand_mse;
            let rec = EpochRecord {
                epoch,
                train_mse,
                test_mse: w.mse(test)?,
            };
            best.offer(&rec, has_test, &w);
            history.push(rec);
            if train_mse <= cfg.error_goal {
                stop = StopReason::ErrorGoal;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        weights: best.weights,
        history,
        best_epoch: best.epoch,
        stop,
    })
}

/// Repeated [`backprop_epoch`] passes with the same stopping and selection
/// rules as [`train_lm`].
pub fn train_backprop(
    weights: &MlpWeights,
    train: &[Pattern],
    test: &[Pattern],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input("empty training set".into()));
    }
    for p in test {
        weights.check_pattern(p)?;
    }
    let has_test = !test.is_empty();
    let mut w = weights.clone();
    let first = EpochRecord {
        epoch: 0,
        train_mse: w.mse(train)?,
        test_mse: w.mse(test)?,
    };
    let mut best = BestTracker {
        score: f64::INFINITY,
        epoch: 0,
        weights: w.clone(),
    };
    best.offer(&first, has_test, &w);
    let mut stop = StopReason::MaxEpochs;
    let mut history = vec![first];
    if first.train_mse <= cfg.error_goal {
        stop = StopReason::ErrorGoal;
    } else {
        for epoch in 1..=cfg.max_epochs {
            let (next, _) = backprop_epoch(&w, train, cfg.learning_rate)?;
            w = next;
            let rec = EpochRecord {
                epoch,
                train_mse: w.mse(train)?,
                test_mse: w.mse(test)?,
            };
            if !rec.train_mse.is_finite() {
                return Err(Error::Training(format!("epoch {epoch}: training error diverged")));
            }
            best.offer(&rec, has_test, &w);
            history.push(rec);
            if rec.train_mse <= cfg.error_goal {
                stop = StopReason::ErrorGoal;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        weights: best.weights,
        history,
        best_epoch: best.epoch,
        stop,
    })
}

/// Initializes from `cfg.rng_seed` and trains with the configured algorithm.
pub fn train(
    topology: &Topology,
    train: &[Pattern],
    test: &[Pattern],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let w = MlpWeights::init(topology, cfg.rng_seed);
    match cfg.algorithm {
        Algorithm::LevenbergMarquardt => train_lm(&w, train, test, cfg),
        Algorithm::Backprop => train_backprop(&w, train, test, cfg),
    }
}
