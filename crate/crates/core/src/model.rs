//! Uniform prediction contract, map prediction and model files.
//!
//! Model files are plain text, one keyword per line, with every real written
//! in its shortest round-trip decimal form:
//!
//! ```text
//! mlp 1
//! layers 3
//! layer 17 10 sigmoid
//! weights <n_out*n_in reals, row-major>
//! bias <n_out reals>
//! ...
//! ```
//!
//! ```text
//! anfis 1
//! inputs 17
//! rules 18
//! rule 0
//! premise <c σ pairs, one per input>
//! consequent <p_1 .. p_n r>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::anfis::{AnfisModel, GaussianMf};
use crate::error::{Error, Result};
use crate::io;
use crate::mlp::{Activation, Layer, MlpWeights};
use crate::raster::{assert_aligned, Grid};

/// A scalar-output model over a fixed number of features.
pub trait Predictor {
    fn n_inputs(&self) -> usize;
    /// `x.len() == n_inputs()` is guaranteed by callers.
    fn predict_one(&self, x: &[f64]) -> f64;
}

impl Predictor for MlpWeights {
    fn n_inputs(&self) -> usize {
        MlpWeights::n_inputs(self)
    }

    fn predict_one(&self, x: &[f64]) -> f64 {
        self.output(x).map(|o| o[0]).unwrap_or(f64::NAN)
    }
}

impl Predictor for AnfisModel {
    fn n_inputs(&self) -> usize {
        AnfisModel::n_inputs(self)
    }

    fn predict_one(&self, x: &[f64]) -> f64 {
        self.output(x).unwrap_or(f64::NAN)
    }
}

/// Either model family, with a shared file format and predict contract.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Mlp(MlpWeights),
    Anfis(AnfisModel),
}

impl Predictor for TrainedModel {
    fn n_inputs(&self) -> usize {
        match self {
            TrainedModel::Mlp(m) => Predictor::n_inputs(m),
            TrainedModel::Anfis(m) => Predictor::n_inputs(m),
        }
    }

    fn predict_one(&self, x: &[f64]) -> f64 {
        match self {
            TrainedModel::Mlp(m) => m.predict_one(x),
            TrainedModel::Anfis(m) => m.predict_one(x),
        }
    }
}

/// Runs the model on every cell where all factors are valid; any nodata
/// factor makes the output cell nodata. The output takes the first factor's
/// header.
pub fn predict_grid<P: Predictor + ?Sized>(model: &P, stack: &[&Grid]) -> Result<Grid> {
    assert_aligned(stack)?;
    if stack.len() != model.n_inputs() {
        return Err(Error::Dimension(format!(
            "model expects {} factors, stack has {}",
            model.n_inputs(),
            stack.len()
        )));
    }
    let header = *stack[0].header();
    let mut x = vec![0.0; stack.len()];
    let mut values = Vec::with_capacity(header.len());
    for i in 0..header.len() {
        let mut valid = true;
        for (xi, g) in x.iter_mut().zip(stack) {
            let v = g.values()[i];
            if g.is_nodata_value(v) {
                valid = false;
                break;
            }
            *xi = v;
        }
        if !valid {
            values.push(header.nodata);
            continue;
        }
        let y = model.predict_one(&x);
        if !y.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite prediction at cell ({}, {})",
                i / header.ncols,
                i % header.ncols
            )));
        }
        values.push(y);
    }
    Grid::new(header, values)
}

fn push_reals(out: &mut String, key: &str, vals: &[f64]) {
    out.push_str(key);
    for v in vals {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

pub fn format_model(model: &TrainedModel) -> String {
    let mut out = String::new();
    match model {
        TrainedModel::Mlp(w) => {
            out.push_str("mlp 1\n");
            let _ = writeln!(out, "layers {}", w.layers().len() + 1);
            for l in w.layers() {
                let _ = writeln!(out, "layer {} {} {}", l.n_in, l.n_out, l.activation.name());
                push_reals(&mut out, "weights", &l.weights);
                push_reals(&mut out, "bias", &l.bias);
            }
        }
        TrainedModel::Anfis(m) => {
            out.push_str("anfis 1\n");
            let _ = writeln!(out, "inputs {}", m.n_inputs());
            let _ = writeln!(out, "rules {}", m.n_rules());
            for r in 0..m.n_rules() {
                let _ = writeln!(out, "rule {r}");
                let pairs: Vec<f64> = m
                    .rule_premise(r)
                    .iter()
                    .flat_map(|mf| [mf.center, mf.sigma])
                    .collect();
                push_reals(&mut out, "premise", &pairs);
                push_reals(&mut out, "consequent", m.rule_consequent(r));
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
}

impl<'a> Lines<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    /// Next non-blank line split into its keyword and the remaining tokens.
    fn expect(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let mut toks = line.split_whitespace();
            let Some(k) = toks.next() else { continue };
            if k != key {
                return Err(self.err(i + 1, format!("expected `{key}`, found `{k}`")));
            }
            return Ok((i + 1, toks.collect()));
        }
        Err(self.err(0, format!("unexpected end of file, expected `{key}`")))
    }

    fn reals(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let (line, toks) = self.expect(key)?;
        if toks.len() != count {
            return Err(self.err(line, format!("`{key}` needs {count} values, got {}", toks.len())));
        }
        toks.iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(line, format!("invalid number `{t}`")))
            })
            .collect()
    }

    fn counts(&mut self, key: &str, count: usize) -> Result<Vec<usize>> {
        let (line, toks) = self.expect(key)?;
        if toks.len() < count {
            return Err(self.err(line, format!("`{key}` needs {count} integers")));
        }
        toks[..count]
            .iter()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| self.err(line, format!("invalid integer `{t}`")))
            })
            .collect()
    }
}

pub fn parse_model(text: &str, path: &Path) -> Result<TrainedModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
    };
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    match first {
        "mlp 1" => {
            lines.expect("mlp")?;
            let n_sizes = lines.counts("layers", 1)?[0];
            if n_sizes < 2 {
                return Err(lines.err(0, "an MLP needs at least 2 layer sizes"));
            }
            let mut layers = Vec::with_capacity(n_sizes - 1);
            for _ in 1..n_sizes {
                let (line, toks) = lines.expect("layer")?;
                if toks.len() != 3 {
                    return Err(lines.err(line, "`layer` needs n_in n_out activation"));
                }
                let n_in: usize = toks[0]
                    .parse()
                    .map_err(|_| lines.err(line, "invalid n_in"))?;
                let n_out: usize = toks[1]
                    .parse()
                    .map_err(|_| lines.err(line, "invalid n_out"))?;
                let activation = Activation::parse(toks[2])
                    .ok_or_else(|| lines.err(line, format!("unknown activation `{}`", toks[2])))?;
                let weights = lines.reals("weights", n_in * n_out)?;
                let bias = lines.reals("bias", n_out)?;
                layers.push(Layer {
                    n_in,
                    n_out,
                    activation,
                    weights,
                    bias,
                });
            }
            Ok(TrainedModel::Mlp(MlpWeights::from_layers(layers)?))
        }
        "anfis 1" => {
            lines.expect("anfis")?;
            let n = lines.counts("inputs", 1)?[0];
            let r = lines.counts("rules", 1)?[0];
            let mut premise = Vec::with_capacity(n * r);
            let mut consequent = Vec::with_capacity(r * (n + 1));
            for rule in 0..r {
                let (line, toks) = lines.expect("rule")?;
                if toks.first().and_then(|t| t.parse::<usize>().ok()) != Some(rule) {
                    return Err(lines.err(line, format!("expected `rule {rule}`")));
                }
                let pairs = lines.reals("premise", 2 * n)?;
                for p in pairs.chunks_exact(2) {
                    premise.push(GaussianMf::new(p[0], p[1])?);
                }
                consequent.extend(lines.reals("consequent", n + 1)?);
            }
            Ok(TrainedModel::Anfis(AnfisModel::new(n, premise, consequent)?))
        }
        other => Err(lines.err(1, format!("unknown model header `{other}`"))),
    }
}

pub fn write_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    io::atomic_write(path.as_ref(), format_model(model).as_bytes())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    parse_model(&io::read_to_string(path)?, path)
}
