//! Run configuration.
//!
//! A config file is a list of `key = value` lines. Top-level keys come
//! first; `[factor NAME]` and `[model NAME]` open sections. `#` starts a
//! comment. Relative paths are resolved against the config file's directory.
//!
//! ```text
//! target = truth.asc
//! output_dir = out
//! split_seed = 42
//! split_fractions = 0.70 0.15 0.15
//! threshold = 0.5
//!
//! [factor fault_proximity]
//! kind = features
//! source = faults.txt
//! chain = distance | fuzzy linear_decreasing auto
//!
//! [model mlp]
//! type = mlp
//! layers = 17 10 5 1
//! ```
//!
//! Chain steps, separated by `|`:
//!
//! | step | input | arguments |
//! |------|-------|-----------|
//! | `idw` | points | `[power] [all\|k]` (default `2 all`) |
//! | `kriging` | points | `auto` or `spherical\|exponential nugget sill range` |
//! | `distance` | features | |
//! | `tri`, `curvature`, `negate`, `bin10` | grid | |
//! | `classify` | grid | `threshold` |
//! | `fuzzy` | grid | `shape a b`, or `shape auto [spread]` |
//!
//! For the linear shapes `auto` uses the observed value range. For `small`
//! and `large` it puts the midpoint halfway through the observed range (or at
//! half the maximum when the range reaches zero or below) with the given
//! spread, default 5.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::anfis::{ClusterConfig, HybridConfig};
use crate::error::{Error, Result};
use crate::evaluate::{DEFAULT_FRACTIONS, DEFAULT_THRESHOLD};
use crate::geochem::{Aggregate, GeochemIndex};
use crate::geoprocess::{FeatureKind, FuzzyShape, Neighbors, VariogramModel, DEFAULT_SPREAD};
use crate::io;
use crate::mlp::{Algorithm, Topology, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    Grid,
    Points,
    Features(FeatureKind),
    /// Rock-Eval CSV reduced to one index statistic per well.
    Wells(GeochemIndex, Aggregate),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FuzzySpec {
    Fixed(f64, f64),
    Auto { spread: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KrigingSpec {
    Auto,
    Fixed {
        model: VariogramModel,
        nugget: f64,
        sill: f64,
        range: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Idw { power: f64, neighbors: Neighbors },
    Kriging(KrigingSpec),
    Distance,
    Tri,
    Curvature,
    Negate,
    Bin10,
    Classify(f64),
    Fuzzy(FuzzyShape, FuzzySpec),
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::Idw { .. } => "idw",
            Step::Kriging(_) => "kriging",
            Step::Distance => "distance",
            Step::Tri => "tri",
            Step::Curvature => "curvature",
            Step::Negate => "negate",
            Step::Bin10 => "bin10",
            Step::Classify(_) => "classify",
            Step::Fuzzy(..) => "fuzzy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorConfig {
    pub name: String,
    pub kind: SourceKind,
    pub source: PathBuf,
    pub chain_text: String,
    pub chain: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Mlp {
        topology: Topology,
        train: TrainConfig,
    },
    Anfis {
        cluster: ClusterConfig,
        hybrid: HybridConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub name: String,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Raw text of the config file, echoed into the manifest.
    pub source_text: String,
    pub base_dir: PathBuf,
    pub target: PathBuf,
    pub output_dir: PathBuf,
    pub split_seed: u64,
    pub split_fractions: [f64; 3],
    pub threshold: f64,
    pub factors: Vec<FactorConfig>,
    pub models: Vec<ModelConfig>,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = io::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        PipelineConfig::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let sections = split_sections(text)?;
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };

        let mut top = Fields::new("top level", &sections.top);
        let target = resolve(top.required("target")?);
        let output_dir = resolve(top.optional("output_dir").unwrap_or("out"));
        let split_seed = top.parse_or("split_seed", 42u64)?;
        let split_fractions = match top.optional("split_fractions") {
            None => DEFAULT_FRACTIONS,
            Some(s) => {
                let v = parse_reals(s, "split_fractions")?;
                <[f64; 3]>::try_from(v.as_slice()).map_err(|_| {
                    Error::Config("split_fractions needs exactly three numbers".into())
                })?
            }
        };
        let threshold = top.parse_or("threshold", DEFAULT_THRESHOLD)?;
        top.finish()?;

        let mut factors = Vec::new();
        let mut models = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for sec in &sections.sections {
            if !seen.insert((sec.kind.clone(), sec.name.clone())) {
                return Err(Error::Config(format!(
                    "duplicate section [{} {}]",
                    sec.kind, sec.name
                )));
            }
            let label = format!("[{} {}]", sec.kind, sec.name);
            let mut f = Fields::new(&label, &sec.fields);
            match sec.kind.as_str() {
                "factor" => {
                    factors.push(parse_factor(&sec.name, &mut f, &resolve)?);
                }
                "model" => models.push(parse_model(&sec.name, &mut f)?),
                other => {
                    return Err(Error::Config(format!("unknown section kind `{other}`")));
                }
            }
            f.finish()?;
        }
        if factors.is_empty() {
            return Err(Error::Config("no [factor] sections".into()));
        }
        if models.is_empty() {
            return Err(Error::Config("no [model] sections".into()));
        }
        Ok(PipelineConfig {
            source_text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
            target,
            output_dir,
            split_seed,
            split_fractions,
            threshold,
            factors,
            models,
        })
    }
}

struct Section {
    kind: String,
    name: String,
    fields: BTreeMap<String, (usize, String)>,
}

struct Sections {
    top: BTreeMap<String, (usize, String)>,
    sections: Vec<Section>,
}

fn split_sections(text: &str) -> Result<Sections> {
    let mut top = BTreeMap::new();
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| {
                Error::Config(format!("line {lineno}: unterminated section header"))
            })?;
            let mut toks = inner.split_whitespace();
            let (Some(kind), Some(name), None) = (toks.next(), toks.next(), toks.next()) else {
                return Err(Error::Config(format!(
                    "line {lineno}: section header must be `[kind name]`"
                )));
            };
            sections.push(Section {
                kind: kind.to_string(),
                name: name.to_string(),
                fields: BTreeMap::new(),
            });
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {lineno}: expected `key = value`")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let map = match sections.last_mut() {
            Some(s) => &mut s.fields,
            None => &mut top,
        };
        if map.insert(k.clone(), (lineno, v)).is_some() {
            return Err(Error::Config(format!("line {lineno}: duplicate key `{k}`")));
        }
    }
    Ok(Sections { top, sections })
}

struct Fields<'a> {
    label: String,
    map: &'a BTreeMap<String, (usize, String)>,
    used: std::collections::BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(label: &str, map: &'a BTreeMap<String, (usize, String)>) -> Self {
        Fields {
            label: label.to_string(),
            map,
            used: Default::default(),
        }
    }

    fn optional(&mut self, key: &str) -> Option<&'a str> {
        let (k, (_, v)) = self.map.get_key_value(key)?;
        self.used.insert(k.as_str());
        Some(v.as_str())
    }

    fn required(&mut self, key: &str) -> Result<&'a str> {
        self.optional(key)
            .ok_or_else(|| Error::Config(format!("{}: missing `{key}`", self.label)))
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.optional(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::Config(format!("{}: invalid value `{v}` for `{key}`", self.label))
            }),
        }
    }

    fn finish(&self) -> Result<()> {
        if let Some((k, (line, _))) = self
            .map
            .iter()
            .find(|(k, _)| !self.used.contains(k.as_str()))
        {
            return Err(Error::Config(format!(
                "{}: unknown key `{k}` (line {line})",
                self.label
            )));
        }
        Ok(())
    }
}

fn parse_reals(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: invalid number `{t}`")))
        })
        .collect()
}

fn parse_factor(
    name: &str,
    f: &mut Fields<'_>,
    resolve: &dyn Fn(&str) -> PathBuf,
) -> Result<FactorConfig> {
    let kind_s = f.required("kind")?;
    let kind = match kind_s {
        "grid" => SourceKind::Grid,
        "points" => SourceKind::Points,
        "features" => {
            let fk = match f.optional("feature_kind").unwrap_or("fault_lines") {
                "fault_lines" => FeatureKind::FaultLines,
                "anticline_axes" => FeatureKind::AnticlineAxes,
                "closure_centers" => FeatureKind::ClosureCenters,
                "anomaly_centers" => FeatureKind::AnomalyCenters,
                other => {
                    return Err(Error::Config(format!(
                        "factor {name}: unknown feature_kind `{other}`"
                    )))
                }
            };
            SourceKind::Features(fk)
        }
        "wells" => {
            let idx_s = f.required("index")?;
            let idx = GeochemIndex::parse(idx_s).ok_or_else(|| {
                Error::Config(format!("factor {name}: unknown geochemical index `{idx_s}`"))
            })?;
            let stat_s = f.required("stat")?;
            let stat = Aggregate::parse(stat_s).ok_or_else(|| {
                Error::Config(format!("factor {name}: stat must be mean or max, got `{stat_s}`"))
            })?;
            SourceKind::Wells(idx, stat)
        }
        other => {
            return Err(Error::Config(format!("factor {name}: unknown kind `{other}`")));
        }
    };
    let source = resolve(f.required("source")?);
    let chain_text = f.required("chain")?.to_string();
    let chain = chain_text
        .split('|')
        .enumerate()
        .map(|(i, s)| parse_step(s).map_err(|m| Error::Config(format!("factor {name}, step {}: {m}", i + 1))))
        .collect::<Result<Vec<Step>>>()?;
    if !matches!(chain.last(), Some(Step::Fuzzy(..))) {
        return Err(Error::Config(format!(
            "factor {name}: chain must end with a fuzzy step"
        )));
    }
    Ok(FactorConfig {
        name: name.to_string(),
        kind,
        source,
        chain_text,
        chain,
    })
}

fn parse_step(s: &str) -> std::result::Result<Step, String> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let Some((&op, args)) = toks.split_first() else {
        return Err("empty step".into());
    };
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("invalid number `{t}`"));
    let no_args = |step: Step| {
        if args.is_empty() {
            Ok(step)
        } else {
            Err(format!("`{op}` takes no arguments"))
        }
    };
    match op {
        "idw" => {
            let power = args.first().map(|t| num(t)).transpose()?.unwrap_or(2.0);
            let neighbors = match args.get(1) {
                None | Some(&"all") => Neighbors::All,
                Some(t) => Neighbors::Nearest(
                    t.parse().map_err(|_| format!("invalid neighbor count `{t}`"))?,
                ),
            };
            if args.len() > 2 {
                return Err("idw takes at most 2 arguments".into());
            }
            Ok(Step::Idw { power, neighbors })
        }
        "kriging" => match args {
            [] | ["auto"] => Ok(Step::Kriging(KrigingSpec::Auto)),
            [model, nugget, sill, range] => {
                let model = match *model {
                    "spherical" => VariogramModel::Spherical,
                    "exponential" => VariogramModel::Exponential,
                    other => return Err(format!("unknown variogram model `{other}`")),
                };
                Ok(Step::Kriging(KrigingSpec::Fixed {
                    model,
                    nugget: num(nugget)?,
                    sill: num(sill)?,
                    range: num(range)?,
                }))
            }
            _ => Err("kriging takes `auto` or `model nugget sill range`".into()),
        },
        "distance" => no_args(Step::Distance),
        "tri" => no_args(Step::Tri),
        "curvature" => no_args(Step::Curvature),
        "negate" => no_args(Step::Negate),
        "bin10" => no_args(Step::Bin10),
        "classify" => match args {
            [t] => Ok(Step::Classify(num(t)?)),
            _ => Err("classify takes one threshold".into()),
        },
        "fuzzy" => {
            let (shape_s, rest) = args.split_first().ok_or("fuzzy needs a shape")?;
            let shape =
                FuzzyShape::parse(shape_s).ok_or_else(|| format!("unknown fuzzy shape `{shape_s}`"))?;
            let spec = match rest {
                ["auto"] => FuzzySpec::Auto {
                    spread: DEFAULT_SPREAD,
                },
                ["auto", spread] => FuzzySpec::Auto { spread: num(spread)? },
                [a, b] => FuzzySpec::Fixed(num(a)?, num(b)?),
                _ => return Err("fuzzy takes `shape a b` or `shape auto [spread]`".into()),
            };
            Ok(Step::Fuzzy(shape, spec))
        }
        other => Err(format!("unknown step `{other}`")),
    }
}

fn parse_model(name: &str, f: &mut Fields<'_>) -> Result<ModelConfig> {
    let spec = match f.required("type")? {
        "mlp" => {
            let sizes = f
                .required("layers")?
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|_| {
                        Error::Config(format!("model {name}: invalid layer size `{t}`"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?;
            let topology = Topology::new(sizes)?;
            if *topology.layer_sizes().last().expect("validated") != 1 {
                return Err(Error::Config(format!(
                    "model {name}: potential maps need a single output unit"
                )));
            }
            let d = TrainConfig::default();
            let algorithm = match f.optional("algorithm").unwrap_or("levenberg_marquardt") {
                "levenberg_marquardt" | "lm" => Algorithm::LevenbergMarquardt,
                "backprop" => Algorithm::Backprop,
                other => {
                    return Err(Error::Config(format!(
                        "model {name}: unknown algorithm `{other}`"
                    )))
                }
            };
            let train = TrainConfig {
                algorithm,
                learning_rate: f.parse_or("learning_rate", d.learning_rate)?,
                lm_lambda0: f.parse_or("lambda0", d.lm_lambda0)?,
                lm_lambda_factor: f.parse_or("lambda_factor", d.lm_lambda_factor)?,
                max_epochs: f.parse_or("max_epochs", d.max_epochs)?,
                error_goal: f.parse_or("error_goal", d.error_goal)?,
                rng_seed: f.parse_or("seed", d.rng_seed)?,
            };
            train.validate()?;
            ModelSpec::Mlp { topology, train }
        }
        "anfis" => {
            let c = ClusterConfig::default();
            let cluster = ClusterConfig {
                radius: f.parse_or("radius", c.radius)?,
                squash: f.parse_or("squash", c.squash)?,
                accept_ratio: f.parse_or("accept_ratio", c.accept_ratio)?,
                reject_ratio: f.parse_or("reject_ratio", c.reject_ratio)?,
            };
            cluster.validate()?;
            let h = HybridConfig::default();
            let hybrid = HybridConfig {
                epochs: f.parse_or("epochs", h.epochs)?,
                learning_rate: f.parse_or("learning_rate", h.learning_rate)?,
                error_goal: f.parse_or("error_goal", h.error_goal)?,
                rate_decay: f.parse_or("rate_decay", h.rate_decay)?,
            };
            if !(hybrid.learning_rate > 0.0 && hybrid.error_goal > 0.0) {
                return Err(Error::Config(format!(
                    "model {name}: learning_rate and error_goal must be positive"
                )));
            }
            ModelSpec::Anfis { cluster, hybrid }
        }
        other => {
            return Err(Error::Config(format!("model {name}: unknown type `{other}`")));
        }
    };
    Ok(ModelConfig {
        name: name.to_string(),
        spec,
    })
}
