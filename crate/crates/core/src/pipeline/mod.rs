//! Config-driven orchestration: factor stack, training, evaluation and
//! output files.

mod config;
mod render;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

pub use config::{
    FactorConfig, FuzzySpec, KrigingSpec, ModelConfig, ModelSpec, PipelineConfig, SourceKind,
    Step,
};
pub use render::{encode_pgm, render_map};
pub use synth::{generate_synthetic_basin, SynthSummary, MIN_SYNTH_SIZE};

use crate::anfis::{self, Dataset};
use crate::error::{Error, Result};
use crate::evaluate::{self, ConfusionMatrix, MetricsReport, SampleMatrix, Split};
use crate::geochem;
use crate::geoprocess::{self, FeatureSet, FuzzyParams, FuzzyShape, PointSample, Variogram};
use crate::io;
use crate::mlp::{self, EpochRecord, Pattern, StopReason};
use crate::model::{predict_grid, TrainedModel};
use crate::raster::{self, assert_aligned, Grid, GridHeader};

enum Layer {
    Points(Vec<PointSample>),
    Features(FeatureSet),
    Grid(Grid),
}

impl Layer {
    fn describe(&self) -> &'static str {
        match self {
            Layer::Points(_) => "points",
            Layer::Features(_) => "features",
            Layer::Grid(_) => "grid",
        }
    }
}

/// What happened to one factor while building the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorLog {
    pub name: String,
    pub chain: String,
    /// Resolved fuzzy parameters of the final step.
    pub fuzzy: FuzzyParams,
    pub valid_cells: usize,
    pub min: f64,
    pub max: f64,
}

/// A named, normalized factor grid.
#[derive(Debug, Clone)]
pub struct Factor {
    pub name: String,
    pub grid: Grid,
}

fn load_source(f: &FactorConfig) -> Result<Layer> {
    Ok(match &f.kind {
        SourceKind::Grid => Layer::Grid(raster::read_ascii_grid(&f.source)?),
        SourceKind::Points => Layer::Points(geoprocess::read_points_csv(&f.source)?),
        SourceKind::Features(kind) => Layer::Features(geoprocess::read_features(&f.source, *kind)?),
        SourceKind::Wells(index, agg) => {
            let recs = geochem::read_rock_eval_csv(&f.source)?;
            let wells = geochem::summarize_wells(&recs)?;
            Layer::Points(geochem::well_points(&wells, *index, *agg))
        }
    })
}

fn resolve_fuzzy(shape: FuzzyShape, spec: FuzzySpec, grid: &Grid) -> Result<FuzzyParams> {
    match spec {
        FuzzySpec::Fixed(a, b) => FuzzyParams::new(shape, a, b),
        FuzzySpec::Auto { spread } => {
            let (lo, hi) = grid
                .value_range()
                .ok_or_else(|| Error::Input("cannot fit fuzzy range to an all-nodata grid".into()))?;
            match shape {
                FuzzyShape::LinearIncreasing | FuzzyShape::LinearDecreasing => {
                    // A constant grid still needs a < b.
                    let hi = if hi > lo { hi } else { lo + 1.0 };
                    FuzzyParams::new(shape, lo, hi)
                }
                FuzzyShape::Small | FuzzyShape::Large => {
                    let mid = if lo > 0.0 { 0.5 * (lo + hi) } else { 0.5 * hi };
                    let mid = if mid > 0.0 { mid } else { 1.0 };
                    FuzzyParams::new(shape, mid, spread)
                }
            }
        }
    }
}

fn apply_step(layer: Layer, step: &Step, header: &GridHeader) -> Result<Layer> {
    let wrong = |layer: &Layer| {
        Error::Config(format!(
            "step `{}` cannot take {} input",
            step.name(),
            layer.describe()
        ))
    };
    Ok(match (step, layer) {
        (Step::Idw { power, neighbors }, Layer::Points(p)) => {
            Layer::Grid(geoprocess::idw_interpolate(&p, header, *power, *neighbors)?)
        }
        (Step::Kriging(spec), Layer::Points(p)) => {
            let v = match *spec {
                KrigingSpec::Auto => Variogram::default_for(&p, header),
                KrigingSpec::Fixed {
                    model,
                    nugget,
                    sill,
                    range,
                } => Variogram {
                    model,
                    nugget,
                    sill,
                    range,
                },
            };
            Layer::Grid(geoprocess::kriging_interpolate(&p, header, &v)?)
        }
        (Step::Distance, Layer::Features(f)) => {
            Layer::Grid(geoprocess::distance_transform(&f, header)?)
        }
        (Step::Tri, Layer::Grid(g)) => Layer::Grid(geoprocess::tri(&g)?),
        (Step::Curvature, Layer::Grid(g)) => Layer::Grid(geoprocess::curvature(&g)?),
        (Step::Negate, Layer::Grid(g)) => Layer::Grid(geoprocess::negate(&g)?),
        (Step::Bin10, Layer::Grid(g)) => Layer::Grid(geoprocess::equal_interval_bins(&g, 10)?),
        (Step::Classify(t), Layer::Grid(g)) => {
            Layer::Grid(geoprocess::classify_threshold(&g, *t)?)
        }
        (Step::Fuzzy(shape, spec), Layer::Grid(g)) => {
            let params = resolve_fuzzy(*shape, *spec, &g)?;
            Layer::Grid(geoprocess::fuzzy_normalize(&g, &params)?)
        }
        (_, other) => return Err(wrong(&other)),
    })
}

/// Runs one factor chain left to right on the target geometry.
pub fn build_factor(f: &FactorConfig, header: &GridHeader) -> Result<(Factor, FactorLog)> {
    let ctx = |e: Error, step: &str| match e {
        Error::Config(m) => Error::Config(format!("factor {}, step {step}: {m}", f.name)),
        other => other.in_stage(format!("factor {} ({step})", f.name)),
    };
    let mut layer = load_source(f).map_err(|e| ctx(e, "load"))?;
    if let Layer::Grid(g) = &layer {
        // Source grids must already share the target geometry.
        let target = Grid::filled(*header, 0.0)?;
        assert_aligned(&[&target, g]).map_err(|e| ctx(e, "load"))?;
    }
    let mut fuzzy = None;
    for step in &f.chain {
        if let (Step::Fuzzy(shape, spec), Layer::Grid(g)) = (step, &layer) {
            fuzzy = Some(resolve_fuzzy(*shape, *spec, g).map_err(|e| ctx(e, step.name()))?);
        }
        layer = apply_step(layer, step, header).map_err(|e| ctx(e, step.name()))?;
    }
    let Layer::Grid(grid) = layer else {
        return Err(Error::Config(format!("factor {}: chain does not end in a grid", f.name)));
    };
    let (min, max) = grid.value_range().unwrap_or((0.0, 0.0));
    if min < 0.0 || max > 1.0 {
        return Err(Error::Numerical(format!(
            "postcondition: factor {} spans [{min}, {max}], outside [0, 1]",
            f.name
        )));
    }
    let log = FactorLog {
        name: f.name.clone(),
        chain: f.chain_text.clone(),
        fuzzy: fuzzy.expect("chain ends with a fuzzy step"),
        valid_cells: grid.valid_cells().count(),
        min,
        max,
    };
    Ok((
        Factor {
            name: f.name.clone(),
            grid,
        },
        log,
    ))
}

/// Builds every configured factor on the geometry of `header`.
pub fn build_factor_stack(cfg: &PipelineConfig, header: &GridHeader) -> Result<(Vec<Factor>, Vec<FactorLog>)> {
    let mut factors = Vec::with_capacity(cfg.factors.len());
    let mut logs = Vec::with_capacity(cfg.factors.len());
    for f in &cfg.factors {
        let (factor, log) = build_factor(f, header)?;
        factors.push(factor);
        logs.push(log);
    }
    let grids: Vec<&Grid> = factors.iter().map(|f| &f.grid).collect();
    assert_aligned(&grids)?;
    Ok((factors, logs))
}

/// Training summary of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub name: String,
    pub family: &'static str,
    pub description: String,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stop: StopReason,
    pub initial: EpochRecord,
    pub best: EpochRecord,
    pub last: EpochRecord,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub summary: ModelSummary,
    pub metrics: MetricsReport,
}

/// Everything needed to audit and reproduce a run. Wall-clock timings are
/// kept separately so that reruns produce identical manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub config_text: String,
    pub overrides: Vec<String>,
    pub status: String,
    pub failed_stage: Option<String>,
    pub samples: Option<(usize, usize, usize, usize)>,
    pub factors: Vec<FactorLog>,
    pub models: Vec<ModelResult>,
    pub best_model: Option<String>,
    /// `(relative path, sha256)` of every output file.
    pub outputs: Vec<(String, String)>,
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn format(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# petromap run manifest");
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "status = {}", self.status);
        if let Some(stage) = &self.failed_stage {
            let _ = writeln!(s, "failed_stage = {stage}");
        }
        for o in &self.overrides {
            let _ = writeln!(s, "override = {o}");
        }
        if let Some((m, tr, te, va)) = self.samples {
            let _ = writeln!(s, "samples = {m} (train {tr}, test {te}, validation {va})");
        }
        let _ = writeln!(s, "\n[config]");
        for line in self.config_text.lines() {
            let _ = writeln!(s, "| {line}");
        }
        let _ = writeln!(s, "\n[factors]");
        for f in &self.factors {
            let _ = writeln!(
                s,
                "{}: chain `{}`; fuzzy {} a={} b={}; valid={} range=[{}, {}]",
                f.name,
                f.chain,
                f.fuzzy.shape.name(),
                f.fuzzy.a,
                f.fuzzy.b,
                f.valid_cells,
                f.min,
                f.max
            );
        }
        for m in &self.models {
            let sm = &m.summary;
            let _ = writeln!(s, "\n[model {}]", sm.name);
            let _ = writeln!(s, "family = {}", sm.family);
            let _ = writeln!(s, "structure = {}", sm.description);
            let _ = writeln!(s, "epochs_run = {}", sm.epochs_run);
            let _ = writeln!(s, "stop = {}", sm.stop.name());
            for (label, rec) in [("initial", sm.initial), ("best", sm.best), ("last", sm.last)] {
                let _ = writeln!(
                    s,
                    "{label} = epoch {} train_mse {} test_mse {}",
                    rec.epoch, rec.train_mse, rec.test_mse
                );
            }
            for n in &sm.notes {
                let _ = writeln!(s, "note = {n}");
            }
            let _ = writeln!(
                s,
                "validation = r {} rmse {} kappa {} tp {} fp {} fn {} tn {}",
                m.metrics.r,
                m.metrics.rmse,
                m.metrics.kappa,
                m.metrics.confusion.tp,
                m.metrics.confusion.fp,
                m.metrics.confusion.fn_,
                m.metrics.confusion.tn
            );
        }
        if let Some(best) = &self.best_model {
            let _ = writeln!(s, "\nbest_model = {best}");
        }
        let _ = writeln!(s, "\n[outputs]");
        for (path, sum) in &self.outputs {
            let _ = writeln!(s, "{sum}  {path}");
        }
        s
    }

    pub fn format_timings(&self) -> String {
        self.timings
            .iter()
            .map(|(k, v)| format!("{k} = {v:.3}s\n"))
            .collect()
    }
}

/// Table of validation results, one row per model, best (highest kappa)
/// named last.
pub fn comparison_table(models: &[ModelResult]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>10} {:>10} {:>10}", "model", "RMS", "R", "Kappa");
    for m in models {
        let _ = writeln!(
            s,
            "{:<24} {:>10.4} {:>10.4} {:>10.4}",
            m.summary.name, m.metrics.rmse, m.metrics.r, m.metrics.kappa
        );
    }
    if let Some(best) = best_model(models) {
        let _ = writeln!(s, "best model: {best}");
    }
    s
}

fn best_model(models: &[ModelResult]) -> Option<String> {
    models
        .iter()
        .fold(None::<&ModelResult>, |best, m| match best {
            Some(b) if b.metrics.kappa >= m.metrics.kappa => Some(b),
            _ => Some(m),
        })
        .map(|m| m.summary.name.clone())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::atomic_write(&self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    fn grid(&mut self, name: &str, grid: &Grid) -> Result<()> {
        self.put(name, raster::format_ascii_grid(grid).as_bytes())
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threshold: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Vec<String> {
        let mut log = Vec::new();
        if let Some(seed) = self.seed {
            cfg.split_seed = seed;
            log.push(format!("split_seed={seed}"));
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
            log.push("output_dir=<command line>".to_string());
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
            log.push(format!("threshold={t}"));
        }
        log
    }
}

/// Builds the factor stack and writes each factor as `factor_<name>.asc`.
pub fn build(cfg: &PipelineConfig) -> Result<Vec<FactorLog>> {
    let target = raster::read_ascii_grid(&cfg.target).map_err(|e| e.in_stage("load target"))?;
    let (factors, logs) = build_factor_stack(cfg, target.header())?;
    let mut out = Outputs::new(&cfg.output_dir)?;
    for f in &factors {
        out.grid(&format!("factor_{}.asc", f.name), &f.grid)?;
    }
    Ok(logs)
}

fn rows_of(m: &SampleMatrix, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| m.row(i).to_vec()).collect()
}

fn patterns(m: &SampleMatrix, idx: &[usize]) -> Vec<Pattern> {
    idx.iter()
        .map(|&i| Pattern::new(m.row(i).to_vec(), vec![m.targets[i]]))
        .collect()
}

fn dataset(m: &SampleMatrix, idx: &[usize]) -> Result<Dataset> {
    let rows = rows_of(m, idx);
    let y = idx.iter().map(|&i| m.targets[i]).collect();
    if rows.is_empty() {
        return Dataset::new(m.n_features(), vec![], vec![]);
    }
    Dataset::from_rows(&rows, y)
}

/// Trains one configured model on the split.
pub fn train_model(
    mc: &ModelConfig,
    samples: &SampleMatrix,
    split: &Split,
) -> Result<(TrainedModel, ModelSummary)> {
    let n = samples.n_features();
    match &mc.spec {
        ModelSpec::Mlp { topology, train } => {
            if topology.n_inputs() != n {
                return Err(Error::Config(format!(
                    "model {}: topology expects {} inputs but the stack has {n} factors",
                    mc.name,
                    topology.n_inputs()
                )));
            }
            let tr = patterns(samples, &split.train_idx);
            let te = patterns(samples, &split.test_idx);
            let out = mlp::train(topology, &tr, &te, train)?;
            let summary = ModelSummary {
                name: mc.name.clone(),
                family: "mlp",
                description: format!(
                    "layers {:?}, {:?}, seed {}",
                    topology.layer_sizes(),
                    train.algorithm,
                    train.rng_seed
                ),
                epochs_run: out.history.len() - 1,
                best_epoch: out.best_epoch,
                stop: out.stop,
                initial: out.history[0],
                best: out.history[out.best_epoch],
                last: *out.history.last().expect("non-empty"),
                notes: vec![],
            };
            Ok((TrainedModel::Mlp(out.weights), summary))
        }
        ModelSpec::Anfis { cluster, hybrid } => {
            let tr = dataset(samples, &split.train_idx)?;
            let te = dataset(samples, &split.test_idx)?;
            let centers = anfis::subtractive_cluster(&tr, cluster)?;
            let init = anfis::init_from_clusters(&centers, &tr, cluster)?;
            let out = anfis::train_hybrid(&init, &tr, &te, hybrid)?;
            let mut notes = Vec::new();
            if !out.rank_deficient_epochs.is_empty() {
                notes.push(format!(
                    "consequent least squares rank deficient in {} epochs (first {})",
                    out.rank_deficient_epochs.len(),
                    out.rank_deficient_epochs[0]
                ));
            }
            let summary = ModelSummary {
                name: mc.name.clone(),
                family: "anfis",
                description: format!(
                    "{} inputs, {} rules, radius {}",
                    n,
                    centers.len(),
                    cluster.radius
                ),
                epochs_run: out.history.len() - 1,
                best_epoch: out.best_epoch,
                stop: out.stop,
                initial: out.history[0],
                best: out.history[out.best_epoch],
                last: *out.history.last().expect("non-empty"),
                notes,
            };
            Ok((TrainedModel::Anfis(out.model), summary))
        }
    }
}

/// Validation metrics of a potential map restricted to the validation cells.
pub fn validate_on(
    potential: &Grid,
    truth: &Grid,
    samples: &SampleMatrix,
    val_idx: &[usize],
    threshold: f64,
    seed: u64,
) -> Result<MetricsReport> {
    let header = *truth.header();
    let mut pred_vals = vec![header.nodata; header.len()];
    let mut truth_vals = vec![header.nodata; header.len()];
    let (mut pred, mut obs) = (Vec::new(), Vec::new());
    for &i in val_idx {
        let (r, c) = samples.cell_index[i];
        let k = r * header.ncols + c;
        let p = potential
            .get(r, c)
            .ok_or_else(|| Error::Numerical(format!("no prediction at validation cell ({r}, {c})")))?;
        pred.push(p);
        obs.push(samples.targets[i]);
        pred_vals[k] = p;
        truth_vals[k] = samples.targets[i];
    }
    let pred_grid = Grid::new(header, pred_vals)?;
    let truth_grid = Grid::new(header, truth_vals)?;
    let cm: ConfusionMatrix =
        evaluate::confusion(&evaluate::binarize(&pred_grid, threshold)?, &truth_grid)?;
    Ok(MetricsReport {
        r: evaluate::pearson_r(&pred, &obs)?,
        rmse: evaluate::rmse(&pred, &obs)?,
        kappa: evaluate::kappa(&cm)?,
        confusion: cm,
        seed,
        threshold,
    })
}

/// Full run: stack, samples, split, every model, outputs and manifest.
///
/// On failure a partial manifest naming the failed stage is written before
/// the error is returned.
pub fn run(cfg: &PipelineConfig, overrides: &[String]) -> Result<RunManifest> {
    let mut manifest = RunManifest {
        version: crate::VERSION.to_string(),
        config_text: cfg.source_text.clone(),
        overrides: overrides.to_vec(),
        status: "running".into(),
        failed_stage: None,
        samples: None,
        factors: vec![],
        models: vec![],
        best_model: None,
        outputs: vec![],
        timings: vec![],
    };
    let mut out = Outputs::new(&cfg.output_dir)?;
    match run_stages(cfg, &mut manifest, &mut out) {
        Ok(()) => {
            manifest.status = "ok".into();
            manifest.outputs = out.files.clone();
            io::atomic_write(
                &cfg.output_dir.join("manifest.txt"),
                manifest.format().as_bytes(),
            )?;
            io::atomic_write(
                &cfg.output_dir.join("timings.txt"),
                manifest.format_timings().as_bytes(),
            )?;
            Ok(manifest)
        }
        Err((stage, e)) => {
            manifest.status = "failed".into();
            manifest.failed_stage = Some(format!("{stage}: {e}"));
            manifest.outputs = out.files.clone();
            // The original error is more useful than a secondary write failure.
            let _ = io::atomic_write(
                &cfg.output_dir.join("manifest.txt"),
                manifest.format().as_bytes(),
            );
            Err(match e {
                Error::Config(_) | Error::Stage { .. } => e,
                other => other.in_stage(stage),
            })
        }
    }
}

fn run_stages(
    cfg: &PipelineConfig,
    manifest: &mut RunManifest,
    out: &mut Outputs,
) -> std::result::Result<(), (String, Error)> {
    let stage = |name: &str| {
        let name = name.to_string();
        move |e: Error| (name.clone(), e)
    };
    let mut clock = Instant::now();
    let mut lap = |manifest: &mut RunManifest, name: &str| {
        let now = Instant::now();
        manifest
            .timings
            .push((name.to_string(), (now - clock).as_secs_f64()));
        clock = now;
    };

    let target = raster::read_ascii_grid(&cfg.target).map_err(stage("load target"))?;
    let (factors, logs) =
        build_factor_stack(cfg, target.header()).map_err(stage("build factor stack"))?;
    manifest.factors = logs;
    lap(manifest, "factor_stack");

    let grids: Vec<&Grid> = factors.iter().map(|f| &f.grid).collect();
    let names: Vec<String> = factors.iter().map(|f| f.name.clone()).collect();
    let samples =
        evaluate::build_samples(&grids, &names, &target).map_err(stage("build samples"))?;
    let split = evaluate::split(samples.len(), cfg.split_fractions, cfg.split_seed)
        .map_err(stage("split"))?;
    manifest.samples = Some((
        samples.len(),
        split.train_idx.len(),
        split.test_idx.len(),
        split.val_idx.len(),
    ));

    for mc in &cfg.models {
        let st = format!("model {}", mc.name);
        let (model, summary) = train_model(mc, &samples, &split).map_err(stage(&st))?;
        lap(manifest, &format!("train_{}", mc.name));
        let potential = predict_grid(&model, &grids).map_err(stage(&st))?;
        let binary =
            evaluate::binarize(&potential, cfg.threshold).map_err(stage(&st))?;
        let metrics = validate_on(
            &potential,
            &target,
            &samples,
            &split.val_idx,
            cfg.threshold,
            cfg.split_seed,
        )
        .map_err(stage(&format!("evaluate {}", mc.name)))?;

        let write = |out: &mut Outputs| -> Result<()> {
            out.grid(&format!("{}_potential.asc", mc.name), &potential)?;
            out.put(&format!("{}_potential.pgm", mc.name), &encode_pgm(&potential))?;
            out.grid(&format!("{}_binary.asc", mc.name), &binary)?;
            out.put(&format!("{}_binary.pgm", mc.name), &encode_pgm(&binary))?;
            out.put(&format!("{}_metrics.txt", mc.name), metrics.format().as_bytes())?;
            out.put(
                &format!("{}.model", mc.name),
                crate::model::format_model(&model).as_bytes(),
            )
        };
        write(out).map_err(stage(&format!("write {}", mc.name)))?;
        manifest.models.push(ModelResult { summary, metrics });
        lap(manifest, &format!("outputs_{}", mc.name));
    }

    manifest.best_model = best_model(&manifest.models);
    let table = comparison_table(&manifest.models);
    out.put("comparison.txt", table.as_bytes())
        .map_err(stage("write comparison"))?;
    Ok(())
}

/// Metrics of an existing potential map against a truth map.
pub fn eval_maps(potential: &Path, truth: &Path, threshold: f64, seed: u64) -> Result<MetricsReport> {
    let p = raster::read_ascii_grid(potential)?;
    let t = raster::read_ascii_grid(truth)?;
    evaluate::evaluate_maps(&p, &t, threshold, seed)
}
