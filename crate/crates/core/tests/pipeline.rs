use std::fs;
use std::path::Path;

use petromap::geochem::{read_rock_eval_csv, summarize_wells, Aggregate, GeochemIndex};
use petromap::pipeline::{
    self, build_factor_stack, generate_synthetic_basin, PipelineConfig, MIN_SYNTH_SIZE,
};
use petromap::raster::{assert_aligned, read_ascii_grid, GridHeader};
use petromap::Error;

fn header(n: usize) -> GridHeader {
    GridHeader::new(n, n, 0.0, 0.0, 100.0).unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

/// The generated config with its model sections swapped for quick ones.
fn quick_config(dir: &Path) -> PipelineConfig {
    let text = fs::read_to_string(dir.join("synth.cfg")).unwrap();
    let head = &text[..text.find("[model").unwrap()];
    let quick = format!(
        "{head}[model net]\ntype = mlp\nlayers = 17 4 1\nmax_epochs = 3\nseed = 1\n\n\
         [model fis]\ntype = anfis\nradius = 0.8\nepochs = 2\n"
    );
    fs::write(dir.join("quick.cfg"), quick).unwrap();
    PipelineConfig::load(dir.join("quick.cfg")).unwrap()
}

#[test]
fn synthetic_basin_is_deterministic_and_plausible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let s = generate_synthetic_basin(5, &header(120), a.path()).unwrap();
    generate_synthetic_basin(5, &header(120), b.path()).unwrap();
    assert_eq!(dir_bytes(a.path()), dir_bytes(b.path()));
    assert!((3..=6).contains(&s.n_fields));
    assert!((0.02..=0.20).contains(&s.coverage), "{}", s.coverage);

    let c = tempfile::tempdir().unwrap();
    generate_synthetic_basin(6, &header(120), c.path()).unwrap();
    assert_ne!(dir_bytes(a.path()), dir_bytes(c.path()));

    // Wells inside planted fields carry richer source rock than the median well.
    let truth = read_ascii_grid(a.path().join("truth.asc")).unwrap();
    let wells = summarize_wells(&read_rock_eval_csv(a.path().join("wells.csv")).unwrap()).unwrap();
    let hi = |w: &petromap::geochem::WellIndexSummary| w.value(GeochemIndex::Hi, Aggregate::Mean);
    let mut all: Vec<f64> = wells.iter().map(hi).collect();
    all.sort_by(f64::total_cmp);
    let median = all[all.len() / 2];
    let h = truth.header();
    let mut inside = 0;
    for w in &wells {
        let row = h.nrows - 1 - ((w.y - h.yll) / h.cellsize) as usize;
        let col = ((w.x - h.xll) / h.cellsize) as usize;
        if truth.get(row, col) == Some(1.0) {
            inside += 1;
            assert!(hi(w) > median, "well {} HI {} vs median {median}", w.well_id, hi(w));
        }
    }
    assert!(inside >= 10, "{inside} wells inside fields");
}

#[test]
fn synthetic_basin_rejects_small_grids() {
    let d = tempfile::tempdir().unwrap();
    let r = generate_synthetic_basin(1, &header(MIN_SYNTH_SIZE - 1), d.path());
    assert!(matches!(r, Err(Error::Input(_))));
}

#[test]
fn factor_stack_is_aligned_and_normalized() {
    let d = tempfile::tempdir().unwrap();
    let s = generate_synthetic_basin(8, &header(100), d.path()).unwrap();
    let cfg = PipelineConfig::load(&s.config_path).unwrap();
    let (factors, logs) = build_factor_stack(&cfg, &header(100)).unwrap();
    assert_eq!(factors.len(), 17);
    assert_eq!(logs.len(), 17);
    let grids: Vec<_> = factors.iter().map(|f| &f.grid).collect();
    assert_aligned(&grids).unwrap();
    for f in &factors {
        let (lo, hi) = f.grid.value_range().unwrap();
        assert!(lo >= 0.0 && hi <= 1.0, "{}: [{lo}, {hi}]", f.name);
    }

    // `build` writes the same grids it computes.
    pipeline::build(&cfg).unwrap();
    for f in &factors {
        let g = read_ascii_grid(cfg.output_dir.join(format!("factor_{}.asc", f.name))).unwrap();
        assert_eq!(g, f.grid);
    }
}

#[test]
fn config_errors_name_factor_and_step() {
    let d = tempfile::tempdir().unwrap();
    generate_synthetic_basin(9, &header(100), d.path()).unwrap();
    let text = "target = truth.asc\n\n[factor gravity]\nkind = points\nsource = bouguer.csv\nchain = tri | fuzzy linear_increasing auto\n[model m]\ntype = mlp\nlayers = 1 2 1\n";
    let cfg = PipelineConfig::parse(text, d.path()).unwrap();
    let err = build_factor_stack(&cfg, &header(100)).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Config(_)), "{err:?}");
    assert!(msg.contains("gravity") && msg.contains("tri"), "{msg}");

    let bad = "target = truth.asc\n[factor x]\nkind = grid\nsource = a.asc\nchain = smooth\n[model m]\ntype = mlp\nlayers = 1 2 1\n";
    let msg = PipelineConfig::parse(bad, d.path()).unwrap_err().to_string();
    assert!(msg.contains("smooth"), "{msg}");
    assert!(PipelineConfig::parse("output_dir = o\n", d.path()).is_err());
}

#[test]
fn failed_run_leaves_partial_manifest() {
    let d = tempfile::tempdir().unwrap();
    generate_synthetic_basin(10, &header(100), d.path()).unwrap();
    let mut cfg = quick_config(d.path());
    cfg.factors[3].source = d.path().join("missing.csv");
    let name = cfg.factors[3].name.clone();
    let err = pipeline::run(&cfg, &[]).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let manifest = fs::read_to_string(cfg.output_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("status = failed"), "{manifest}");
    let stage = manifest.lines().find(|l| l.starts_with("failed_stage")).unwrap();
    assert!(stage.contains("build factor stack") && stage.contains(&name), "{stage}");
    assert!(!cfg.output_dir.join("comparison.txt").exists());
}

#[test]
fn quick_run_writes_every_output_and_reproduces() {
    let d = tempfile::tempdir().unwrap();
    generate_synthetic_basin(11, &header(100), d.path()).unwrap();
    let mut cfg = quick_config(d.path());
    let m1 = pipeline::run(&cfg, &[]).unwrap();
    assert_eq!(m1.status, "ok");
    assert_eq!(m1.models.len(), 2);
    let (m, tr, te, va) = m1.samples.unwrap();
    assert_eq!(m, 100 * 100 - 4 * 99);
    assert_eq!(tr + te + va, m);
    for model in ["net", "fis"] {
        for suffix in ["_potential.asc", "_potential.pgm", "_binary.asc", "_binary.pgm", "_metrics.txt", ".model"] {
            assert!(cfg.output_dir.join(format!("{model}{suffix}")).exists(), "{model}{suffix}");
        }
    }
    let manifest = fs::read_to_string(cfg.output_dir.join("manifest.txt")).unwrap();
    assert_eq!(manifest, m1.format());
    assert!(fs::read_to_string(cfg.output_dir.join("comparison.txt")).unwrap().contains("best model:"));
    let first = dir_bytes(&cfg.output_dir);

    cfg.output_dir = d.path().join("again");
    pipeline::run(&cfg, &[]).unwrap();
    let second = dir_bytes(&cfg.output_dir);
    let strip = |v: Vec<(String, Vec<u8>)>| -> Vec<_> { v.into_iter().filter(|(n, _)| n != "timings.txt").collect() };
    assert_eq!(strip(first), strip(second));
}
