use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use petromap::evaluate::DEFAULT_THRESHOLD;
use petromap::pipeline::{self, Overrides, PipelineConfig};
use petromap::raster::{self, GridHeader};
use petromap::{Error, Result};

#[derive(Parser)]
#[command(name = "petromap", version, about = "Hydrocarbon prospectivity mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and write the normalized factor stack only.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full run: factors, training, validation, maps and manifest.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `split_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Generate a synthetic basin with a ready-made config.
    Synth {
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Grid is SIZE x SIZE cells.
        #[arg(long, default_value_t = 200)]
        size: usize,
        #[arg(long, default_value_t = 100.0)]
        cellsize: f64,
    },
    /// Validation metrics of an existing potential map against a truth map.
    Eval {
        potential: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Recorded in the report.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an ASCII grid to an 8-bit PGM image.
    Render {
        grid: PathBuf,
        /// Defaults to the input path with a `.pgm` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &PathBuf, overrides: &Overrides) -> Result<(PipelineConfig, Vec<String>)> {
    let mut cfg = PipelineConfig::load(config)?;
    let log = overrides.apply(&mut cfg);
    Ok((cfg, log))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Build { config, out } => {
            let overrides = Overrides {
                output_dir: out,
                ..Overrides::default()
            };
            let (cfg, _) = load(&config, &overrides)?;
            let logs = pipeline::build(&cfg)?;
            for l in &logs {
                println!(
                    "{:<24} valid {:>7}  range [{:.4}, {:.4}]",
                    l.name, l.valid_cells, l.min, l.max
                );
            }
            println!("wrote {} factors to {}", logs.len(), cfg.output_dir.display());
        }
        Command::Train {
            config,
            seed,
            out,
            threshold,
        } => {
            let overrides = Overrides {
                seed,
                output_dir: out,
                threshold,
            };
            let (cfg, log) = load(&config, &overrides)?;
            let manifest = pipeline::run(&cfg, &log)?;
            print!("{}", pipeline::comparison_table(&manifest.models));
            println!("outputs in {}", cfg.output_dir.display());
        }
        Command::Synth {
            out,
            seed,
            size,
            cellsize,
        } => {
            let header = GridHeader::new(size, size, 0.0, 0.0, cellsize)?;
            let s = pipeline::generate_synthetic_basin(seed, &header, &out)?;
            println!(
                "{} fields covering {:.2}% of the grid; config {}",
                s.n_fields,
                100.0 * s.coverage,
                s.config_path.display()
            );
        }
        Command::Eval {
            potential,
            truth,
            threshold,
            seed,
            out,
        } => {
            let report = pipeline::eval_maps(&potential, &truth, threshold, seed)?;
            print!("{}", report.format());
            if let Some(path) = out {
                report.write(path)?;
            }
        }
        Command::Render { grid, out } => {
            let g = raster::read_ascii_grid(&grid)?;
            let out = out.unwrap_or_else(|| grid.with_extension("pgm"));
            pipeline::render_map(&g, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                if !matches!(e, Error::Stage { .. }) {
                    break;
                }
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
