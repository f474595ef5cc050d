use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperplastic::pipeline::{
    run_bench, run_calibrate, run_eval, run_register, run_render, run_train, synth_gen,
    BenchConfig, CalibrateConfig, ExperimentConfig, RegisterConfig, RenderConfig, SynthConfig,
};
use hyperplastic::{Error, Result};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "hyperplastic", version)]
#[command(about = "Macroplastic detection on hyperspectral datacubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic scenes with cubes, RGB frames, masks and manifests
    SynthGen(Common),
    /// Train a classifier on the train manifests of an experiment config
    Train(Common),
    /// Score the test manifests with a trained model and render maps
    Eval(Common),
    /// Render detection maps from saved prediction and truth masks
    Render(Common),
    /// Time full-cube inference
    Bench(Common),
    /// Convert a raw-count cube to reflectance
    Calibrate(Common),
    /// Warp a cube onto another image grid
    Register(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file
    config: PathBuf,

    /// Seed for generation, splitting and training; overrides the config
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

// stdout may be a closed pipe; results are also written to files, so losing
// the echo is harmless
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    say!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn experiment(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.split_seed = seed;
    }
    Ok(cfg)
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::SynthGen(c) => {
            let cfg = SynthConfig::load(&c.config)?;
            for m in synth_gen(&cfg, c.seed.unwrap_or(0), &c.out_dir)? {
                say!("{}", m.display());
            }
        }
        Command::Train(c) => {
            let out = run_train(&experiment(c)?, &c.out_dir)?;
            say!("model: {}", out.model_path.display());
            print_json(&out.validation)?;
        }
        Command::Eval(c) => {
            let out = run_eval(&experiment(c)?, &c.out_dir)?;
            for s in &out.scenes {
                say!(
                    "scene {:02}: accuracy {:.4} auc {:.4}",
                    s.scenario_id,
                    s.report.accuracy,
                    s.report.auc
                );
            }
            say!(
                "pooled: accuracy {:.4} auc {:.4}",
                out.pooled.accuracy,
                out.pooled.auc
            );
        }
        Command::Render(c) => {
            for p in run_render(&RenderConfig::load(&c.config)?, &c.out_dir)? {
                say!("{}", p.display());
            }
        }
        Command::Bench(c) => {
            let report = run_bench(&BenchConfig::load(&c.config)?, c.seed.unwrap_or(0))?;
            create_dir(&c.out_dir)?;
            let path = c.out_dir.join("bench_report.json");
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
            print_json(&report)?;
        }
        Command::Calibrate(c) => {
            print_json(&run_calibrate(
                &CalibrateConfig::load(&c.config)?,
                &c.out_dir,
            )?)?;
        }
        Command::Register(c) => {
            print_json(&run_register(
                &RegisterConfig::load(&c.config)?,
                &c.out_dir,
            )?)?;
        }
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn common(command: &Command) -> &Common {
    match command {
        Command::SynthGen(c)
        | Command::Train(c)
        | Command::Eval(c)
        | Command::Render(c)
        | Command::Bench(c)
        | Command::Calibrate(c)
        | Command::Register(c) => c,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = common(&cli.command);
    // an unreadable config is the user's mistake, not a runtime failure
    if !c.config.is_file() {
        eprintln!("error: config file {} not found", c.config.display());
        return ExitCode::from(2);
    }
    if c.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(2);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.workers {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
