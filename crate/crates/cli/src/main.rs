//! Command-line frontend for the people-counting pipeline.
//!
//! Exit codes: 0 success, 1 validation error, 2 input/IO error, 3 internal
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use headcount_core::config::PipelineConfig;
use headcount_core::pipeline;
use headcount_core::synth::Preset;
use headcount_core::Error;

#[derive(Parser)]
#[command(
    name = "headcount",
    about = "People counting from raw video: background subtraction, blob tracking, and line-crossing entry/exit counts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOverrides {
    /// Pipeline config file (TOML). Flags below override file values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for events.csv, report.json, and debug dumps.
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Noise seed for synthetic inputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Ground-truth CSV (header `frame,direction`) to score against.
    #[arg(long, value_name = "FILE")]
    ground_truth: Option<PathBuf>,
    /// Frame tolerance when matching predictions to ground truth.
    #[arg(long, value_name = "N")]
    tolerance_frames: Option<i64>,
}

impl CommonOverrides {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(dir) = &self.output_dir {
            config.output.dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            config.input.seed = Some(seed);
        }
        if let Some(truth) = &self.ground_truth {
            config.eval.ground_truth = Some(truth.clone());
        }
        if let Some(tol) = self.tolerance_frames {
            config.eval.tolerance_frames = tol;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the counting pipeline over the configured input.
    Count {
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Render a synthetic preset to PGM frames plus a ground-truth CSV.
    Synth {
        /// Preset name: single_cross, n_people(N), occlusion_pair,
        /// lighting_drift.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "DIR")]
        output_dir: PathBuf,
    },
    /// Score a predicted events CSV against a ground-truth CSV.
    Eval {
        /// Predicted events CSV (header `frame,track_id,direction,x,y`).
        #[arg(long, value_name = "FILE")]
        predicted: PathBuf,
        /// Ground-truth CSV (header `frame,direction`).
        #[arg(long, value_name = "FILE")]
        ground_truth: PathBuf,
        #[arg(long, value_name = "N", default_value_t = 15)]
        tolerance_frames: i64,
        /// Null per-event error probability for the significance test.
        #[arg(long, default_value_t = 0.05)]
        p0: f64,
        /// Where to write report.json (printed to stdout regardless).
        #[arg(long, value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Measure pipeline throughput with a per-stage time breakdown.
    Bench {
        #[command(flatten)]
        common: CommonOverrides,
        /// Number of identical passes over the input.
        #[arg(long, default_value_t = 3)]
        repeat: u32,
    },
}

fn main() -> ExitCode {
    // 0 success, 1 validation, 2 input/IO, 3 internal failure.
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code().clamp(0, 255) as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Count { common } => {
            let config = common.resolve()?;
            let summary = pipeline::run_count(&config)?;
            println!("{}", summary.summary_line());
            Ok(())
        }
        Command::Synth {
            preset,
            seed,
            output_dir,
        } => {
            // Fail on unknown names before touching the filesystem.
            Preset::parse(&preset)?;
            let paths = pipeline::run_synth(&preset, seed, &output_dir)?;
            println!(
                "wrote {} frames to {} and truth to {}",
                paths.frame_count,
                paths.frames_dir.display(),
                paths.truth_csv.display()
            );
            Ok(())
        }
        Command::Eval {
            predicted,
            ground_truth,
            tolerance_frames,
            p0,
            output_dir,
        } => {
            let report = pipeline::run_eval(&predicted, &ground_truth, tolerance_frames, p0)?;
            let json = report.to_json_pretty();
            if let Some(dir) = output_dir {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join("report.json");
                std::fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
            }
            println!("{json}");
            Ok(())
        }
        Command::Bench { common, repeat } => {
            let config = common.resolve()?;
            let report = pipeline::run_bench(&config, repeat)?;
            print!("{}", report.text_lines());
            Ok(())
        }
    }
}
