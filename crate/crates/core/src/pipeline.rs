//! End-to-end pipeline runs: count, synth export, standalone eval, bench.
//!
//! The frame loop is sequential because the background model and tracker are
//! stateful. Per frame: subtract -> binarize -> clean -> label -> blobs ->
//! track -> count. Events stream to `events.csv`; when ground truth is
//! available the run ends with `report.json`. Identical config and inputs
//! produce byte-identical `events.csv` and `report.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::blob::{binarize, clean_mask, connected_components, extract_blobs};
use crate::config::{InputKind, PipelineConfig};
use crate::counter::{Counter, CountingLine, CrossingEvent, EventCsvWriter};
use crate::eval::{
    match_events, read_truth_csv, render_report, GroundTruthEvent, MetricsReport,
};
use crate::mog2::BackgroundModel;
use crate::synth::{self, Preset, ScenePaths};
use crate::tracker::Tracker;
use crate::video_io::{FrameStream, PgmSequence, Y4mStream};
use crate::{Error, Result};

/// Totals and throughput of one counting run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub frames: u64,
    pub wall_seconds: f64,
    pub fps: f64,
    pub enter_total: u64,
    pub exit_total: u64,
    pub occupancy: i64,
    /// Present when ground truth was available.
    pub report: Option<MetricsReport>,
}

impl RunSummary {
    /// The one-line summary printed at the end of a run.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "frames={} wall={:.2}s fps={:.1} enter={} exit={} occupancy={}",
            self.frames, self.wall_seconds, self.fps, self.enter_total, self.exit_total,
            self.occupancy
        );
        if let Some(report) = &self.report {
            line.push_str(&format!(" average_f1={:.4}", report.average_f1));
        }
        line
    }
}

/// Stream plus, for synthetic inputs, the generated truth and scene line.
type OpenedInput = (
    Box<dyn FrameStream>,
    Option<Vec<GroundTruthEvent>>,
    Option<CountingLine>,
);

fn open_input(config: &PipelineConfig) -> Result<OpenedInput> {
    match config.input.kind {
        InputKind::PgmDir => {
            let dir = config.input.path.as_ref().expect("validated");
            let pattern = config.input.pattern.as_deref().unwrap_or("*.pgm");
            let stream = PgmSequence::open(dir, pattern)?;
            Ok((Box::new(stream), None, None))
        }
        InputKind::Y4m => {
            let path = config.input.path.as_ref().expect("validated");
            let stream = Y4mStream::open(path)?;
            Ok((Box::new(stream), None, None))
        }
        InputKind::Synth => {
            let preset = Preset::parse(config.input.preset.as_deref().expect("validated"))?;
            let seed = config.input.seed.unwrap_or(0);
            let width = config.input.width.unwrap_or(320);
            let height = config.input.height.unwrap_or(240);
            let spec = synth::preset_with_size(preset, seed, width, height);
            let line = spec.line.clone();
            let (stream, truth) = synth::generate_scene(&spec)?;
            Ok((Box::new(stream), Some(truth), Some(line)))
        }
    }
}

/// Runs the full counting pipeline described by `config`.
pub fn run_count(config: &PipelineConfig) -> Result<RunSummary> {
    run_count_inner(config, None)
}

/// Per-stage accumulated time, milliseconds.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StageBreakdown {
    pub subtraction_ms: f64,
    pub morphology_ms: f64,
    pub labeling_ms: f64,
    pub tracking_ms: f64,
}

fn run_count_inner(
    config: &PipelineConfig,
    mut stages: Option<&mut StageBreakdown>,
) -> Result<RunSummary> {
    config.validate()?;
    let (mut stream, synth_truth, synth_line) = open_input(config)?;

    let line = config
        .counter
        .to_line()
        .or(synth_line)
        .ok_or_else(|| Error::invalid_param("counter.line", "no counting line configured"))?;
    line.validate()?;

    let out_dir = &config.output.dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let masks_dir = out_dir.join("masks");
    if config.output.dump_masks_every > 0 {
        std::fs::create_dir_all(&masks_dir).map_err(|e| Error::io(&masks_dir, e))?;
    }

    // Echo the resolved configuration next to the outputs.
    let echo_path = out_dir.join("effective_config.toml");
    std::fs::write(&echo_path, config.to_toml_string()).map_err(|e| Error::io(&echo_path, e))?;

    let (width, height) = (stream.width(), stream.height());
    let mut model = BackgroundModel::new(width, height, stream.channels(), config.mog2.clone())?;
    let min_blob_area = config.blob.resolved_min_blob_area(width, height);
    let mut tracker = Tracker::from_params(&config.tracker, width, height)?;
    let mut counter = Counter::new(line)?;

    let mut events_writer = EventCsvWriter::create(&out_dir.join("events.csv"))?;
    let mut tracks_out = if config.output.dump_tracks {
        let path = out_dir.join("tracks.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "frame,track_id,x,y,state")
            .map_err(|e| Error::io(out_dir.join("tracks.csv"), e))?;
        Some(w)
    } else {
        None
    };

    let started = Instant::now();
    let mut frames = 0u64;
    let mut all_events: Vec<CrossingEvent> = Vec::new();
    while let Some(frame) = stream.next_frame()? {
        let index = frame.index;

        let t0 = Instant::now();
        let mask = model.apply(&frame, None)?;
        let t1 = Instant::now();
        let binary = binarize(&mask, config.blob.shadow_policy);
        let cleaned = clean_mask(&binary, &config.blob);
        let t2 = Instant::now();
        let labels = connected_components(&cleaned);
        let blobs = extract_blobs(&labels, min_blob_area);
        let t3 = Instant::now();
        let tracks = tracker.update(&blobs, index)?;
        let events = counter.update(tracks, index)?;
        let t4 = Instant::now();

        if let Some(stages) = stages.as_deref_mut() {
            stages.subtraction_ms += (t1 - t0).as_secs_f64() * 1e3;
            stages.morphology_ms += (t2 - t1).as_secs_f64() * 1e3;
            stages.labeling_ms += (t3 - t2).as_secs_f64() * 1e3;
            stages.tracking_ms += (t4 - t3).as_secs_f64() * 1e3;
        }

        for event in &events {
            events_writer.write_event(event)?;
        }
        all_events.extend(events);

        if config.output.dump_masks_every > 0 && index % config.output.dump_masks_every == 0 {
            mask.write_pgm(&masks_dir.join(format!("{index:06}.pgm")))?;
        }
        if let Some(w) = tracks_out.as_mut() {
            for track in tracker.active_tracks() {
                let (x, y) = track.last_centroid();
                writeln!(
                    w,
                    "{},{},{:.3},{:.3},{}",
                    index,
                    track.id,
                    x,
                    y,
                    track.state.as_str()
                )
                .map_err(|e| Error::io(out_dir.join("tracks.csv"), e))?;
            }
        }

        frames += 1;
    }
    events_writer.finish()?;
    if let Some(mut w) = tracks_out.take() {
        w.flush()
            .map_err(|e| Error::io(out_dir.join("tracks.csv"), e))?;
    }
    let wall_seconds = started.elapsed().as_secs_f64();

    // An explicit ground-truth file wins over the synthetic scene's own.
    let truth = match &config.eval.ground_truth {
        Some(path) => Some(read_truth_csv(path)?),
        None => synth_truth,
    };
    let report = match truth {
        Some(truth) => {
            let counts = match_events(&all_events, &truth, config.eval.tolerance_frames)?;
            let report = render_report(counts, config.eval.p0)?;
            let path = out_dir.join("report.json");
            std::fs::write(&path, report.to_json_pretty()).map_err(|e| Error::io(&path, e))?;
            Some(report)
        }
        None => None,
    };

    Ok(RunSummary {
        frames,
        wall_seconds,
        fps: if wall_seconds > 0.0 {
            frames as f64 / wall_seconds
        } else {
            0.0
        },
        enter_total: counter.enter_total(),
        exit_total: counter.exit_total(),
        occupancy: counter.occupancy(),
        report,
    })
}

/// Materializes a synthetic preset as PGM frames plus a truth CSV.
pub fn run_synth(preset_name: &str, seed: u64, output_dir: &Path) -> Result<ScenePaths> {
    let preset = Preset::parse(preset_name)?;
    let spec = synth::preset(preset, seed);
    synth::export_scene(&spec, output_dir)
}

/// Re-scores an events CSV against a truth CSV without any video work.
/// Predictions are sorted by frame before matching.
pub fn run_eval(
    predicted_csv: &Path,
    truth_csv: &Path,
    tolerance_frames: i64,
    p0: f64,
) -> Result<MetricsReport> {
    let mut predicted = crate::counter::read_events_csv(predicted_csv)?;
    predicted.sort_by_key(|e| e.frame_index);
    let truth = read_truth_csv(truth_csv)?;
    let counts = match_events(&predicted, &truth, tolerance_frames)?;
    render_report(counts, p0)
}

/// One benchmark pass.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRun {
    pub frames: u64,
    pub wall_seconds: f64,
    pub fps: f64,
    pub stages: StageBreakdown,
}

/// Aggregate throughput over repeated identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub runs: Vec<BenchRun>,
    pub fps_mean: f64,
    pub fps_min: f64,
}

impl BenchReport {
    pub fn text_lines(&self) -> String {
        let mut out = String::new();
        for (i, run) in self.runs.iter().enumerate() {
            out.push_str(&format!(
                "run {}: {} frames in {:.2}s = {:.1} fps (subtraction {:.0}ms, morphology {:.0}ms, labeling {:.0}ms, tracking {:.0}ms)\n",
                i + 1,
                run.frames,
                run.wall_seconds,
                run.fps,
                run.stages.subtraction_ms,
                run.stages.morphology_ms,
                run.stages.labeling_ms,
                run.stages.tracking_ms,
            ));
        }
        out.push_str(&format!(
            "mean {:.1} fps, min {:.1} fps\n",
            self.fps_mean, self.fps_min
        ));
        out
    }
}

/// Runs the configured pipeline `repeat` times and reports throughput with
/// a per-stage time breakdown. Single-threaded, same code path as `count`.
pub fn run_bench(config: &PipelineConfig, repeat: u32) -> Result<BenchReport> {
    if repeat == 0 {
        return Err(Error::invalid_param("bench.repeat", "must be >= 1"));
    }
    let mut runs = Vec::with_capacity(repeat as usize);
    for _ in 0..repeat {
        let mut stages = StageBreakdown::default();
        let summary = run_count_inner(config, Some(&mut stages))?;
        runs.push(BenchRun {
            frames: summary.frames,
            wall_seconds: summary.wall_seconds,
            fps: summary.fps,
            stages,
        });
    }
    let fps_mean = runs.iter().map(|r| r.fps).sum::<f64>() / runs.len() as f64;
    let fps_min = runs.iter().map(|r| r.fps).fold(f64::INFINITY, f64::min);
    Ok(BenchReport {
        runs,
        fps_mean,
        fps_min,
    })
}

/// Convenience used by tests and the CLI: a config whose input is a preset
/// scene written into `output_dir`.
pub fn synth_config(preset_name: &str, seed: u64, output_dir: PathBuf) -> PipelineConfig {
    PipelineConfig {
        input: crate::config::InputConfig {
            kind: InputKind::Synth,
            preset: Some(preset_name.to_string()),
            seed: Some(seed),
            ..Default::default()
        },
        output: crate::config::OutputConfig {
            dir: output_dir,
            ..Default::default()
        },
        ..Default::default()
    }
}
