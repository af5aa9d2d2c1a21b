//! Deterministic synthetic scenes with analytically known ground truth.
//!
//! Actors are filled ellipses moving along piecewise-linear waypoint paths
//! over a flat (optionally ramping) background with seeded noise. Ground
//! truth comes from the actor centroid geometry alone: one event per
//! side-sign change of the sampled centroid against the scene's counting
//! line. The generator shares no code path with the detection pipeline, so
//! end-to-end tests score the pipeline against an independent answer.
//!
//! Reproducibility: noise is a ChaCha8 stream keyed by (seed, frame index)
//! through a splitmix64 mix. Each sample is a centered sum of six uniform
//! draws scaled to unit variance (Irwin-Hall approximation, pure f64
//! add/multiply, no transcendentals), times `noise_sigma`. No other source
//! of randomness exists, so identical specs yield byte-identical frames on
//! any platform. Frames may be rendered in parallel by index; each frame's
//! stream is independent.

use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::counter::{CountingLine, Direction};
use crate::eval::{write_truth_csv, GroundTruthEvent};
use crate::video_io::{write_pgm_raw, Frame, FrameStream, MIN_FRAME_DIM};
use crate::{Error, Result};

/// A moving filled ellipse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActorSpec {
    /// First frame the actor is visible.
    pub spawn_frame: u64,
    /// Last frame the actor is visible (inclusive).
    pub despawn_frame: u64,
    /// Ellipse semi-axes (horizontal, vertical), pixels.
    pub axes: (f64, f64),
    /// Fill intensity, distinct from the background.
    pub intensity: u8,
    /// (frame_index, x, y) control points; linear interpolation between
    /// them. Frames strictly increase and span [spawn, despawn].
    pub waypoints: Vec<(u64, f64, f64)>,
}

impl ActorSpec {
    fn validate(&self, idx: usize, width: u32, height: u32) -> Result<()> {
        let field = |name: &str| format!("synth.actors[{idx}].{name}");
        if self.spawn_frame >= self.despawn_frame {
            return Err(Error::invalid_param(
                field("spawn_frame"),
                "spawn must precede despawn",
            ));
        }
        if self.waypoints.len() < 2 {
            return Err(Error::invalid_param(
                field("waypoints"),
                "need at least two waypoints",
            ));
        }
        if self.waypoints.first().unwrap().0 != self.spawn_frame
            || self.waypoints.last().unwrap().0 != self.despawn_frame
        {
            return Err(Error::invalid_param(
                field("waypoints"),
                "waypoints must span [spawn_frame, despawn_frame]",
            ));
        }
        if !self.waypoints.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::invalid_param(
                field("waypoints"),
                "waypoint frames must strictly increase",
            ));
        }
        for &(_, x, y) in &self.waypoints {
            if !(x >= 0.0 && x < width as f64 && y >= 0.0 && y < height as f64) {
                return Err(Error::invalid_param(
                    field("waypoints"),
                    format!("({x}, {y}) is outside the {width}x{height} frame"),
                ));
            }
        }
        let axes_ok = self.axes.0.is_finite()
            && self.axes.1.is_finite()
            && self.axes.0 > 0.0
            && self.axes.1 > 0.0;
        if !axes_ok {
            return Err(Error::invalid_param(field("axes"), "axes must be > 0"));
        }
        Ok(())
    }

    /// Interpolated centroid at `frame`, or None outside [spawn, despawn].
    pub fn centroid_at(&self, frame: u64) -> Option<(f64, f64)> {
        if frame < self.spawn_frame || frame > self.despawn_frame {
            return None;
        }
        let seg = self
            .waypoints
            .windows(2)
            .find(|w| frame >= w[0].0 && frame <= w[1].0)?;
        let (f0, x0, y0) = seg[0];
        let (f1, x1, y1) = seg[1];
        let t = (frame - f0) as f64 / (f1 - f0) as f64;
        Some((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
    }
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub frame_count: u64,
    pub background_level: u8,
    /// Total intensity added linearly over the run (0 = flat lighting).
    pub background_ramp: f64,
    /// Standard deviation of the per-pixel noise, clamped into [0, 255]
    /// with the signal.
    pub noise_sigma: f64,
    /// Counting-line placement for ground truth; also the pipeline's
    /// default line when counting this scene.
    pub line: CountingLine,
    pub actors: Vec<ActorSpec>,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 1 {
            return Err(Error::invalid_param("synth.frame_count", "must be >= 1"));
        }
        if self.width < MIN_FRAME_DIM || self.height < MIN_FRAME_DIM {
            return Err(Error::invalid_param(
                "synth.dimensions",
                format!(
                    "{}x{} is below the {MIN_FRAME_DIM}x{MIN_FRAME_DIM} minimum",
                    self.width, self.height
                ),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::invalid_param("synth.noise_sigma", "must be >= 0"));
        }
        self.line.validate()?;
        for (idx, actor) in self.actors.iter().enumerate() {
            actor.validate(idx, self.width, self.height)?;
        }
        Ok(())
    }

    /// Renders one frame: background plus ramp plus noise, then actor
    /// ellipses composited on top.
    pub fn render_frame(&self, frame_index: u64) -> Frame {
        let npix = self.width as usize * self.height as usize;
        let ramp = if self.frame_count > 1 {
            self.background_ramp * frame_index as f64 / (self.frame_count - 1) as f64
        } else {
            0.0
        };
        let base = self.background_level as f64 + ramp;

        let mut pixels = vec![0u8; npix];
        if self.noise_sigma > 0.0 {
            let mut rng = frame_rng(self.seed, frame_index);
            // Sum of six uniforms has variance 1/2; sqrt(2) rescales to 1.
            let scale = self.noise_sigma * std::f64::consts::SQRT_2;
            let mut draws = vec![0u8; npix * 6 * 4];
            rng.fill_bytes(&mut draws);
            let mut words = draws.chunks_exact(4);
            for px in pixels.iter_mut() {
                let mut acc = 0.0f64;
                for _ in 0..6 {
                    let w = u32::from_le_bytes(words.next().unwrap().try_into().unwrap());
                    acc += w as f64 / 4294967296.0;
                }
                let value = base + (acc - 3.0) * scale;
                *px = value.round().clamp(0.0, 255.0) as u8;
            }
        } else {
            let value = base.round().clamp(0.0, 255.0) as u8;
            pixels.fill(value);
        }

        for actor in &self.actors {
            let Some((cx, cy)) = actor.centroid_at(frame_index) else {
                continue;
            };
            let (a, b) = actor.axes;
            let x_lo = ((cx - a).floor().max(0.0)) as u32;
            let x_hi = ((cx + a).ceil().min(self.width as f64 - 1.0)) as u32;
            let y_lo = ((cy - b).floor().max(0.0)) as u32;
            let y_hi = ((cy + b).ceil().min(self.height as f64 - 1.0)) as u32;
            for py in y_lo..=y_hi {
                for px in x_lo..=x_hi {
                    let dx = (px as f64 - cx) / a;
                    let dy = (py as f64 - cy) / b;
                    if dx * dx + dy * dy <= 1.0 {
                        pixels[(py * self.width + px) as usize] = actor.intensity;
                    }
                }
            }
        }

        Frame::new(self.width, self.height, 1, pixels, frame_index).expect("validated spec")
    }

    /// Ground truth from actor geometry alone: one event per side-sign
    /// change of the sampled centroid path, direction decided by the line's
    /// enter sign. Events are sorted by frame.
    pub fn ground_truth(&self) -> Vec<GroundTruthEvent> {
        let mut events = Vec::new();
        for actor in &self.actors {
            let mut prev_sign: Option<i8> = None;
            for frame in actor.spawn_frame..=actor.despawn_frame.min(self.frame_count - 1) {
                let pos = actor.centroid_at(frame).expect("frame within lifetime");
                let sign = crate::counter::side_of_line(pos, &self.line);
                if sign == 0 {
                    continue;
                }
                if let Some(prev) = prev_sign {
                    if prev != sign {
                        let direction = if prev == self.line.enter_sign {
                            Direction::Enter
                        } else {
                            Direction::Exit
                        };
                        events.push(GroundTruthEvent {
                            frame_index: frame,
                            direction,
                        });
                    }
                }
                prev_sign = Some(sign);
            }
        }
        events.sort_by_key(|e| e.frame_index);
        events
    }
}

/// Mixes (seed, frame) into a ChaCha8 key.
fn frame_rng(seed: u64, frame_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        seed ^ frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15),
    ))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Lazily rendered frame stream over a scene.
pub struct SceneStream {
    spec: SceneSpec,
    delivered: u64,
}

impl SceneStream {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SceneStream { spec, delivered: 0 })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }
}

impl FrameStream for SceneStream {
    fn width(&self) -> u32 {
        self.spec.width
    }

    fn height(&self) -> u32 {
        self.spec.height
    }

    fn channels(&self) -> u8 {
        1
    }

    fn frames_delivered(&self) -> u64 {
        self.delivered
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.delivered >= self.spec.frame_count {
            return Ok(None);
        }
        let frame = self.spec.render_frame(self.delivered);
        self.delivered += 1;
        Ok(Some(frame))
    }
}

/// Builds the stream and its analytic ground truth in one call.
pub fn generate_scene(spec: &SceneSpec) -> Result<(SceneStream, Vec<GroundTruthEvent>)> {
    spec.validate()?;
    let truth = spec.ground_truth();
    Ok((SceneStream::new(spec.clone())?, truth))
}

/// Files written by [`export_scene`].
#[derive(Debug, Clone)]
pub struct ScenePaths {
    pub frames_dir: PathBuf,
    pub truth_csv: PathBuf,
    pub frame_count: u64,
}

/// Writes the scene as a zero-padded PGM sequence plus a ground-truth CSV,
/// consumable by any external pipeline.
pub fn export_scene(spec: &SceneSpec, output_dir: &Path) -> Result<ScenePaths> {
    spec.validate()?;
    let frames_dir = output_dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    for frame_index in 0..spec.frame_count {
        let frame = spec.render_frame(frame_index);
        let path = frames_dir.join(format!("{frame_index:06}.pgm"));
        write_pgm_raw(frame.width(), frame.height(), frame.pixels(), &path)?;
    }
    let truth_csv = output_dir.join("truth.csv");
    write_truth_csv(&spec.ground_truth(), &truth_csv)?;
    Ok(ScenePaths {
        frames_dir,
        truth_csv,
        frame_count: spec.frame_count,
    })
}

/// Built-in scene families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One actor walking straight across the line: exactly one entry.
    SingleCross,
    /// `n` actors staggered 40 frames apart, alternating enter/exit.
    NPeople(u32),
    /// Two actors whose silhouettes overlap near the line: two entries in
    /// truth, but the merged blob is expected to defeat the tracker.
    OcclusionPair,
    /// No actors; the background brightens by 40 intensity over the run.
    /// A well-behaved pipeline reports zero events.
    LightingDrift,
}

impl Preset {
    pub const VALID_NAMES: &'static str =
        "single_cross, n_people(N), occlusion_pair, lighting_drift";

    pub fn parse(name: &str) -> Result<Preset> {
        let name = name.trim();
        if name == "single_cross" {
            return Ok(Preset::SingleCross);
        }
        if name == "occlusion_pair" {
            return Ok(Preset::OcclusionPair);
        }
        if name == "lighting_drift" {
            return Ok(Preset::LightingDrift);
        }
        let n_people = name
            .strip_prefix("n_people(")
            .and_then(|rest| rest.strip_suffix(')'))
            .or_else(|| name.strip_prefix("n_people:"));
        if let Some(n) = n_people {
            let n: u32 = n.trim().parse().map_err(|_| {
                Error::invalid_param("synth.preset", format!("bad actor count in `{name}`"))
            })?;
            if n < 1 {
                return Err(Error::invalid_param("synth.preset", "n_people needs n >= 1"));
            }
            return Ok(Preset::NPeople(n));
        }
        Err(Error::invalid_param(
            "synth.preset",
            format!("unknown preset `{name}`; valid: {}", Preset::VALID_NAMES),
        ))
    }

    pub fn name(&self) -> String {
        match self {
            Preset::SingleCross => "single_cross".into(),
            Preset::NPeople(n) => format!("n_people({n})"),
            Preset::OcclusionPair => "occlusion_pair".into(),
            Preset::LightingDrift => "lighting_drift".into(),
        }
    }
}

/// `preset` at the default 320x240 benchmark resolution.
pub fn preset(name: Preset, seed: u64) -> SceneSpec {
    preset_with_size(name, seed, 320, 240)
}

/// Fully populated scene spec for a preset at an arbitrary resolution.
/// Geometry scales with the frame so blob sizes stay in proportion.
pub fn preset_with_size(name: Preset, seed: u64, width: u32, height: u32) -> SceneSpec {
    let w = width as f64;
    let h = height as f64;
    let axes = (w / 26.0, h / 15.0);
    let line = CountingLine {
        p1: (0.0, h / 2.0),
        p2: (w, h / 2.0),
        enter_sign: -1,
        hysteresis: 8.0,
        debounce: 15,
    };
    let base = SceneSpec {
        width,
        height,
        frame_count: 1,
        background_level: 60,
        background_ramp: 0.0,
        noise_sigma: 2.0,
        line,
        actors: Vec::new(),
        seed,
    };

    // Vertical walk from near one edge to near the other, crossing at h/2.
    // Actors spawn only after the subtractor's warmup: during the first
    // frames the learning rate runs at 1/t, and a slow object covering a
    // pixel for k frames deposits roughly k/t of mixture weight there. Past
    // the background-set margin (1 - background_ratio) the object would be
    // absorbed mid-transit, so spawns start at frame 100 and the transit is
    // short enough to keep k/t a few times below that margin.
    let first_spawn = 100u64;
    let stagger = 40u64;
    let transit = 32u64;
    let top_y = axes.1 + 8.0;
    let bottom_y = h - axes.1 - 8.0;
    let walker = |index: u32, spawn: u64, downward: bool| -> ActorSpec {
        let x = w * (0.125 + (index % 6) as f64 * 0.15);
        let (y0, y1) = if downward {
            (top_y, bottom_y)
        } else {
            (bottom_y, top_y)
        };
        ActorSpec {
            spawn_frame: spawn,
            despawn_frame: spawn + transit,
            axes,
            intensity: 200,
            waypoints: vec![(spawn, x, y0), (spawn + transit, x, y1)],
        }
    };

    match name {
        Preset::SingleCross => SceneSpec {
            frame_count: first_spawn + transit + 36,
            actors: vec![walker(2, first_spawn, true)],
            ..base
        },
        Preset::NPeople(n) => {
            // Staggered spawns, alternating direction so an even count
            // splits evenly into entries and exits.
            let actors: Vec<ActorSpec> = (0..n)
                .map(|i| walker(i, first_spawn + stagger * i as u64, i % 2 == 0))
                .collect();
            let last_gone = actors.last().unwrap().despawn_frame;
            SceneSpec {
                frame_count: last_gone + 36,
                actors,
                ..base
            }
        }
        Preset::OcclusionPair => {
            // Second walker trails the first closely enough that the
            // silhouettes stay merged through the crossing.
            let a = walker(2, first_spawn, true);
            let mut b = walker(2, first_spawn + 4, true);
            let dx = axes.0 * 0.9;
            for wp in &mut b.waypoints {
                wp.1 += dx;
            }
            SceneSpec {
                frame_count: b.despawn_frame + 36,
                actors: vec![a, b],
                ..base
            }
        }
        Preset::LightingDrift => SceneSpec {
            frame_count: 300,
            background_ramp: 40.0,
            ..base
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cross_has_one_enter_at_the_interpolated_frame() {
        let spec = preset(Preset::SingleCross, 7);
        let truth = spec.ground_truth();
        assert_eq!(truth.len(), 1);
        assert_eq!(truth[0].direction, Direction::Enter);

        // Closed form: y(t) = y0 + (t - spawn) * (y1 - y0) / transit crosses
        // h/2 at t*, and the event lands on the first integer frame past it.
        let actor = &spec.actors[0];
        let (f0, _, y0) = actor.waypoints[0];
        let (f1, _, y1) = actor.waypoints[1];
        let t_star = f0 as f64 + (120.0 - y0) * (f1 - f0) as f64 / (y1 - y0);
        assert_eq!(truth[0].frame_index, t_star.floor() as u64 + 1);
    }

    #[test]
    fn constant_scene_renders_flat_frames() {
        let spec = SceneSpec {
            noise_sigma: 0.0,
            ..preset(Preset::LightingDrift, 0)
        };
        let spec = SceneSpec {
            background_ramp: 0.0,
            ..spec
        };
        let frame = spec.render_frame(0);
        assert!(frame.pixels().iter().all(|&p| p == 60));
        let frame = spec.render_frame(spec.frame_count - 1);
        assert!(frame.pixels().iter().all(|&p| p == 60));
    }

    #[test]
    fn generation_is_bit_deterministic() {
        let spec = preset(Preset::SingleCross, 42);
        let (mut s1, t1) = generate_scene(&spec).unwrap();
        let (mut s2, t2) = generate_scene(&spec).unwrap();
        assert_eq!(t1, t2);
        loop {
            match (s1.next_frame().unwrap(), s2.next_frame().unwrap()) {
                (Some(a), Some(b)) => assert_eq!(a.pixels(), b.pixels()),
                (None, None) => break,
                _ => panic!("streams diverged in length"),
            }
        }
        // A different seed changes the noise.
        let other = preset(Preset::SingleCross, 43);
        assert_ne!(
            spec.render_frame(0).pixels(),
            other.render_frame(0).pixels()
        );
    }

    #[test]
    fn n_people_truth_alternates() {
        let spec = preset(Preset::NPeople(10), 1);
        let truth = spec.ground_truth();
        assert_eq!(truth.len(), 10);
        let enters = truth.iter().filter(|e| e.direction == Direction::Enter).count();
        assert_eq!(enters, 5);
        // Staggering keeps truth events at least 30 frames apart.
        for pair in truth.windows(2) {
            assert!(pair[1].frame_index - pair[0].frame_index >= 30);
        }
    }

    #[test]
    fn occlusion_pair_overlaps_near_the_line() {
        let spec = preset(Preset::OcclusionPair, 3);
        let truth = spec.ground_truth();
        assert_eq!(truth.len(), 2);
        // Both actors visible simultaneously with overlapping silhouettes
        // for at least 5 frames around the crossing frames.
        let (a, b) = (&spec.actors[0], &spec.actors[1]);
        let mut overlap = 0;
        for f in truth[0].frame_index.saturating_sub(10)..truth[1].frame_index + 10 {
            if let (Some(ca), Some(cb)) = (a.centroid_at(f), b.centroid_at(f)) {
                let dx = (ca.0 - cb.0).abs();
                let dy = (ca.1 - cb.1).abs();
                if dx < 2.0 * a.axes.0 && dy < 2.0 * a.axes.1 {
                    overlap += 1;
                }
            }
        }
        assert!(overlap >= 5, "only {overlap} overlapping frames");
    }

    #[test]
    fn lighting_drift_has_no_truth_events_and_ramps() {
        let spec = preset(Preset::LightingDrift, 9);
        assert!(spec.ground_truth().is_empty());
        let quiet = SceneSpec {
            noise_sigma: 0.0,
            ..spec
        };
        let first = quiet.render_frame(0).pixels()[0];
        let last = quiet.render_frame(quiet.frame_count - 1).pixels()[0];
        assert_eq!(last as i32 - first as i32, 40);
    }

    #[test]
    fn event_count_matches_closed_form_crossings() {
        // A zig-zag path crossing the line three times.
        let mut spec = preset(Preset::SingleCross, 5);
        spec.actors = vec![ActorSpec {
            spawn_frame: 10,
            despawn_frame: 70,
            axes: (10.0, 10.0),
            intensity: 200,
            waypoints: vec![
                (10, 160.0, 60.0),
                (30, 160.0, 180.0),
                (50, 160.0, 60.0),
                (70, 160.0, 180.0),
            ],
        }];
        spec.frame_count = 100;
        let truth = spec.ground_truth();
        assert_eq!(truth.len(), 3);
        assert_eq!(
            truth.iter().map(|e| e.direction).collect::<Vec<_>>(),
            vec![Direction::Enter, Direction::Exit, Direction::Enter]
        );
    }

    #[test]
    fn invariant_violations_name_fields() {
        let mut spec = preset(Preset::SingleCross, 1);
        spec.actors[0].waypoints[0].1 = 5000.0;
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("waypoints"), "{err}");

        let mut spec = preset(Preset::SingleCross, 1);
        spec.noise_sigma = -1.0;
        assert!(spec.validate().is_err());

        let mut spec = preset(Preset::SingleCross, 1);
        spec.frame_count = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(Preset::parse("single_cross").unwrap(), Preset::SingleCross);
        assert_eq!(Preset::parse("n_people(4)").unwrap(), Preset::NPeople(4));
        assert_eq!(Preset::parse("n_people:7").unwrap(), Preset::NPeople(7));
        assert_eq!(Preset::parse("lighting_drift").unwrap(), Preset::LightingDrift);
        let err = Preset::parse("mystery").unwrap_err();
        assert!(err.to_string().contains("single_cross"), "{err}");
        assert!(Preset::parse("n_people(0)").is_err());
    }

    #[test]
    fn export_writes_frames_and_truth() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = preset(Preset::SingleCross, 11);
        spec.frame_count = 4;
        spec.actors.clear();
        let paths = export_scene(&spec, dir.path()).unwrap();
        assert_eq!(paths.frame_count, 4);
        for i in 0..4 {
            assert!(paths.frames_dir.join(format!("{i:06}.pgm")).exists());
        }
        let truth = std::fs::read_to_string(&paths.truth_csv).unwrap();
        assert_eq!(truth, "frame,direction\n");
    }
}
