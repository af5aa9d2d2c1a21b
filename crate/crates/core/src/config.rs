//! Pipeline configuration: a sectioned TOML file whose keys are the
//! canonical parameter names of each stage. Command-line flags override
//! file values; the resolved config is echoed into the output directory for
//! provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blob::MorphParams;
use crate::counter::CountingLine;
use crate::mog2::Mog2Params;
use crate::synth::Preset;
use crate::tracker::TrackerParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Directory of PGM/PPM files, lexicographic order.
    PgmDir,
    /// A YUV4MPEG2 stream, luma only.
    Y4m,
    /// A built-in synthetic preset.
    Synth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub kind: InputKind,
    /// Source path for `pgm-dir` and `y4m` inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Filename glob for `pgm-dir` inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Preset name for `synth` inputs, e.g. `n_people(4)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Noise seed for `synth` inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Frame size for `synth` inputs (default 320x240).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            kind: InputKind::Synth,
            path: None,
            pattern: None,
            preset: Some("single_cross".into()),
            seed: None,
            width: None,
            height: None,
        }
    }
}

impl InputConfig {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            InputKind::PgmDir | InputKind::Y4m => {
                let path = self.path.as_ref().ok_or_else(|| {
                    Error::invalid_param("input.path", "required for pgm-dir and y4m inputs")
                })?;
                if !path.exists() {
                    return Err(Error::invalid_param(
                        "input.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
                if self.kind == InputKind::PgmDir && !path.is_dir() {
                    return Err(Error::invalid_param(
                        "input.path",
                        format!("{} is not a directory", path.display()),
                    ));
                }
            }
            InputKind::Synth => {
                let name = self.preset.as_deref().ok_or_else(|| {
                    Error::invalid_param("input.preset", "required for synth inputs")
                })?;
                Preset::parse(name)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterConfig {
    /// Line endpoints as [x1, y1, x2, y2]. Required unless the input is a
    /// synthetic preset, which carries its own line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<[f64; 4]>,
    pub enter_sign: i8,
    pub hysteresis: f64,
    pub debounce: u64,
}

impl Default for CounterConfig {
    fn default() -> Self {
        CounterConfig {
            line: None,
            enter_sign: -1,
            hysteresis: 8.0,
            debounce: 15,
        }
    }
}

impl CounterConfig {
    pub fn to_line(&self) -> Option<CountingLine> {
        self.line.map(|[x1, y1, x2, y2]| CountingLine {
            p1: (x1, y1),
            p2: (x2, y2),
            enter_sign: self.enter_sign,
            hysteresis: self.hysteresis,
            debounce: self.debounce,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Frame tolerance when matching predictions to ground truth.
    pub tolerance_frames: i64,
    /// Null per-event error probability for the significance test.
    pub p0: f64,
    /// Ground-truth CSV. For synth inputs the generated truth is used when
    /// this is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tolerance_frames: 15,
            p0: 0.05,
            ground_truth: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Dump the post-subtraction mask every N frames (0 = off).
    pub dump_masks_every: u64,
    /// Write per-frame active tracks to tracks.csv.
    pub dump_tracks: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("headcount-out"),
            dump_masks_every: 0,
            dump_tracks: false,
        }
    }
}

/// Everything a pipeline run needs, mirroring the config file sections.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub mog2: Mog2Params,
    pub blob: MorphParams,
    pub tracker: TrackerParams,
    pub counter: CounterConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text)
            .map_err(|e| Error::invalid_param("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every section. The counting line is checked separately by
    /// the pipeline because synth inputs supply a default.
    pub fn validate(&self) -> Result<()> {
        self.input.validate()?;
        self.mog2.validate()?;
        self.blob.validate()?;
        self.tracker.validate()?;
        if let Some(line) = self.counter.to_line() {
            line.validate()?;
        }
        if !(self.eval.p0 > 0.0 && self.eval.p0 < 1.0) {
            return Err(Error::invalid_param(
                "eval.p0",
                format!("{} is outside (0, 1)", self.eval.p0),
            ));
        }
        if self.eval.tolerance_frames < 0 {
            return Err(Error::invalid_param(
                "eval.tolerance_frames",
                "must be >= 0",
            ));
        }
        if let Some(truth) = &self.eval.ground_truth {
            if !truth.is_file() {
                return Err(Error::invalid_param(
                    "eval.ground_truth",
                    format!("{} does not exist", truth.display()),
                ));
            }
        }
        Ok(())
    }
}
