//! Video ingestion and image artifact output.
//!
//! Only uncompressed, bit-deterministic formats are handled: binary PGM/PPM
//! sequences (lexicographic filename order defines time, so zero-padded names
//! are required) and YUV4MPEG2 streams read luma-only. Conversion from camera
//! footage is an external preprocessing step, e.g.
//! `ffmpeg -i clip.mp4 -pix_fmt yuv420p out.y4m`.

mod pgm;
mod y4m;

pub use pgm::{read_single, write_pgm, write_pgm_raw, PgmSequence};
pub use y4m::Y4mStream;

use crate::{Error, Result};

/// Smallest frame edge the pipeline accepts.
pub const MIN_FRAME_DIM: u32 = 16;

/// A decoded raster of 8-bit samples, the pipeline's unit of ingestion.
///
/// Grayscale frames have `channels == 1`; RGB frames have `channels == 3`
/// with interleaved samples. Rows are stored top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
    /// Ordinal frame number, starting at 0.
    pub index: u64,
}

impl Frame {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>, index: u64) -> Result<Self> {
        if width < MIN_FRAME_DIM || height < MIN_FRAME_DIM {
            return Err(Error::invalid_param(
                "frame",
                format!("{width}x{height} is below the {MIN_FRAME_DIM}x{MIN_FRAME_DIM} minimum"),
            ));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid_param(
                "frame.channels",
                format!("{channels} (must be 1 or 3)"),
            ));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(Error::invalid_param(
                "frame.pixels",
                format!("{} bytes, expected {expected}", pixels.len()),
            ));
        }
        Ok(Frame {
            width,
            height,
            channels,
            pixels,
            index,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// A sequential, single-consumer source of uniformly sized frames.
///
/// Every delivered frame has the declared width/height/channels and indices
/// run strictly consecutively from 0. Streams may be handed between threads
/// but are never shared; decoding is synchronous.
pub trait FrameStream {
    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn channels(&self) -> u8;
    /// Number of frames delivered so far.
    fn frames_delivered(&self) -> u64;
    /// Next frame, or `None` once the source is exhausted.
    fn next_frame(&mut self) -> Result<Option<Frame>>;
}

/// Minimal glob matching for sequence file patterns: `*` matches any run of
/// characters, `?` matches exactly one. Case-sensitive.
pub(crate) fn glob_match(pattern: &str, name: &str) -> bool {
    fn inner(pat: &[u8], s: &[u8]) -> bool {
        match (pat.first(), s.first()) {
            (None, None) => true,
            (Some(b'*'), _) => {
                inner(&pat[1..], s) || (!s.is_empty() && inner(pat, &s[1..]))
            }
            (Some(b'?'), Some(_)) => inner(&pat[1..], &s[1..]),
            (Some(&p), Some(&c)) if p == c => inner(&pat[1..], &s[1..]),
            _ => false,
        }
    }
    inner(pattern.as_bytes(), name.as_bytes())
}
