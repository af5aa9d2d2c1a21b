//! Binary PGM (`P5`) and PPM (`P6`) support: sequence reading and single-image
//! writing. Only maxval 255 is accepted. Header comments (`#` to end of line)
//! are permitted between tokens; the maxval is followed by exactly one
//! whitespace byte, then the raster.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{glob_match, Frame, FrameStream};
use crate::mog2::MaskFrame;
use crate::{Error, Result};

/// A directory of PGM/PPM files delivering one frame per file, in
/// lexicographic filename order. All files must share dimensions and
/// channel count.
pub struct PgmSequence {
    files: Vec<PathBuf>,
    width: u32,
    height: u32,
    channels: u8,
    delivered: u64,
}

impl PgmSequence {
    /// Opens every file in `directory` whose name matches `pattern`
    /// (e.g. `*.pgm`). Fails if the directory is missing or nothing matches.
    pub fn open(directory: &Path, pattern: &str) -> Result<Self> {
        let entries = fs::read_dir(directory).map_err(|e| Error::io(directory, e))?;
        let mut files: Vec<PathBuf> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(directory, e))?;
            let path = entry.path();
            let name = match path.file_name().and_then(|n| n.to_str()) {
                Some(n) => n,
                None => continue,
            };
            if path.is_file() && glob_match(pattern, name) {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(Error::Malformed(format!(
                "no files matching `{pattern}` in {}",
                directory.display()
            )));
        }
        files.sort();

        let (width, height, channels, _) = read_pnm(&files[0])?;
        Ok(PgmSequence {
            files,
            width,
            height,
            channels,
            delivered: 0,
        })
    }
}

impl FrameStream for PgmSequence {
    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    fn channels(&self) -> u8 {
        self.channels
    }

    fn frames_delivered(&self) -> u64 {
        self.delivered
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        let idx = self.delivered as usize;
        if idx >= self.files.len() {
            return Ok(None);
        }
        let path = &self.files[idx];
        let (w, h, c, pixels) = read_pnm(path)?;
        if (w, h, c) != (self.width, self.height, self.channels) {
            return Err(Error::DimensionMismatch(format!(
                "{} is {w}x{h}x{c}, sequence is {}x{}x{}",
                path.display(),
                self.width,
                self.height,
                self.channels
            )));
        }
        let frame = Frame::new(w, h, c, pixels, self.delivered)?;
        self.delivered += 1;
        Ok(Some(frame))
    }
}

/// Parses a binary PGM/PPM file. Returns (width, height, channels, raster).
fn read_pnm(path: &Path) -> Result<(u32, u32, u8, Vec<u8>)> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let bad = |msg: &str| Error::Malformed(format!("{}: {msg}", path.display()));

    let channels: u8 = match data.get(0..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("missing P5/P6 magic")),
    };
    pos += 2;

    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        *field = next_header_int(&data, &mut pos)
            .ok_or_else(|| bad("truncated or non-numeric header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(bad(&format!("maxval {maxval} unsupported (must be 255)")));
    }
    // Exactly one whitespace byte separates the maxval from the raster.
    match data.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("missing whitespace after maxval")),
    }

    let expected = width as usize * height as usize * channels as usize;
    if expected == 0 {
        return Err(bad("zero dimension"));
    }
    let raster = data
        .get(pos..pos + expected)
        .ok_or_else(|| bad(&format!("raster truncated: expected {expected} bytes")))?;
    Ok((width, height, channels, raster.to_vec()))
}

/// Reads the next unsigned integer token, skipping whitespace and `#` comments.
fn next_header_int(data: &[u8], pos: &mut usize) -> Option<u32> {
    loop {
        match data.get(*pos)? {
            b if b.is_ascii_whitespace() => *pos += 1,
            b'#' => {
                while *data.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while data.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&data[start..*pos]).ok()?.parse().ok()
}

/// Writes a grayscale frame as binary PGM. Re-reading the file reproduces the
/// input bit-exactly. RGB frames are rejected.
pub fn write_pgm(frame: &Frame, path: &Path) -> Result<()> {
    if frame.channels() != 1 {
        return Err(Error::invalid_param(
            "frame.channels",
            format!("{} (PGM output requires grayscale)", frame.channels()),
        ));
    }
    write_pgm_raw(frame.width(), frame.height(), frame.pixels(), path)
}

/// Writes raw 8-bit rows as binary PGM without the `Frame` minimum-size
/// constraint; used for mask dumps of any dimensions.
pub fn write_pgm_raw(width: u32, height: u32, pixels: &[u8], path: &Path) -> Result<()> {
    debug_assert_eq!(pixels.len(), width as usize * height as usize);
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    write!(out, "P5\n{width} {height}\n255\n").map_err(io_err)?;
    out.write_all(pixels).map_err(io_err)?;
    out.flush().map_err(io_err)
}

impl MaskFrame {
    /// Dumps the label image (0/255/shadow bytes) through the PGM writer.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm_raw(self.width(), self.height(), self.labels(), path)
    }
}

/// Reads a single PGM/PPM file as a frame with the given index.
pub fn read_single(path: &Path, index: u64) -> Result<Frame> {
    let (w, h, c, pixels) = read_pnm(path)?;
    Frame::new(w, h, c, pixels, index)
}
