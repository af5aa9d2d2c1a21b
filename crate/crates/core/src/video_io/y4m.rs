//! YUV4MPEG2 reader. Frames are built from the luma plane only; 4:2:0 chroma
//! planes are skipped byte-exactly. Colorspaces other than 4:2:0 variants,
//! mono, or an absent `C` tag (which implies 4:2:0) are rejected.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::{Frame, FrameStream};
use crate::{Error, Result};

const SIGNATURE: &[u8] = b"YUV4MPEG2";

pub struct Y4mStream<R: Read = BufReader<File>> {
    reader: R,
    width: u32,
    height: u32,
    /// Bytes of chroma payload to skip after each luma plane.
    chroma_bytes: usize,
    delivered: u64,
    source: String,
}

impl Y4mStream<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), path.display().to_string())
    }
}

impl<R: Read> Y4mStream<R> {
    /// Parses the stream header from any byte source. `source` names the
    /// stream in error messages.
    pub fn from_reader(mut reader: R, source: String) -> Result<Self> {
        let header = read_line(&mut reader)
            .map_err(|e| Error::Malformed(format!("{source}: {e}")))?;
        if !header.starts_with(SIGNATURE) {
            return Err(Error::Malformed(format!(
                "{source}: missing YUV4MPEG2 signature"
            )));
        }

        let mut width: Option<u32> = None;
        let mut height: Option<u32> = None;
        let mut chroma: Option<String> = None;
        let tags = std::str::from_utf8(&header[SIGNATURE.len()..])
            .map_err(|_| Error::Malformed(format!("{source}: non-UTF8 stream header")))?;
        for tag in tags.split_ascii_whitespace() {
            let (key, value) = tag.split_at(1);
            match key {
                "W" => width = value.parse().ok(),
                "H" => height = value.parse().ok(),
                "C" => chroma = Some(value.to_string()),
                // F (rate), I (interlacing), A (aspect), X (extension) carry
                // no information this pipeline uses.
                _ => {}
            }
        }
        let width = width
            .ok_or_else(|| Error::Malformed(format!("{source}: header missing W tag")))?;
        let height = height
            .ok_or_else(|| Error::Malformed(format!("{source}: header missing H tag")))?;

        let chroma_bytes = match chroma.as_deref() {
            // Absent C tag means 4:2:0 by convention.
            None | Some("420" | "420jpeg" | "420mpeg2" | "420paldv") => {
                2 * (width.div_ceil(2) as usize * height.div_ceil(2) as usize)
            }
            Some("mono") => 0,
            Some(other) => {
                return Err(Error::Malformed(format!(
                    "{source}: unsupported chroma tag C{other} (only 4:2:0 and mono)"
                )))
            }
        };

        Ok(Y4mStream {
            reader,
            width,
            height,
            chroma_bytes,
            delivered: 0,
            source,
        })
    }
}

impl<R: Read> FrameStream for Y4mStream<R> {
    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    fn channels(&self) -> u8 {
        1
    }

    fn frames_delivered(&self) -> u64 {
        self.delivered
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        // Each frame starts with a "FRAME" marker line (optional parameters
        // up to the newline), then planar Y [U V] payload.
        let marker = match read_line(&mut self.reader) {
            Ok(line) => line,
            Err(ReadLineError::Eof) => return Ok(None),
            Err(e) => {
                return Err(Error::Malformed(format!(
                    "{}: frame {}: {e}",
                    self.source, self.delivered
                )))
            }
        };
        if !marker.starts_with(b"FRAME") {
            return Err(Error::Malformed(format!(
                "{}: frame {}: expected FRAME marker",
                self.source, self.delivered
            )));
        }

        let luma_len = self.width as usize * self.height as usize;
        let mut luma = vec![0u8; luma_len];
        self.reader.read_exact(&mut luma).map_err(|_| {
            Error::Malformed(format!(
                "{}: frame {}: truncated luma plane",
                self.source, self.delivered
            ))
        })?;
        // Skip chroma byte-exactly so the next marker lines up.
        let mut chroma = vec![0u8; self.chroma_bytes];
        self.reader.read_exact(&mut chroma).map_err(|_| {
            Error::Malformed(format!(
                "{}: frame {}: truncated chroma planes",
                self.source, self.delivered
            ))
        })?;

        let frame = Frame::new(self.width, self.height, 1, luma, self.delivered)?;
        self.delivered += 1;
        Ok(Some(frame))
    }
}

enum ReadLineError {
    Eof,
    Io(std::io::Error),
    TooLong,
}

impl std::fmt::Display for ReadLineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReadLineError::Eof => write!(f, "unexpected end of stream"),
            ReadLineError::Io(e) => write!(f, "read error: {e}"),
            ReadLineError::TooLong => write!(f, "header line exceeds 4096 bytes"),
        }
    }
}

/// Reads bytes up to (not including) the next `\n`. EOF before any byte is
/// distinguished so the frame loop can terminate cleanly.
fn read_line<R: Read>(reader: &mut R) -> std::result::Result<Vec<u8>, ReadLineError> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read(&mut byte) {
            Ok(0) => {
                return if line.is_empty() {
                    Err(ReadLineError::Eof)
                } else {
                    Err(ReadLineError::Io(std::io::Error::new(
                        std::io::ErrorKind::UnexpectedEof,
                        "stream ended mid-line",
                    )))
                }
            }
            Ok(_) => {
                if byte[0] == b'\n' {
                    return Ok(line);
                }
                line.push(byte[0]);
                if line.len() > 4096 {
                    return Err(ReadLineError::TooLong);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(ReadLineError::Io(e)),
        }
    }
}
