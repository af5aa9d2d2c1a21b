//! Virtual-line crossing counter.
//!
//! Confirmed tracks drive a per-track arming automaton: a track arms on a
//! side once it sits at least `hysteresis` pixels from the line, and fires
//! one event when it later sits at least `hysteresis` pixels on the other
//! side. Within `debounce` frames of a counted crossing the automaton is
//! frozen (no event, no re-arm), so consecutive counted events for a track
//! always alternate in direction. Collinear centroids neither arm nor fire.
//!
//! Every crossing is counted, including repeat crossings by the same person;
//! deduplicating a person across crossings would require identity, which is
//! out of scope.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::tracker::Track;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Enter,
    Exit,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Enter => "enter",
            Direction::Exit => "exit",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The configured counting line. Crossing from the `enter_sign` side to the
/// opposite side counts as an entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountingLine {
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    /// +1 or -1: the side whose departure means ENTER.
    pub enter_sign: i8,
    /// Minimum unsigned distance from the line required on both sides of a
    /// counted crossing, in pixels.
    pub hysteresis: f64,
    /// Per-track minimum frame gap between counted crossings.
    pub debounce: u64,
}

impl CountingLine {
    pub fn validate(&self) -> Result<()> {
        let coords = [self.p1.0, self.p1.1, self.p2.0, self.p2.1];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid_param(
                "counter.line",
                "endpoints must be finite",
            ));
        }
        if self.p1 == self.p2 {
            return Err(Error::invalid_param(
                "counter.line",
                "endpoints must differ",
            ));
        }
        if self.enter_sign != 1 && self.enter_sign != -1 {
            return Err(Error::invalid_param(
                "counter.enter_sign",
                format!("{} (must be +1 or -1)", self.enter_sign),
            ));
        }
        if !self.hysteresis.is_finite() || self.hysteresis < 0.0 {
            return Err(Error::invalid_param("counter.hysteresis", "must be >= 0"));
        }
        Ok(())
    }

    fn length(&self) -> f64 {
        ((self.p2.0 - self.p1.0).powi(2) + (self.p2.1 - self.p1.1).powi(2)).sqrt()
    }

    /// Signed distance of `point` from the line: positive on the +1 side.
    pub fn signed_distance(&self, point: (f64, f64)) -> f64 {
        cross_z(self.p1, self.p2, point) / self.length()
    }
}

/// Sign of the z-component of (p2 - p1) x (point - p1): which side of the
/// line the point lies on; 0 iff exactly collinear.
pub fn side_of_line(point: (f64, f64), line: &CountingLine) -> i8 {
    let z = cross_z(line.p1, line.p2, point);
    if z > 0.0 {
        1
    } else if z < 0.0 {
        -1
    } else {
        0
    }
}

fn cross_z(p1: (f64, f64), p2: (f64, f64), point: (f64, f64)) -> f64 {
    (p2.0 - p1.0) * (point.1 - p1.1) - (p2.1 - p1.1) * (point.0 - p1.0)
}

/// A single counted enter/exit occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingEvent {
    pub frame_index: u64,
    pub track_id: u64,
    pub direction: Direction,
    /// Track centroid at the counted crossing.
    pub position: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct TrackMemory {
    armed_side: i8,
    last_counted: Option<u64>,
}

pub struct Counter {
    line: CountingLine,
    enter_total: u64,
    exit_total: u64,
    memory: HashMap<u64, TrackMemory>,
    last_frame: Option<u64>,
}

impl Counter {
    pub fn new(line: CountingLine) -> Result<Self> {
        line.validate()?;
        Ok(Counter {
            line,
            enter_total: 0,
            exit_total: 0,
            memory: HashMap::new(),
            last_frame: None,
        })
    }

    pub fn line(&self) -> &CountingLine {
        &self.line
    }

    pub fn enter_total(&self) -> u64 {
        self.enter_total
    }

    pub fn exit_total(&self) -> u64 {
        self.exit_total
    }

    /// Entries minus exits; negative when exits outnumber entries.
    pub fn occupancy(&self) -> i64 {
        self.enter_total as i64 - self.exit_total as i64
    }

    /// Advances the automaton with this frame's tracks and returns the
    /// events counted at this frame, in track order. Tentative tracks and
    /// tracks without a current-frame centroid are ignored.
    pub fn update(&mut self, tracks: &[Track], frame_index: u64) -> Result<Vec<CrossingEvent>> {
        if let Some(last) = self.last_frame {
            if frame_index <= last {
                return Err(Error::invalid_param(
                    "frame_index",
                    format!("{frame_index} does not increase past {last}"),
                ));
            }
        }
        self.last_frame = Some(frame_index);

        let mut events = Vec::new();
        for track in tracks {
            if !track.is_confirmed() {
                continue;
            }
            let Some(position) = track.centroid_at(frame_index) else {
                continue;
            };
            let distance = self.line.signed_distance(position);
            let side = if distance > 0.0 {
                1
            } else if distance < 0.0 {
                -1
            } else {
                0
            };
            if side == 0 || distance.abs() < self.line.hysteresis {
                continue;
            }

            match self.memory.get_mut(&track.id) {
                None => {
                    self.memory.insert(
                        track.id,
                        TrackMemory {
                            armed_side: side,
                            last_counted: None,
                        },
                    );
                }
                Some(mem) if mem.armed_side == side => {}
                Some(mem) => {
                    // Opposite side beyond hysteresis: a crossing, unless the
                    // debounce window is still open.
                    let suppressed = mem
                        .last_counted
                        .is_some_and(|last| frame_index - last < self.line.debounce);
                    if suppressed {
                        continue;
                    }
                    let direction = if mem.armed_side == self.line.enter_sign {
                        Direction::Enter
                    } else {
                        Direction::Exit
                    };
                    mem.armed_side = side;
                    mem.last_counted = Some(frame_index);
                    match direction {
                        Direction::Enter => self.enter_total += 1,
                        Direction::Exit => self.exit_total += 1,
                    }
                    events.push(CrossingEvent {
                        frame_index,
                        track_id: track.id,
                        direction,
                        position,
                    });
                }
            }
        }
        Ok(events)
    }
}

/// Streams events to CSV: `frame,track_id,direction,x,y`.
pub struct EventCsvWriter<W: Write> {
    out: W,
}

impl EventCsvWriter<std::io::BufWriter<std::fs::File>> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        Self::from_writer(std::io::BufWriter::new(file))
    }
}

impl<W: Write> EventCsvWriter<W> {
    pub fn from_writer(mut out: W) -> Result<Self> {
        writeln!(out, "frame,track_id,direction,x,y")
            .map_err(|e| Error::Malformed(format!("event csv write failed: {e}")))?;
        Ok(EventCsvWriter { out })
    }

    pub fn write_event(&mut self, event: &CrossingEvent) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{:.3},{:.3}",
            event.frame_index,
            event.track_id,
            event.direction,
            event.position.0,
            event.position.1
        )
        .map_err(|e| Error::Malformed(format!("event csv write failed: {e}")))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out
            .flush()
            .map_err(|e| Error::Malformed(format!("event csv flush failed: {e}")))
    }
}

/// Parses an events CSV produced by [`EventCsvWriter`]. Malformed rows are
/// reported with their 1-based line number.
pub fn read_events_csv(path: &Path) -> Result<Vec<CrossingEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if lineno == 1 {
            if line.trim() != "frame,track_id,direction,x,y" {
                return Err(Error::Malformed(format!(
                    "{}: line 1: expected header `frame,track_id,direction,x,y`",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| {
            Error::Malformed(format!("{}: line {lineno}: {what}", path.display()))
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(&format!("expected 5 fields, got {}", fields.len())));
        }
        let frame_index: u64 = fields[0].trim().parse().map_err(|_| bad("bad frame"))?;
        let track_id: u64 = fields[1].trim().parse().map_err(|_| bad("bad track_id"))?;
        let direction = match fields[2].trim() {
            "enter" => Direction::Enter,
            "exit" => Direction::Exit,
            other => return Err(bad(&format!("bad direction `{other}`"))),
        };
        let x: f64 = fields[3].trim().parse().map_err(|_| bad("bad x"))?;
        let y: f64 = fields[4].trim().parse().map_err(|_| bad("bad y"))?;
        events.push(CrossingEvent {
            frame_index,
            track_id,
            direction,
            position: (x, y),
        });
    }
    Ok(events)
}
