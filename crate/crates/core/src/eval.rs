//! Scoring predicted crossing events against ground truth.
//!
//! Matching is greedy chronological per direction: each prediction takes the
//! earliest unmatched truth event of the same direction within the frame
//! tolerance. Matched pairs are true positives, leftover predictions false
//! positives, leftover truths false negatives. Precision, recall, and F1
//! follow, with vacuous cases pinned so the harness never divides by zero:
//! no predictions or no truth yields the metric 1.0, and F1 is 0 when
//! precision + recall is 0.
//!
//! The percentage summary labels its columns "accuracy" for continuity with
//! the counting-accuracy tables this harness mirrors; the number reported is
//! the F1 value.
//!
//! Everything here is a pure function over immutable inputs.

use std::path::Path;

use crate::counter::{CrossingEvent, Direction};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A manually or analytically established truth event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruthEvent {
    pub frame_index: u64,
    pub direction: Direction,
}

/// Per-direction confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_ }
    }

    /// tp / (tp + fp); 1 when there are no predictions.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// tp / (tp + fn); 1 when there is no truth.
    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// Harmonic mean of precision and recall; 0 when their sum is 0.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn combined(self, other: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }
}

pub fn average_f1(f1_enter: f64, f1_exit: f64) -> f64 {
    (f1_enter + f1_exit) / 2.0
}

/// Confusion counts for both directions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirectionalCounts {
    pub enter: ConfusionCounts,
    pub exit: ConfusionCounts,
}

/// Greedy chronological one-to-one matching within `tolerance_frames`,
/// independently per direction. Both inputs must be sorted by frame index.
pub fn match_events(
    predicted: &[CrossingEvent],
    truth: &[GroundTruthEvent],
    tolerance_frames: i64,
) -> Result<DirectionalCounts> {
    if tolerance_frames < 0 {
        return Err(Error::invalid_param(
            "eval.tolerance_frames",
            format!("{tolerance_frames} is negative"),
        ));
    }
    if !predicted.windows(2).all(|w| w[0].frame_index <= w[1].frame_index) {
        return Err(Error::Malformed(
            "predicted events are not sorted by frame".into(),
        ));
    }
    if !truth.windows(2).all(|w| w[0].frame_index <= w[1].frame_index) {
        return Err(Error::Malformed(
            "ground-truth events are not sorted by frame".into(),
        ));
    }

    let mut out = DirectionalCounts::default();
    for direction in [Direction::Enter, Direction::Exit] {
        let preds: Vec<u64> = predicted
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.frame_index)
            .collect();
        let truths: Vec<u64> = truth
            .iter()
            .filter(|e| e.direction == direction)
            .map(|e| e.frame_index)
            .collect();

        let tolerance = tolerance_frames as u64;
        let mut taken = vec![false; truths.len()];
        let mut tp = 0u64;
        for &p in &preds {
            let candidate = truths.iter().enumerate().position(|(i, &t)| {
                !taken[i] && t.abs_diff(p) <= tolerance
            });
            if let Some(i) = candidate {
                taken[i] = true;
                tp += 1;
            }
        }
        let counts = ConfusionCounts {
            tp,
            fp: preds.len() as u64 - tp,
            fn_: truths.len() as u64 - tp,
        };
        match direction {
            Direction::Enter => out.enter = counts,
            Direction::Exit => out.exit = counts,
        }
    }
    Ok(out)
}

/// Two-sided exact binomial test of H0: per-event error probability = `p0`.
///
/// The p-value sums the probabilities of every outcome no more likely than
/// the observed error count (with a 1e-7 relative slack on the comparison so
/// symmetric outcomes are not dropped to float noise).
pub fn significance_test(errors: u64, events: u64, p0: f64) -> Result<f64> {
    if errors > events {
        return Err(Error::invalid_param(
            "significance.errors",
            format!("{errors} exceeds event count {events}"),
        ));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::invalid_param(
            "significance.p0",
            format!("{p0} is outside (0, 1)"),
        ));
    }
    if events == 0 {
        return Ok(1.0);
    }

    let pmf = binomial_pmf(events, p0);
    let observed = pmf[errors as usize];
    let threshold = observed * (1.0 + 1e-7);
    let p_value: f64 = pmf.iter().filter(|&&p| p <= threshold).sum();
    Ok(p_value.min(1.0))
}

/// P(X = k) for k in 0..=n under Bin(n, p), via the multiplicative
/// recurrence from P(X = 0) = (1-p)^n.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(n as usize + 1);
    // Work in log space for the start point so large n does not underflow
    // to zero prematurely.
    let ln_q = (1.0 - p).ln();
    let mut current = (n as f64 * ln_q).exp();
    pmf.push(current);
    let odds = p / (1.0 - p);
    for k in 0..n {
        current *= (n - k) as f64 / (k + 1) as f64 * odds;
        pmf.push(current);
    }
    pmf
}

/// Per-direction metrics as they appear in the report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DirectionMetrics {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl DirectionMetrics {
    fn from_counts(c: ConfusionCounts) -> Self {
        DirectionMetrics {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
        }
    }
}

/// Percentage table: per-direction F1 and their mean, in percent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AccuracyPercent {
    pub enter: f64,
    pub exit: f64,
    pub overall: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Significance {
    pub errors: u64,
    pub events: u64,
    pub p0: f64,
    pub p_value: f64,
}

/// The machine-readable evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub enter: DirectionMetrics,
    pub exit: DirectionMetrics,
    /// Pooled counts across both directions with metrics over the pool.
    pub overall: DirectionMetrics,
    /// Mean of the per-direction F1 scores.
    pub average_f1: f64,
    /// Per-direction F1 expressed in percent ("accuracy" columns).
    pub accuracy_percent: AccuracyPercent,
    pub significance: Significance,
}

/// Assembles the report from per-direction confusion counts.
pub fn render_report(counts: DirectionalCounts, p0: f64) -> Result<MetricsReport> {
    let enter = DirectionMetrics::from_counts(counts.enter);
    let exit = DirectionMetrics::from_counts(counts.exit);
    let pooled = counts.enter.combined(counts.exit);
    let overall = DirectionMetrics::from_counts(pooled);
    let avg = average_f1(enter.f1, exit.f1);
    let errors = pooled.fp + pooled.fn_;
    let events = pooled.tp + pooled.fp + pooled.fn_;
    let p_value = significance_test(errors, events, p0)?;
    Ok(MetricsReport {
        enter,
        exit,
        overall,
        average_f1: avg,
        accuracy_percent: AccuracyPercent {
            enter: enter.f1 * 100.0,
            exit: exit.f1 * 100.0,
            overall: avg * 100.0,
        },
        significance: Significance {
            errors,
            events,
            p0,
            p_value,
        },
    })
}

impl MetricsReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Reads a ground-truth CSV: header `frame,direction`, rows sorted by frame.
/// Malformed rows are reported with their 1-based line number.
pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruthEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if lineno == 1 {
            if line.trim() != "frame,direction" {
                return Err(Error::Malformed(format!(
                    "{}: line 1: expected header `frame,direction`",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad =
            |what: &str| Error::Malformed(format!("{}: line {lineno}: {what}", path.display()));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(bad(&format!("expected 2 fields, got {}", fields.len())));
        }
        let frame_index: u64 = fields[0].trim().parse().map_err(|_| bad("bad frame"))?;
        let direction = match fields[1].trim() {
            "enter" => Direction::Enter,
            "exit" => Direction::Exit,
            other => return Err(bad(&format!("bad direction `{other}`"))),
        };
        events.push(GroundTruthEvent {
            frame_index,
            direction,
        });
    }
    if !events.windows(2).all(|w| w[0].frame_index <= w[1].frame_index) {
        return Err(Error::Malformed(format!(
            "{}: rows are not sorted by frame",
            path.display()
        )));
    }
    Ok(events)
}

/// Writes a ground-truth CSV in the format `read_truth_csv` accepts.
pub fn write_truth_csv(events: &[GroundTruthEvent], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = String::from("frame,direction\n");
    for e in events {
        out.push_str(&format!("{},{}\n", e.frame_index, e.direction));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
