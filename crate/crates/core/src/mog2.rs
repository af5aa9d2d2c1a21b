//! Per-pixel adaptive Gaussian-mixture background subtraction.
//!
//! Each pixel carries up to `max_components` Gaussian components ordered by
//! descending weight. Every frame, the sample is matched against the mixture,
//! weights decay (a constant pruning term deletes stale components, which is
//! what adapts the per-pixel component count automatically), the matched
//! component absorbs the sample, and the pixel is labeled background when the
//! matched component falls inside the cumulative-weight background set.
//! Arithmetic is f64 per pixel; the mask is the only quantized output.
//!
//! The update is deterministic: identical frame sequences and parameters
//! yield identical mask sequences and model state.

use crate::video_io::Frame;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mask label for foreground pixels.
pub const FOREGROUND: u8 = 255;
/// Mask label for background pixels.
pub const BACKGROUND: u8 = 0;

/// Subtractor parameters. Field names are the canonical config-file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mog2Params {
    /// Learning-rate horizon in frames: the rate settles at `1/history`
    /// after warmup.
    pub history: u64,
    /// Squared-Mahalanobis match threshold.
    pub var_threshold: f64,
    /// Maximum Gaussian components per pixel.
    pub max_components: usize,
    /// Cumulative-weight fraction defining the background set, in (0,1).
    pub background_ratio: f64,
    /// Initial variance of a newly inserted component.
    pub var_init: f64,
    /// Variance clamp lower bound.
    pub var_min: f64,
    /// Variance clamp upper bound.
    pub var_max: f64,
    /// Complexity-reduction constant, scaled by the learning rate and
    /// subtracted from every weight each update. Must lie in [0, 1).
    pub weight_prune: f64,
    /// Label foreground pixels that look like darkened background as shadow.
    /// Requires 3-channel input.
    pub detect_shadows: bool,
    /// Mask label used for shadow pixels.
    pub shadow_value: u8,
    /// Brightness-ratio lower bound for the shadow test, in (0,1).
    pub shadow_threshold: f64,
}

impl Default for Mog2Params {
    fn default() -> Self {
        Mog2Params {
            history: 500,
            var_threshold: 16.0,
            max_components: 5,
            background_ratio: 0.9,
            var_init: 15.0,
            var_min: 4.0,
            var_max: 75.0,
            weight_prune: 0.05 / 5.0,
            detect_shadows: false,
            shadow_value: 127,
            shadow_threshold: 0.5,
        }
    }
}

impl Mog2Params {
    pub fn validate(&self) -> Result<()> {
        if self.history < 1 {
            return Err(Error::invalid_param("mog2.history", "must be >= 1"));
        }
        if self.max_components < 1 {
            return Err(Error::invalid_param("mog2.max_components", "must be >= 1"));
        }
        let in_open_unit = |v: f64| v.is_finite() && v > 0.0 && v < 1.0;
        if !in_open_unit(self.background_ratio) {
            return Err(Error::invalid_param(
                "mog2.background_ratio",
                format!("{} is outside (0, 1)", self.background_ratio),
            ));
        }
        if !self.var_threshold.is_finite() || self.var_threshold <= 0.0 {
            return Err(Error::invalid_param("mog2.var_threshold", "must be > 0"));
        }
        let variances_ordered = self.var_min.is_finite()
            && self.var_max.is_finite()
            && 0.0 < self.var_min
            && self.var_min <= self.var_init
            && self.var_init <= self.var_max;
        if !variances_ordered {
            return Err(Error::invalid_param(
                "mog2.var_init",
                format!(
                    "need 0 < var_min <= var_init <= var_max, got {} / {} / {}",
                    self.var_min, self.var_init, self.var_max
                ),
            ));
        }
        let prune_ok =
            self.weight_prune.is_finite() && self.weight_prune >= 0.0 && self.weight_prune < 1.0;
        if !prune_ok {
            return Err(Error::invalid_param(
                "mog2.weight_prune",
                format!("{} is outside [0, 1)", self.weight_prune),
            ));
        }
        if !in_open_unit(self.shadow_threshold) {
            return Err(Error::invalid_param(
                "mog2.shadow_threshold",
                format!("{} is outside (0, 1)", self.shadow_threshold),
            ));
        }
        if self.shadow_value == BACKGROUND || self.shadow_value == FOREGROUND {
            return Err(Error::invalid_param(
                "mog2.shadow_value",
                "must differ from the background (0) and foreground (255) labels",
            ));
        }
        Ok(())
    }
}

/// One Gaussian of a pixel's mixture, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    /// Mixing weight in [0, 1].
    pub weight: f64,
    /// Per-channel mean intensity.
    pub mean: Vec<f64>,
    /// Shared scalar variance, clamped to [var_min, var_max].
    pub variance: f64,
}

/// Per-pixel classification output: 0 background, 255 foreground, and the
/// configured shadow label when shadow detection is on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    width: u32,
    height: u32,
    labels: Vec<u8>,
    shadow_value: u8,
}

impl MaskFrame {
    /// Builds a mask from raw labels, rejecting any byte that is not 0, 255,
    /// or `shadow_value`.
    pub fn new(width: u32, height: u32, labels: Vec<u8>, shadow_value: u8) -> Result<Self> {
        if labels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} labels for {width}x{height}",
                labels.len()
            )));
        }
        if let Some(bad) = labels
            .iter()
            .find(|&&l| l != BACKGROUND && l != FOREGROUND && l != shadow_value)
        {
            return Err(Error::invalid_param(
                "mask.labels",
                format!("label {bad} is not 0, 255, or {shadow_value}"),
            ));
        }
        Ok(MaskFrame {
            width,
            height,
            labels,
            shadow_value,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn shadow_value(&self) -> u8 {
        self.shadow_value
    }

    /// Fraction of pixels labeled foreground (shadow excluded).
    pub fn foreground_fraction(&self) -> f64 {
        let fg = self.labels.iter().filter(|&&l| l == FOREGROUND).count();
        fg as f64 / self.labels.len() as f64
    }
}

/// The stateful mixture model for a full frame.
///
/// `apply` mutates the model and must be externally serialized per model;
/// distinct models are fully independent.
#[derive(Debug)]
pub struct BackgroundModel {
    width: u32,
    height: u32,
    channels: usize,
    params: Mog2Params,
    frames_seen: u64,
    // Flat per-pixel slot storage: pixel p owns slots [p*K, p*K + ncomp[p]).
    ncomp: Vec<u8>,
    weights: Vec<f64>,
    means: Vec<f64>, // slot-major, channels interleaved
    variances: Vec<f64>,
    ages: Vec<u32>, // insertion frame; unique per pixel, smaller = older
}

impl BackgroundModel {
    /// Creates an empty model: zero components per pixel, no frames seen.
    pub fn new(width: u32, height: u32, channels: u8, params: Mog2Params) -> Result<Self> {
        params.validate()?;
        if width == 0 || height == 0 {
            return Err(Error::invalid_param(
                "model",
                format!("{width}x{height} has a zero dimension"),
            ));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid_param(
                "model.channels",
                format!("{channels} (must be 1 or 3)"),
            ));
        }
        if params.detect_shadows && channels != 3 {
            return Err(Error::invalid_param(
                "mog2.detect_shadows",
                "shadow detection requires 3-channel input",
            ));
        }
        let npix = width as usize * height as usize;
        let slots = npix * params.max_components;
        Ok(BackgroundModel {
            width,
            height,
            channels: channels as usize,
            frames_seen: 0,
            ncomp: vec![0; npix],
            weights: vec![0.0; slots],
            means: vec![0.0; slots * channels as usize],
            variances: vec![0.0; slots],
            ages: vec![0; slots],
            params,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels as u8
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn params(&self) -> &Mog2Params {
        &self.params
    }

    /// Classifies a frame and advances the model state.
    ///
    /// `learning_rate_override`, when given, replaces the automatic rate
    /// `max(1/frames_seen, 1/history)` and must lie in [0, 1].
    pub fn apply(&mut self, frame: &Frame, learning_rate_override: Option<f64>) -> Result<MaskFrame> {
        if (frame.width(), frame.height(), frame.channels() as usize)
            != (self.width, self.height, self.channels)
        {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}x{}, model is {}x{}x{}",
                frame.width(),
                frame.height(),
                frame.channels(),
                self.width,
                self.height,
                self.channels
            )));
        }
        self.apply_raw(frame.pixels(), learning_rate_override)
    }

    /// `apply` without the `Frame` wrapper: `pixels` is the row-major,
    /// channel-interleaved raster matching the model dimensions.
    pub fn apply_raw(
        &mut self,
        pixels: &[u8],
        learning_rate_override: Option<f64>,
    ) -> Result<MaskFrame> {
        let npix = self.width as usize * self.height as usize;
        if pixels.len() != npix * self.channels {
            return Err(Error::DimensionMismatch(format!(
                "raster has {} bytes, model needs {}",
                pixels.len(),
                npix * self.channels
            )));
        }
        if let Some(lr) = learning_rate_override {
            if !(0.0..=1.0).contains(&lr) {
                return Err(Error::invalid_param(
                    "learning_rate_override",
                    format!("{lr} is outside [0, 1]"),
                ));
            }
        }

        self.frames_seen += 1;
        let alpha = match learning_rate_override {
            Some(a) => a,
            None => (1.0 / self.frames_seen as f64).max(1.0 / self.params.history as f64),
        };
        let age_now = self.frames_seen as u32;

        let mut labels = vec![FOREGROUND; npix];
        let mut sample = [0.0f64; 3];
        for (pix, label) in labels.iter_mut().enumerate() {
            let raw = &pixels[pix * self.channels..(pix + 1) * self.channels];
            for (s, &p) in sample.iter_mut().zip(raw) {
                *s = p as f64;
            }
            *label = self.update_pixel(pix, &sample[..self.channels], alpha, age_now);
        }

        Ok(MaskFrame {
            width: self.width,
            height: self.height,
            labels,
            shadow_value: self.params.shadow_value,
        })
    }

    fn update_pixel(&mut self, pix: usize, x: &[f64], alpha: f64, age_now: u32) -> u8 {
        let k_max = self.params.max_components;
        let ch_n = self.channels;
        let base = pix * k_max;
        let mbase = base * ch_n;
        let mut n = self.ncomp[pix] as usize;

        // 1. match: first component within the squared-distance gate.
        let mut matched_age: Option<u32> = None;
        for k in 0..n {
            let mut dist2 = 0.0;
            for (ch, &xv) in x.iter().enumerate() {
                let d = xv - self.means[mbase + k * ch_n + ch];
                dist2 += d * d;
            }
            if dist2 <= self.params.var_threshold * self.variances[base + k] {
                matched_age = Some(self.ages[base + k]);
                break;
            }
        }

        // 2. decay all weights, boost the match, drop non-positive weights.
        for k in 0..n {
            let w = self.weights[base + k];
            let mut w = w - alpha * (w + self.params.weight_prune);
            if matched_age == Some(self.ages[base + k]) {
                w += alpha;
            }
            self.weights[base + k] = w;
        }
        let mut keep = 0usize;
        for k in 0..n {
            if self.weights[base + k] > 0.0 {
                if keep != k {
                    self.copy_slot(base, mbase, k, keep);
                }
                keep += 1;
            }
        }
        n = keep;

        // 3./4. absorb the sample or insert a fresh component.
        if let Some(age) = matched_age {
            let k = (0..n).find(|&k| self.ages[base + k] == age).unwrap();
            let ratio = alpha / self.weights[base + k];
            let mut dist2 = 0.0;
            let means = &mut self.means[mbase + k * ch_n..mbase + (k + 1) * ch_n];
            for (&xv, mean) in x.iter().zip(means) {
                let d = xv - *mean;
                dist2 += d * d;
                *mean += ratio * d;
            }
            let target = dist2 / ch_n as f64;
            let v = self.variances[base + k];
            self.variances[base + k] =
                (v + ratio * (target - v)).clamp(self.params.var_min, self.params.var_max);
        } else {
            let slot = if n == k_max {
                // Replace the lowest-weight component (last among equals).
                let mut min_idx = 0;
                for k in 1..n {
                    if self.weights[base + k] <= self.weights[base + min_idx] {
                        min_idx = k;
                    }
                }
                min_idx
            } else {
                n += 1;
                n - 1
            };
            self.weights[base + slot] = alpha;
            self.means[mbase + slot * ch_n..mbase + (slot + 1) * ch_n].copy_from_slice(x);
            self.variances[base + slot] = self.params.var_init;
            self.ages[base + slot] = age_now;
        }

        // 5. renormalize in slot order, then insertion-sort descending by
        // (weight, age). Ages are unique, so the order is total and any
        // correct sort yields the same permutation.
        let mut sum = 0.0;
        for k in 0..n {
            sum += self.weights[base + k];
        }
        if sum > 0.0 {
            for k in 0..n {
                self.weights[base + k] /= sum;
            }
        }
        for k in 1..n {
            let mut j = k;
            while j > 0 {
                let (wp, wc) = (self.weights[base + j - 1], self.weights[base + j]);
                let out_of_order =
                    wc > wp || (wc == wp && self.ages[base + j] < self.ages[base + j - 1]);
                if !out_of_order {
                    break;
                }
                self.swap_slots(base, mbase, j - 1, j);
                j -= 1;
            }
        }
        self.ncomp[pix] = n as u8;

        // 6. background-set membership decides the label.
        let mut label = FOREGROUND;
        if let Some(age) = matched_age {
            let pos = (0..n).find(|&k| self.ages[base + k] == age).unwrap();
            let mut cum = 0.0;
            let mut prefix_len = n;
            for k in 0..n {
                cum += self.weights[base + k];
                if cum > self.params.background_ratio {
                    prefix_len = k + 1;
                    break;
                }
            }
            if pos < prefix_len {
                label = BACKGROUND;
            }
        }

        // 7. shadow: a dimmed version of the dominant component's color.
        if label == FOREGROUND && self.params.detect_shadows && ch_n == 3 {
            let dominant = &self.means[mbase..mbase + 3];
            let mut num = 0.0;
            let mut den = 0.0;
            for (&xv, &m) in x.iter().zip(dominant) {
                num += xv * m;
                den += m * m;
            }
            if den > 0.0 {
                let b = num / den;
                if b >= self.params.shadow_threshold && b <= 1.0 {
                    let mut dist2 = 0.0;
                    for (&xv, &m) in x.iter().zip(dominant) {
                        let d = xv - b * m;
                        dist2 += d * d;
                    }
                    if dist2 <= self.params.var_threshold * self.variances[base] {
                        label = self.params.shadow_value;
                    }
                }
            }
        }

        label
    }

    fn copy_slot(&mut self, base: usize, mbase: usize, from: usize, to: usize) {
        self.weights[base + to] = self.weights[base + from];
        self.variances[base + to] = self.variances[base + from];
        self.ages[base + to] = self.ages[base + from];
        for ch in 0..self.channels {
            self.means[mbase + to * self.channels + ch] =
                self.means[mbase + from * self.channels + ch];
        }
    }

    fn swap_slots(&mut self, base: usize, mbase: usize, a: usize, b: usize) {
        self.weights.swap(base + a, base + b);
        self.variances.swap(base + a, base + b);
        self.ages.swap(base + a, base + b);
        for ch in 0..self.channels {
            self.means
                .swap(mbase + a * self.channels + ch, mbase + b * self.channels + ch);
        }
    }

    /// The pixel's components in stored (descending-weight) order.
    pub fn components_at(&self, x: u32, y: u32) -> Vec<GaussianComponent> {
        assert!(x < self.width && y < self.height);
        let pix = y as usize * self.width as usize + x as usize;
        let base = pix * self.params.max_components;
        let mbase = base * self.channels;
        (0..self.ncomp[pix] as usize)
            .map(|k| GaussianComponent {
                weight: self.weights[base + k],
                mean: self.means[mbase + k * self.channels..mbase + (k + 1) * self.channels]
                    .to_vec(),
                variance: self.variances[base + k],
            })
            .collect()
    }

    /// Estimated background: per-pixel rounded mean of the dominant component.
    /// Fails on a model that has not seen any frame.
    pub fn background_image(&self) -> Result<Frame> {
        if self.frames_seen == 0 {
            return Err(Error::invalid_param(
                "model",
                "background image requested before any frame was applied",
            ));
        }
        let npix = self.width as usize * self.height as usize;
        let mut pixels = vec![0u8; npix * self.channels];
        for pix in 0..npix {
            let base = pix * self.params.max_components;
            let mbase = base * self.channels;
            for ch in 0..self.channels {
                let mean = if self.ncomp[pix] > 0 {
                    self.means[mbase + ch]
                } else {
                    0.0
                };
                pixels[pix * self.channels + ch] = mean.round().clamp(0.0, 255.0) as u8;
            }
        }
        Frame::new(self.width, self.height, self.channels as u8, pixels, 0)
    }
}
