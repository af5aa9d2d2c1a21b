//! Foreground-mask refinement and blob extraction.
//!
//! Masks are cleaned with morphological opening then closing using a square
//! structuring element of side `2r + 1` (the fixed approximation of a disc
//! this crate uses). Erosion treats out-of-frame pixels as foreground and
//! dilation treats them as background; with these conventions opening and
//! closing are exact algebraic openings/closings on the frame window, so the
//! open-then-close filter is idempotent.
//!
//! All operations here are pure and safe to run on multiple frames
//! concurrently.

use crate::mog2::{MaskFrame, BACKGROUND, FOREGROUND};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// How shadow labels fold into the binary mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowPolicy {
    /// Shadow pixels count as background (default).
    #[default]
    TreatAsBackground,
    /// Shadow pixels count as foreground.
    TreatAsForeground,
}

/// Mask post-processing parameters. Names are the canonical config keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphParams {
    /// Opening radius in pixels (erode then dilate); 0 disables.
    pub open_radius: u32,
    /// Closing radius in pixels (dilate then erode); 0 disables.
    pub close_radius: u32,
    /// Blobs below this area are dropped. `None` means 0.5% of frame area.
    pub min_blob_area: Option<u32>,
    pub shadow_policy: ShadowPolicy,
}

impl Default for MorphParams {
    fn default() -> Self {
        MorphParams {
            open_radius: 1,
            close_radius: 2,
            min_blob_area: None,
            shadow_policy: ShadowPolicy::default(),
        }
    }
}

impl MorphParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_blob_area == Some(0) {
            return Err(Error::invalid_param("blob.min_blob_area", "must be >= 1"));
        }
        Ok(())
    }

    /// The effective area threshold for a given frame size.
    pub fn resolved_min_blob_area(&self, width: u32, height: u32) -> u32 {
        self.min_blob_area
            .unwrap_or_else(|| ((width as u64 * height as u64) / 200).max(1) as u32)
    }
}

/// Row-major boolean foreground flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), width as usize * height as usize);
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// 255/0 bytes for PGM export.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .iter()
            .map(|&b| if b { FOREGROUND } else { BACKGROUND })
            .collect()
    }
}

/// Foreground labels become true, background false, shadow per policy.
pub fn binarize(mask: &MaskFrame, policy: ShadowPolicy) -> BinaryMask {
    let shadow_as_fg = policy == ShadowPolicy::TreatAsForeground;
    let bits = mask
        .labels()
        .iter()
        .map(|&l| l == FOREGROUND || (shadow_as_fg && l == mask.shadow_value()))
        .collect();
    BinaryMask::new(mask.width(), mask.height(), bits)
}

/// Morphological opening (specks away) followed by closing (holes filled).
pub fn clean_mask(mask: &BinaryMask, params: &MorphParams) -> BinaryMask {
    let opened = if params.open_radius > 0 {
        dilate(&erode(mask, params.open_radius), params.open_radius)
    } else {
        mask.clone()
    };
    if params.close_radius > 0 {
        erode(&dilate(&opened, params.close_radius), params.close_radius)
    } else {
        opened
    }
}

/// Separable min filter over a (2r+1)-square; out-of-frame counts as true.
fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    filter_square(mask, radius, true)
}

/// Separable max filter over a (2r+1)-square; out-of-frame counts as false.
fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    filter_square(mask, radius, false)
}

/// Both morphology primitives reduce to a windowed popcount: erosion needs
/// every in-frame cell of the window true (out-of-frame counts as true by
/// clipping), dilation needs any cell true (out-of-frame counts as false).
/// A summed-area table answers each clipped window in O(1) with two
/// row-major passes over the image.
fn filter_square(mask: &BinaryMask, radius: u32, erode: bool) -> BinaryMask {
    let (w, h, r) = (mask.width as usize, mask.height as usize, radius as usize);
    let stride = w + 1;
    let mut sat = vec![0u32; stride * (h + 1)];
    for y in 0..h {
        let src = &mask.bits[y * w..(y + 1) * w];
        let (above, current) = sat.split_at_mut((y + 1) * stride);
        let above = &above[y * stride..];
        let current = &mut current[..stride];
        let mut row = 0u32;
        for x in 0..w {
            row += src[x] as u32;
            current[x + 1] = above[x + 1] + row;
        }
    }

    let mut out = vec![false; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        let top = &sat[y0 * stride..y0 * stride + stride];
        let bottom = &sat[(y1 + 1) * stride..(y1 + 1) * stride + stride];
        let dst = &mut out[y * w..(y + 1) * w];
        for (x, d) in dst.iter_mut().enumerate() {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(w - 1);
            let count = bottom[x1 + 1] + top[x0] - bottom[x0] - top[x1 + 1];
            *d = if erode {
                count as usize == (x1 - x0 + 1) * (y1 - y0 + 1)
            } else {
                count > 0
            };
        }
    }
    BinaryMask::new(mask.width, mask.height, out)
}

/// Connected-component label image: background 0, components 1..=count.
#[derive(Debug, Clone)]
pub struct LabelImage {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub count: u32,
}

/// 8-connectivity labeling. Labels are assigned in raster order of each
/// component's first-encountered pixel, which makes the output deterministic.
pub fn connected_components(mask: &BinaryMask) -> LabelImage {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    let mut queue: Vec<usize> = Vec::new();

    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push(start);
        while let Some(idx) = queue.pop() {
            let (x, y) = (idx % w, idx / w);
            let x_lo = x.saturating_sub(1);
            let x_hi = (x + 1).min(w - 1);
            let y_lo = y.saturating_sub(1);
            let y_hi = (y + 1).min(h - 1);
            for ny in y_lo..=y_hi {
                for nx in x_lo..=x_hi {
                    let nidx = ny * w + nx;
                    if mask.bits[nidx] && labels[nidx] == 0 {
                        labels[nidx] = count;
                        queue.push(nidx);
                    }
                }
            }
        }
    }

    LabelImage {
        width: mask.width,
        height: mask.height,
        labels,
        count,
    }
}

/// A connected foreground region treated as one object observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// Member pixel count.
    pub area: u32,
    /// Arithmetic mean of member pixel coordinates; sub-pixel, not rounded.
    pub centroid: (f64, f64),
    /// Inclusive bounding box (min_x, min_y, max_x, max_y).
    pub bounding_box: (u32, u32, u32, u32),
}

/// One blob per component with `area >= min_blob_area`, ordered by label.
pub fn extract_blobs(labels: &LabelImage, min_blob_area: u32) -> Vec<Blob> {
    #[derive(Clone)]
    struct Acc {
        area: u64,
        sum_x: u64,
        sum_y: u64,
        min_x: u32,
        min_y: u32,
        max_x: u32,
        max_y: u32,
    }
    let mut accs = vec![
        Acc {
            area: 0,
            sum_x: 0,
            sum_y: 0,
            min_x: u32::MAX,
            min_y: u32::MAX,
            max_x: 0,
            max_y: 0,
        };
        labels.count as usize
    ];
    let w = labels.width as usize;
    for (idx, &label) in labels.labels.iter().enumerate() {
        if label == 0 {
            continue;
        }
        let acc = &mut accs[label as usize - 1];
        let (x, y) = ((idx % w) as u32, (idx / w) as u32);
        acc.area += 1;
        acc.sum_x += x as u64;
        acc.sum_y += y as u64;
        acc.min_x = acc.min_x.min(x);
        acc.min_y = acc.min_y.min(y);
        acc.max_x = acc.max_x.max(x);
        acc.max_y = acc.max_y.max(y);
    }
    accs.iter()
        .filter(|a| a.area >= min_blob_area as u64)
        .map(|a| Blob {
            area: a.area as u32,
            centroid: (a.sum_x as f64 / a.area as f64, a.sum_y as f64 / a.area as f64),
            bounding_box: (a.min_x, a.min_y, a.max_x, a.max_y),
        })
        .collect()
}
