//! Scalar single-pixel reference for the adaptive Gaussian-mixture update.
//!
//! Every arithmetic step is written in the plainest possible form, in the
//! exact order the production subtractor must follow:
//!
//!   1. match: first component (in stored order) with squared channel
//!      distance within `var_threshold * variance`
//!   2. decay every weight by `alpha * (weight + weight_prune)`, add `alpha`
//!      to the matched weight, drop components at or below zero
//!   3. matched component: move mean toward the sample and variance toward
//!      the per-channel squared distance with gain `alpha / weight`, using
//!      the pre-update mean for both deltas; clamp variance
//!   4. no match: insert (weight `alpha`, mean = sample, variance
//!      `var_init`), overwriting the lowest-weight slot when full (last
//!      slot among equal minima)
//!   5. renormalize weights in slot order, then sort by weight descending
//!      with older components first on ties
//!   6. background set = shortest prefix whose cumulative weight exceeds
//!      `background_ratio`; label 0 if the matched component sits in it,
//!      255 otherwise (and always 255 on no match)
//!   7. optional shadow relabel against the dominant component

#[derive(Debug, Clone)]
pub struct RefParams {
    pub history: u64,
    pub var_threshold: f64,
    pub max_components: usize,
    pub background_ratio: f64,
    pub var_init: f64,
    pub var_min: f64,
    pub var_max: f64,
    pub weight_prune: f64,
    pub detect_shadows: bool,
    pub shadow_value: u8,
    pub shadow_threshold: f64,
}

impl RefParams {
    pub fn defaults() -> Self {
        RefParams {
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

#[derive(Debug, Clone, PartialEq)]
pub struct RefComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: f64,
    /// Frame number at insertion; smaller is older. Unique per pixel because
    /// at most one component is inserted per update.
    pub age: u32,
}

pub struct RefPixelModel {
    pub params: RefParams,
    pub channels: usize,
    pub components: Vec<RefComponent>,
    pub frames_seen: u64,
}

impl RefPixelModel {
    pub fn new(channels: usize, params: RefParams) -> Self {
        RefPixelModel {
            params,
            channels,
            components: Vec::new(),
            frames_seen: 0,
        }
    }

    /// Applies one sample and returns the mask label (0 background,
    /// 255 foreground, `shadow_value` shadow).
    pub fn update(&mut self, x: &[f64], lr_override: Option<f64>) -> u8 {
        assert_eq!(x.len(), self.channels);
        self.frames_seen += 1;
        let alpha = match lr_override {
            Some(a) => a,
            None => (1.0 / self.frames_seen as f64).max(1.0 / self.params.history as f64),
        };

        // 1. match
        let mut matched_age: Option<u32> = None;
        for c in &self.components {
            let mut dist2 = 0.0;
            for (&xv, &m) in x.iter().zip(&c.mean) {
                let d = xv - m;
                dist2 += d * d;
            }
            if dist2 <= self.params.var_threshold * c.variance {
                matched_age = Some(c.age);
                break;
            }
        }

        // 2. decay, boost, delete
        for c in &mut self.components {
            c.weight -= alpha * (c.weight + self.params.weight_prune);
            if matched_age == Some(c.age) {
                c.weight += alpha;
            }
        }
        self.components.retain(|c| c.weight > 0.0);

        // 3./4. update matched or insert
        if let Some(age) = matched_age {
            let k = self.components.iter().position(|c| c.age == age).unwrap();
            let c = &mut self.components[k];
            let ratio = alpha / c.weight;
            let mut dist2 = 0.0;
            for (&xv, mean) in x.iter().zip(&mut c.mean) {
                let d = xv - *mean;
                dist2 += d * d;
                *mean += ratio * d;
            }
            let target = dist2 / self.channels as f64;
            c.variance = (c.variance + ratio * (target - c.variance))
                .clamp(self.params.var_min, self.params.var_max);
        } else {
            let fresh = RefComponent {
                weight: alpha,
                mean: x.to_vec(),
                variance: self.params.var_init,
                age: self.frames_seen as u32,
            };
            if self.components.len() == self.params.max_components {
                let mut min_idx = 0;
                for i in 1..self.components.len() {
                    if self.components[i].weight <= self.components[min_idx].weight {
                        min_idx = i;
                    }
                }
                self.components[min_idx] = fresh;
            } else {
                self.components.push(fresh);
            }
        }

        // 5. renormalize in slot order, then sort
        let mut sum = 0.0;
        for c in &self.components {
            sum += c.weight;
        }
        if sum > 0.0 {
            for c in &mut self.components {
                c.weight /= sum;
            }
        }
        self.components.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap()
                .then(a.age.cmp(&b.age))
        });

        // 6. label
        let mut label = 255u8;
        if let Some(age) = matched_age {
            let pos = self.components.iter().position(|c| c.age == age).unwrap();
            let mut cum = 0.0;
            let mut prefix_len = self.components.len();
            for (i, c) in self.components.iter().enumerate() {
                cum += c.weight;
                if cum > self.params.background_ratio {
                    prefix_len = i + 1;
                    break;
                }
            }
            if pos < prefix_len {
                label = 0;
            }
        }

        // 7. shadow
        if label == 255 && self.params.detect_shadows && self.channels == 3 {
            let dom = &self.components[0];
            let mut num = 0.0;
            let mut den = 0.0;
            for (&xv, &m) in x.iter().zip(&dom.mean) {
                num += xv * m;
                den += m * m;
            }
            if den > 0.0 {
                let b = num / den;
                if b >= self.params.shadow_threshold && b <= 1.0 {
                    let mut dist2 = 0.0;
                    for (&xv, &m) in x.iter().zip(&dom.mean) {
                        let d = xv - b * m;
                        dist2 += d * d;
                    }
                    if dist2 <= self.params.var_threshold * dom.variance {
                        label = self.params.shadow_value;
                    }
                }
            }
        }

        label
    }
}
