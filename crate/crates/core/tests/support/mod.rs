//! Shared test support: a straight-line scalar reference for the adaptive
//! Gaussian-mixture update, and small deterministic data helpers.
//!
//! The reference processes ONE pixel with plain `Vec`s and no batching. It is
//! the behavioral anchor for the full-frame subtractor: masks and model state
//! must match it bit-exactly.

#![allow(dead_code)]

pub mod mog2_reference;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic byte stream for synthetic test videos.
pub struct ByteSource(ChaCha8Rng);

impl ByteSource {
    pub fn new(seed: u64) -> Self {
        ByteSource(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_byte(&mut self) -> u8 {
        (self.0.next_u32() >> 24) as u8
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    /// Uniform f64 in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        self.0.next_u32() as f64 / 4294967296.0
    }

    pub fn frame_bytes(&mut self, len: usize) -> Vec<u8> {
        (0..len).map(|_| self.next_byte()).collect()
    }
}
