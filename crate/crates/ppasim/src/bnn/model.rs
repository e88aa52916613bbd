//! The two-headed binarized localisation network.
//!
//! One shared 3×3 binary convolution layer (batch norm folded into
//! per-channel thresholds), OR-pooling, and two independent binary
//! fully-connected heads that score 8 position bins per axis.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ppa::BitVector;

/// Shared convolution channels.
pub const CHANNELS: usize = 8;
/// Side of a conv kernel.
pub const KERNEL_SIZE: usize = 3;
/// CNN input plane side.
pub const INPUT_SIZE: usize = 64;
/// OR-pooling window.
pub const POOL_WINDOW: usize = 4;
/// Pooled plane side.
pub const POOLED_SIZE: usize = INPUT_SIZE / POOL_WINDOW;
/// Flattened feature length consumed by each head.
pub const FEATURE_LEN: usize = CHANNELS * POOLED_SIZE * POOLED_SIZE;
/// Position bins per axis.
pub const HEAD_OUTPUTS: usize = 8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model field {field} has length {got}, expected {expected}")]
    BadDimension {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("kernel weight must be +1 or -1, got {0}")]
    BadWeight(i8),
    #[error("non-finite threshold in channel {0}")]
    NonFiniteThreshold(usize),
}

/// One 3×3 kernel of ±1 weights, row-major taps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvKernel {
    weights: [i8; KERNEL_SIZE * KERNEL_SIZE],
}

impl ConvKernel {
    pub fn new(weights: [i8; KERNEL_SIZE * KERNEL_SIZE]) -> Result<Self, ModelError> {
        for &w in &weights {
            if w != 1 && w != -1 {
                return Err(ModelError::BadWeight(w));
            }
        }
        Ok(Self { weights })
    }

    #[inline]
    pub fn tap(&self, kx: usize, ky: usize) -> i8 {
        self.weights[ky * KERNEL_SIZE + kx]
    }

    pub fn taps(&self) -> &[i8; KERNEL_SIZE * KERNEL_SIZE] {
        &self.weights
    }

    /// Kernel with every tap negated.
    pub fn negated(&self) -> Self {
        let mut weights = self.weights;
        for w in &mut weights {
            *w = -*w;
        }
        Self { weights }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnnModel {
    conv_kernels: Vec<ConvKernel>,
    conv_thresholds: Vec<f32>,
    fc_x: Vec<BitVector>,
    fc_y: Vec<BitVector>,
    input_threshold: f32,
}

impl BnnModel {
    pub fn new(
        conv_kernels: Vec<ConvKernel>,
        conv_thresholds: Vec<f32>,
        fc_x: Vec<BitVector>,
        fc_y: Vec<BitVector>,
        input_threshold: f32,
    ) -> Result<Self, ModelError> {
        if conv_kernels.len() != CHANNELS {
            return Err(ModelError::BadDimension {
                field: "conv_kernels",
                got: conv_kernels.len(),
                expected: CHANNELS,
            });
        }
        if conv_thresholds.len() != CHANNELS {
            return Err(ModelError::BadDimension {
                field: "conv_thresholds",
                got: conv_thresholds.len(),
                expected: CHANNELS,
            });
        }
        for (c, t) in conv_thresholds.iter().enumerate() {
            if !t.is_finite() {
                return Err(ModelError::NonFiniteThreshold(c));
            }
        }
        for (name, head) in [("fc_x", &fc_x), ("fc_y", &fc_y)] {
            if head.len() != HEAD_OUTPUTS {
                return Err(ModelError::BadDimension {
                    field: name,
                    got: head.len(),
                    expected: HEAD_OUTPUTS,
                });
            }
            for w in head {
                if w.len() != FEATURE_LEN {
                    return Err(ModelError::BadDimension {
                        field: name,
                        got: w.len(),
                        expected: FEATURE_LEN,
                    });
                }
            }
        }
        Ok(Self {
            conv_kernels,
            conv_thresholds,
            fc_x,
            fc_y,
            input_threshold,
        })
    }

    /// Seeded random model; handy for equivalence and agreement checks that
    /// need a fixed but arbitrary network.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv_kernels = (0..CHANNELS)
            .map(|_| {
                let mut w = [0i8; KERNEL_SIZE * KERNEL_SIZE];
                for tap in &mut w {
                    *tap = if rng.next_u32() & 1 == 1 { 1 } else { -1 };
                }
                ConvKernel::new(w).unwrap()
            })
            .collect();
        let conv_thresholds = (0..CHANNELS).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let head = |rng: &mut ChaCha8Rng| {
            (0..HEAD_OUTPUTS)
                .map(|_| {
                    BitVector::from_bits(
                        (0..FEATURE_LEN).map(|_| (rng.next_u32() & 1) as u8).collect(),
                    )
                })
                .collect::<Vec<_>>()
        };
        let fc_x = head(&mut rng);
        let fc_y = head(&mut rng);
        Self::new(conv_kernels, conv_thresholds, fc_x, fc_y, 0.0).unwrap()
    }

    pub fn conv_kernels(&self) -> &[ConvKernel] {
        &self.conv_kernels
    }

    pub fn conv_thresholds(&self) -> &[f32] {
        &self.conv_thresholds
    }

    pub fn fc_x(&self) -> &[BitVector] {
        &self.fc_x
    }

    pub fn fc_y(&self) -> &[BitVector] {
        &self.fc_y
    }

    pub fn input_threshold(&self) -> f32 {
        self.input_threshold
    }
}

/// Per-axis scores and the decoded bin labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionDistribution {
    pub scores_x: [i32; HEAD_OUTPUTS],
    pub scores_y: [i32; HEAD_OUTPUTS],
    pub label_x: u8,
    pub label_y: u8,
}

impl PredictionDistribution {
    /// Decode labels as per-axis argmax; ties break toward the lower index.
    pub fn from_scores(scores_x: [i32; HEAD_OUTPUTS], scores_y: [i32; HEAD_OUTPUTS]) -> Self {
        Self {
            label_x: argmax_low(&scores_x),
            label_y: argmax_low(&scores_y),
            scores_x,
            scores_y,
        }
    }
}

/// Index of the maximum; the first occurrence wins on ties.
pub fn argmax_low(scores: &[i32]) -> u8 {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best as u8
}
