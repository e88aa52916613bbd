//! Real-valued shadow parameters behind the binary network, the batched
//! forward/backward pass with straight-through-estimator gradients, and
//! export to a `BnnModel` with batch norm folded into per-channel sign
//! thresholds.
//!
//! Conventions, fixed once:
//! - binarization is `sign` with `sign(0) = +1`;
//! - the activation STE passes gradient where the batch-norm output lies in
//!   `[-1, 1]`;
//! - the weight STE passes gradient where the latent weight lies in
//!   `[-1, 1]`, and latent weights are clipped back to that box after every
//!   update;
//! - logits are scores scaled by `1/sqrt(F)` before the softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bnn::{
    BnnModel, ConvKernel, ModelError, CHANNELS, FEATURE_LEN, HEAD_OUTPUTS, INPUT_SIZE,
    KERNEL_SIZE, POOLED_SIZE, POOL_WINDOW,
};
use crate::ppa::BitVector;

const TAPS: usize = KERNEL_SIZE * KERNEL_SIZE;
const PLANE: usize = INPUT_SIZE * INPUT_SIZE;
const PADDED: usize = INPUT_SIZE + 2;
const POOLED_PLANE: usize = POOLED_SIZE * POOLED_SIZE;
const BN_EPS: f32 = 1e-5;
const BN_MOMENTUM: f32 = 0.1;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("non-finite batch-norm statistics in channel {0}")]
    NonFiniteStats(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-channel batch-norm parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: f32,
    pub beta: f32,
    pub running_mean: f32,
    pub running_var: f32,
}

impl Default for BatchNorm {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            // Start activations sparse (~7% of cells fire). With a zero shift
            // roughly half the cells fire and the 4×4 OR-pool saturates to
            // all-ones, which carries no position information at all.
            beta: -1.5,
            running_mean: 0.0,
            running_var: 1.0,
        }
    }
}

/// Shadow weights for every binary weight of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub conv: Vec<[f32; TAPS]>,
    pub bn: Vec<BatchNorm>,
    pub fc_x: Vec<Vec<f32>>,
    pub fc_y: Vec<Vec<f32>>,
    pub input_threshold: f32,
}

impl LatentModel {
    /// Seeded random initialization. Conv taps get a dark-leaning common
    /// bias: a balanced ±1 kernel sums to ~0 over any solid region, so fully
    /// random kernels start blind to solid blobs and the heads receive no
    /// label signal to descend on; bright-leaning kernels instead fire on
    /// the (bright) floor everywhere and saturate the OR-pool. Dark-leaning
    /// starts give sparse, blob-correlated activations while leaving every
    /// tap free to flip during training. Head weights start small so early
    /// gradient drift can flip their signs quickly.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = (0..CHANNELS)
            .map(|_| {
                let mut taps = [0f32; TAPS];
                for t in &mut taps {
                    *t = -0.2 + rng.gen_range(-0.45..0.45);
                }
                taps
            })
            .collect();
        let head = |rng: &mut ChaCha8Rng| {
            (0..HEAD_OUTPUTS)
                .map(|_| (0..FEATURE_LEN).map(|_| rng.gen_range(-0.05..0.05)).collect())
                .collect::<Vec<Vec<f32>>>()
        };
        Self {
            conv,
            bn: vec![BatchNorm::default(); CHANNELS],
            fc_x: head(&mut rng),
            fc_y: head(&mut rng),
            input_threshold: 0.0,
        }
    }

    /// Fold batch norm and binarize every weight into an inference model.
    pub fn export(&self) -> Result<BnnModel, ExportError> {
        let mut kernels = Vec::with_capacity(CHANNELS);
        let mut thresholds = Vec::with_capacity(CHANNELS);
        for (c, (taps, bn)) in self.conv.iter().zip(&self.bn).enumerate() {
            if !(bn.gamma.is_finite()
                && bn.beta.is_finite()
                && bn.running_mean.is_finite()
                && bn.running_var.is_finite())
            {
                return Err(ExportError::NonFiniteStats(c));
            }
            let fold = fold_batch_norm(bn.gamma, bn.beta, bn.running_mean, bn.running_var);
            let mut signs = [0i8; TAPS];
            for (s, &t) in signs.iter_mut().zip(taps) {
                *s = sign_pm(t);
            }
            let kernel = ConvKernel::new(signs).expect("signs are ±1");
            kernels.push(if fold.negate { kernel.negated() } else { kernel });
            thresholds.push(fold.threshold);
        }
        let head_bits = |head: &[Vec<f32>]| {
            head.iter()
                .map(|w| BitVector::from_bits(w.iter().map(|&v| (v >= 0.0) as u8).collect()))
                .collect::<Vec<_>>()
        };
        Ok(BnnModel::new(
            kernels,
            thresholds,
            head_bits(&self.fc_x),
            head_bits(&self.fc_y),
            self.input_threshold,
        )?)
    }
}

#[inline]
fn sign_pm(v: f32) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Result of folding one channel's batch norm into a sign threshold:
/// `sign(BN(v)) == +1  ⟺  (negate ? -v : v) >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedThreshold {
    pub negate: bool,
    pub threshold: f32,
}

/// Fold inference-time batch norm `gamma·(v−mean)/sqrt(var+eps) + beta ≥ 0`
/// into a threshold comparison. A negative scale flips the inequality, which
/// is expressed by negating the channel's kernel (so `v` becomes `−v`).
pub fn fold_batch_norm(gamma: f32, beta: f32, mean: f32, var: f32) -> FoldedThreshold {
    let sigma = (var + BN_EPS).sqrt();
    let slope = gamma / sigma;
    if slope > 0.0 {
        FoldedThreshold {
            negate: false,
            threshold: mean - beta / slope,
        }
    } else if slope < 0.0 {
        FoldedThreshold {
            negate: true,
            threshold: beta / slope - mean,
        }
    } else {
        // Constant output sign(beta): pick a threshold no conv sum can cross.
        FoldedThreshold {
            negate: false,
            threshold: if beta >= 0.0 { f32::MIN } else { f32::MAX },
        }
    }
}

/// One training sample prepared for the forward pass: ±1 input with a
/// zero-valued one-pixel border so border taps contribute exactly 0.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub padded: Vec<i8>,
    pub label_x: u8,
    pub label_y: u8,
}

impl PreparedSample {
    pub fn from_pixels(pixels: &[u8], label_x: u8, label_y: u8, input_threshold: f32) -> Self {
        debug_assert_eq!(pixels.len(), PLANE);
        let mut padded = vec![0i8; PADDED * PADDED];
        for y in 0..INPUT_SIZE {
            for x in 0..INPUT_SIZE {
                let bit = (pixels[y * INPUT_SIZE + x] as f32 - 128.0) >= input_threshold;
                padded[(y + 1) * PADDED + (x + 1)] = if bit { 1 } else { -1 };
            }
        }
        Self {
            padded,
            label_x,
            label_y,
        }
    }
}

/// Gradients for every latent parameter, averaged over the batch.
pub struct Gradients {
    pub conv: Vec<[f32; TAPS]>,
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub fc_x: Vec<Vec<f32>>,
    pub fc_y: Vec<Vec<f32>>,
}

impl Gradients {
    fn zeros() -> Self {
        Self {
            conv: vec![[0.0; TAPS]; CHANNELS],
            gamma: vec![0.0; CHANNELS],
            beta: vec![0.0; CHANNELS],
            fc_x: vec![vec![0.0; FEATURE_LEN]; HEAD_OUTPUTS],
            fc_y: vec![vec![0.0; FEATURE_LEN]; HEAD_OUTPUTS],
        }
    }
}

/// Outcome of one batch: summed losses, per-head hit counts, gradients.
pub struct BatchResult {
    pub loss_x: f64,
    pub loss_y: f64,
    pub hits_x: usize,
    pub hits_y: usize,
    pub hits_joint: usize,
    pub gradients: Gradients,
}

/// Forward and backward over one batch, training-mode batch statistics.
/// Updates the model's running statistics as a side effect.
pub fn batch_pass(model: &mut LatentModel, batch: &[&PreparedSample]) -> BatchResult {
    let b = batch.len();
    assert!(b > 0);
    let scale = 1.0 / (FEATURE_LEN as f32).sqrt();

    // Binarized weights for the whole batch.
    let w_conv: Vec<[f32; TAPS]> = model
        .conv
        .iter()
        .map(|taps| {
            let mut w = [0f32; TAPS];
            for (o, &t) in w.iter_mut().zip(taps) {
                *o = sign_pm(t) as f32;
            }
            w
        })
        .collect();

    // --- forward: conv ---
    let mut conv_out = vec![0f32; b * CHANNELS * PLANE];
    for (s, sample) in batch.iter().enumerate() {
        for c in 0..CHANNELS {
            let w = &w_conv[c];
            let out = &mut conv_out[(s * CHANNELS + c) * PLANE..][..PLANE];
            for y in 0..INPUT_SIZE {
                let row0 = &sample.padded[y * PADDED..];
                let row1 = &sample.padded[(y + 1) * PADDED..];
                let row2 = &sample.padded[(y + 2) * PADDED..];
                for x in 0..INPUT_SIZE {
                    let acc = w[0] * row0[x] as f32
                        + w[1] * row0[x + 1] as f32
                        + w[2] * row0[x + 2] as f32
                        + w[3] * row1[x] as f32
                        + w[4] * row1[x + 1] as f32
                        + w[5] * row1[x + 2] as f32
                        + w[6] * row2[x] as f32
                        + w[7] * row2[x + 1] as f32
                        + w[8] * row2[x + 2] as f32;
                    out[y * INPUT_SIZE + x] = acc;
                }
            }
        }
    }

    // --- forward: batch norm (batch statistics) ---
    let n_per_channel = (b * PLANE) as f32;
    let mut mean = vec![0f32; CHANNELS];
    let mut var = vec![0f32; CHANNELS];
    for c in 0..CHANNELS {
        let mut sum = 0f64;
        let mut sum_sq = 0f64;
        for s in 0..b {
            for &v in &conv_out[(s * CHANNELS + c) * PLANE..][..PLANE] {
                sum += v as f64;
                sum_sq += (v as f64) * (v as f64);
            }
        }
        let m = sum / n_per_channel as f64;
        mean[c] = m as f32;
        var[c] = ((sum_sq / n_per_channel as f64) - m * m).max(0.0) as f32;
        let bn = &mut model.bn[c];
        bn.running_mean = (1.0 - BN_MOMENTUM) * bn.running_mean + BN_MOMENTUM * mean[c];
        bn.running_var = (1.0 - BN_MOMENTUM) * bn.running_var + BN_MOMENTUM * var[c];
    }

    let mut bn_out = vec![0f32; b * CHANNELS * PLANE];
    for c in 0..CHANNELS {
        let sigma_inv = 1.0 / (var[c] + BN_EPS).sqrt();
        let (gamma, beta) = (model.bn[c].gamma, model.bn[c].beta);
        for s in 0..b {
            let base = (s * CHANNELS + c) * PLANE;
            for i in 0..PLANE {
                bn_out[base + i] = gamma * (conv_out[base + i] - mean[c]) * sigma_inv + beta;
            }
        }
    }

    // --- forward: sign activation, OR-pool (max), flatten ---
    // pool_src holds, per pooled cell, the index of the plane cell whose
    // activation was taken; gradient routes back through that cell only.
    let mut features = vec![0f32; b * FEATURE_LEN];
    let mut pool_src = vec![0u32; b * FEATURE_LEN];
    for s in 0..b {
        for c in 0..CHANNELS {
            let base = (s * CHANNELS + c) * PLANE;
            for cy in 0..POOLED_SIZE {
                for cx in 0..POOLED_SIZE {
                    let mut best_val = f32::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for by in 0..POOL_WINDOW {
                        for bx in 0..POOL_WINDOW {
                            let idx = (cy * POOL_WINDOW + by) * INPUT_SIZE + cx * POOL_WINDOW + bx;
                            let a = if bn_out[base + idx] >= 0.0 { 1.0 } else { -1.0 };
                            if a > best_val {
                                best_val = a;
                                best_idx = idx;
                            }
                        }
                    }
                    let f_idx = s * FEATURE_LEN
                        + c * POOLED_PLANE
                        + cy * POOLED_SIZE
                        + cx;
                    features[f_idx] = best_val;
                    pool_src[f_idx] = best_idx as u32;
                }
            }
        }
    }

    // --- forward: heads, softmax cross-entropy ---
    let w_fc = |head: &[Vec<f32>]| -> Vec<Vec<f32>> {
        head.iter()
            .map(|w| w.iter().map(|&v| sign_pm(v) as f32).collect())
            .collect()
    };
    let wx = w_fc(&model.fc_x);
    let wy = w_fc(&model.fc_y);

    let mut result = BatchResult {
        loss_x: 0.0,
        loss_y: 0.0,
        hits_x: 0,
        hits_y: 0,
        hits_joint: 0,
        gradients: Gradients::zeros(),
    };
    // d(loss)/d(feature), accumulated from both heads.
    let mut d_features = vec![0f32; b * FEATURE_LEN];

    for (s, sample) in batch.iter().enumerate() {
        let f = &features[s * FEATURE_LEN..][..FEATURE_LEN];
        let head_pass = |w_bin: &[Vec<f32>],
                             latent_grad: &mut [Vec<f32>],
                             label: u8,
                             d_features: &mut [f32]|
         -> (f64, bool) {
            let mut logits = [0f32; HEAD_OUTPUTS];
            for (o, w) in w_bin.iter().enumerate() {
                let score: f32 = w.iter().zip(f).map(|(a, b)| a * b).sum();
                logits[o] = score * scale;
            }
            let max = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let exp: Vec<f32> = logits.iter().map(|&l| (l - max).exp()).collect();
            let denom: f32 = exp.iter().sum();
            let loss = (denom.ln() + max - logits[label as usize]) as f64;
            let mut best = 0usize;
            for o in 1..HEAD_OUTPUTS {
                if logits[o] > logits[best] {
                    best = o;
                }
            }
            for o in 0..HEAD_OUTPUTS {
                let p = exp[o] / denom;
                let d_logit = (p - (o == label as usize) as u8 as f32) / b as f32;
                let d_score = d_logit * scale;
                let grad = &mut latent_grad[o];
                for i in 0..FEATURE_LEN {
                    grad[i] += d_score * f[i];
                    d_features[s * FEATURE_LEN + i] += d_score * w_bin[o][i];
                }
            }
            (loss, best as u8 == label)
        };

        let (lx, hit_x) = head_pass(
            &wx,
            &mut result.gradients.fc_x,
            sample.label_x,
            &mut d_features,
        );
        let (ly, hit_y) = head_pass(
            &wy,
            &mut result.gradients.fc_y,
            sample.label_y,
            &mut d_features,
        );
        result.loss_x += lx;
        result.loss_y += ly;
        result.hits_x += hit_x as usize;
        result.hits_y += hit_y as usize;
        result.hits_joint += (hit_x && hit_y) as usize;
    }

    // --- backward: unpool, activation STE, batch norm ---
    let mut d_bn = vec![0f32; b * CHANNELS * PLANE];
    for s in 0..b {
        for c in 0..CHANNELS {
            let base = (s * CHANNELS + c) * PLANE;
            for p in 0..POOLED_PLANE {
                let f_idx = s * FEATURE_LEN + c * POOLED_PLANE + p;
                let src = base + pool_src[f_idx] as usize;
                // Hard-clip STE: gradient passes where |bn_out| <= 1.
                if bn_out[src].abs() <= 1.0 {
                    d_bn[src] += d_features[f_idx];
                }
            }
        }
    }

    let mut d_conv = vec![0f32; b * CHANNELS * PLANE];
    for c in 0..CHANNELS {
        let sigma_inv = 1.0 / (var[c] + BN_EPS).sqrt();
        let gamma = model.bn[c].gamma;
        let mut d_gamma = 0f64;
        let mut d_beta = 0f64;
        for s in 0..b {
            let base = (s * CHANNELS + c) * PLANE;
            for i in 0..PLANE {
                let x_hat = (conv_out[base + i] - mean[c]) * sigma_inv;
                d_gamma += (d_bn[base + i] * x_hat) as f64;
                d_beta += d_bn[base + i] as f64;
            }
        }
        result.gradients.gamma[c] = d_gamma as f32;
        result.gradients.beta[c] = d_beta as f32;
        let n = n_per_channel;
        for s in 0..b {
            let base = (s * CHANNELS + c) * PLANE;
            for i in 0..PLANE {
                let x_hat = (conv_out[base + i] - mean[c]) * sigma_inv;
                d_conv[base + i] = gamma
                    * sigma_inv
                    * (d_bn[base + i] - (d_beta as f32 + x_hat * d_gamma as f32) / n);
            }
        }
    }

    // --- backward: conv weights ---
    for (s, sample) in batch.iter().enumerate() {
        for c in 0..CHANNELS {
            let base = (s * CHANNELS + c) * PLANE;
            let grad = &mut result.gradients.conv[c];
            for y in 0..INPUT_SIZE {
                for x in 0..INPUT_SIZE {
                    let d = d_conv[base + y * INPUT_SIZE + x];
                    if d == 0.0 {
                        continue;
                    }
                    for ky in 0..KERNEL_SIZE {
                        let row = &sample.padded[(y + ky) * PADDED..];
                        for kx in 0..KERNEL_SIZE {
                            grad[ky * KERNEL_SIZE + kx] += d * row[x + kx] as f32;
                        }
                    }
                }
            }
        }
    }

    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fold_matches_direct_batch_norm_sign_oracle() {
        // 1,000 random channels evaluated on every attainable conv sum.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let gamma: f32 = rng.gen_range(-2.0..2.0);
            let beta: f32 = rng.gen_range(-3.0..3.0);
            let mean: f32 = rng.gen_range(-6.0..6.0);
            let var: f32 = rng.gen_range(0.0..25.0);
            let fold = fold_batch_norm(gamma, beta, mean, var);
            for v in -9..=9i32 {
                let v = v as f32;
                let bn = gamma * (v - mean) / (var + BN_EPS).sqrt() + beta;
                let direct = bn >= 0.0; // sign(0) = +1
                let folded = if fold.negate {
                    -v >= fold.threshold
                } else {
                    v >= fold.threshold
                };
                assert_eq!(
                    direct, folded,
                    "gamma {gamma} beta {beta} mean {mean} var {var} v {v}"
                );
            }
        }
    }

    #[test]
    fn fold_handles_zero_gamma() {
        let always_on = fold_batch_norm(0.0, 0.5, 1.0, 1.0);
        assert!(!always_on.negate);
        assert!(9.0 >= always_on.threshold && -9.0 >= always_on.threshold);
        let always_off = fold_batch_norm(0.0, -0.5, 1.0, 1.0);
        assert!(!(9.0f32 >= always_off.threshold) && !(-9.0f32 >= always_off.threshold));
    }

    #[test]
    fn export_binarizes_with_sign_zero_positive() {
        let mut latent = LatentModel::init(5);
        for taps in &mut latent.conv {
            *taps = [0.3; TAPS];
        }
        latent.fc_x[0].iter_mut().for_each(|w| *w = 0.0);
        let model = latent.export().unwrap();
        assert!(model.conv_kernels()[0].taps().iter().all(|&t| t == 1));
        assert!(model.fc_x()[0].bits().iter().all(|&b| b == 1));
    }

    #[test]
    fn export_rejects_non_finite_stats() {
        let mut latent = LatentModel::init(5);
        latent.bn[3].running_var = f32::NAN;
        assert!(matches!(
            latent.export(),
            Err(ExportError::NonFiniteStats(3))
        ));
    }

    #[test]
    fn exported_negated_kernel_preserves_activation() {
        // A channel with negative gamma must produce the same binary
        // activations through the folded model as direct BN evaluation.
        let mut latent = LatentModel::init(7);
        latent.bn[0] = BatchNorm {
            gamma: -1.3,
            beta: 0.4,
            running_mean: 1.5,
            running_var: 4.0,
        };
        let model = latent.export().unwrap();
        // Direct route on a probe sum v computed with the *unnegated* kernel.
        for v in -9..=9i32 {
            let bn = -1.3 * (v as f32 - 1.5) / (4.0f32 + BN_EPS).sqrt() + 0.4;
            let direct = bn >= 0.0;
            // The exported kernel is negated, so the model's conv produces −v
            // and compares against the folded threshold.
            let folded = (-v) as f32 >= model.conv_thresholds()[0];
            assert_eq!(direct, folded, "v {v}");
        }
    }

    #[test]
    fn batch_pass_gradients_are_finite_and_running_stats_move() {
        let mut latent = LatentModel::init(11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let samples: Vec<PreparedSample> = (0..4)
            .map(|i| {
                let pixels: Vec<u8> = (0..PLANE).map(|_| rng.gen()).collect();
                PreparedSample::from_pixels(&pixels, i % 8, (i + 3) % 8, 0.0)
            })
            .collect();
        let refs: Vec<&PreparedSample> = samples.iter().collect();
        let before = latent.bn[0].running_mean;
        let result = batch_pass(&mut latent, &refs);
        assert!(result.loss_x.is_finite() && result.loss_y.is_finite());
        assert!(result.loss_x > 0.0 && result.loss_y > 0.0);
        assert!(result.gradients.conv[0].iter().all(|g| g.is_finite()));
        assert_ne!(latent.bn[0].running_mean, before);
    }
}
