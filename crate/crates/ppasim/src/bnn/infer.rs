//! Network inference, twice over.
//!
//! `infer_ppa` runs the pipeline on the emulated array: image load into an
//! analogue register, input binarization, nine shift-accumulate steps per
//! conv channel, per-channel threshold, OR-pooling, and XNOR-popcount
//! fully-connected heads. `infer_reference` evaluates the mathematically
//! identical network in exact integer arithmetic with direct ±1 dot
//! products — an independent route used to cross-check the array path.
//! With both noise sigmas at zero the two are bit-exact equal.

use crate::image::GrayImage;
use crate::ppa::{
    accumulate_shifted, load_image, or_pool, threshold, AnalogPlane, BitPlane, BitVector,
    NoiseModel, PlaneError,
};

use super::model::{
    BnnModel, PredictionDistribution, CHANNELS, FEATURE_LEN, HEAD_OUTPUTS, INPUT_SIZE,
    KERNEL_SIZE, POOLED_SIZE, POOL_WINDOW,
};

/// Prediction plus every intermediate binary stage, exposed so the noisy and
/// exact paths can be compared stage by stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceResult {
    pub prediction: PredictionDistribution,
    /// Binarized input plane.
    pub input_bits: BitPlane,
    /// Post-threshold conv activation planes, one per channel.
    pub conv_planes: Vec<BitPlane>,
    /// OR-pooled planes, one per channel.
    pub pooled_planes: Vec<BitPlane>,
    /// Flattened feature vector (channel-major, row-major within a channel).
    pub features: BitVector,
}

fn check_frame(frame: &GrayImage) -> Result<(), PlaneError> {
    if frame.width() != INPUT_SIZE || frame.height() != INPUT_SIZE {
        return Err(PlaneError::ShapeMismatch {
            expected: INPUT_SIZE,
            got: if frame.width() != INPUT_SIZE {
                frame.width()
            } else {
                frame.height()
            },
        });
    }
    Ok(())
}

fn flatten(pooled: &[BitPlane]) -> BitVector {
    let mut bits = Vec::with_capacity(FEATURE_LEN);
    for plane in pooled {
        bits.extend_from_slice(plane.cells());
    }
    BitVector::from_bits(bits)
}

/// Run inference on the emulated array.
pub fn infer_ppa(
    model: &BnnModel,
    frame: &GrayImage,
    noise: &mut NoiseModel,
) -> Result<InferenceResult, PlaneError> {
    check_frame(frame)?;
    let analog = load_image(frame, noise)?;
    let input_bits = threshold(&analog, model.input_threshold());

    let mut conv_planes = Vec::with_capacity(CHANNELS);
    let mut pooled_planes = Vec::with_capacity(CHANNELS);
    for (kernel, &t) in model.conv_kernels().iter().zip(model.conv_thresholds()) {
        let mut acc = AnalogPlane::zeros(INPUT_SIZE);
        for ky in 0..KERNEL_SIZE {
            for kx in 0..KERNEL_SIZE {
                let dx = 1 - kx as i32;
                let dy = 1 - ky as i32;
                acc = accumulate_shifted(
                    &acc,
                    &input_bits,
                    dx,
                    dy,
                    kernel.tap(kx, ky) as i32,
                    noise,
                )?;
            }
        }
        let act = threshold(&acc, t);
        pooled_planes.push(or_pool(&act, POOL_WINDOW)?);
        conv_planes.push(act);
    }

    let features = flatten(&pooled_planes);
    let mut scores_x = [0i32; HEAD_OUTPUTS];
    let mut scores_y = [0i32; HEAD_OUTPUTS];
    for o in 0..HEAD_OUTPUTS {
        scores_x[o] = model.fc_x()[o].dot_pm(&features)?;
        scores_y[o] = model.fc_y()[o].dot_pm(&features)?;
    }

    Ok(InferenceResult {
        prediction: PredictionDistribution::from_scores(scores_x, scores_y),
        input_bits,
        conv_planes,
        pooled_planes,
        features,
    })
}

/// Evaluate the same network with exact integer arithmetic and no noise.
/// Kept deliberately independent of the plane ops: plain index loops and a
/// direct ±1 accumulation for the heads.
pub fn infer_reference(model: &BnnModel, frame: &GrayImage) -> Result<InferenceResult, PlaneError> {
    check_frame(frame)?;
    let t_in = model.input_threshold();
    let input_bits = BitPlane::from_fn(INPUT_SIZE, |x, y| {
        (frame.get(x, y) as f32 - 128.0) >= t_in
    });

    let mut conv_planes = Vec::with_capacity(CHANNELS);
    let mut pooled_planes = Vec::with_capacity(CHANNELS);
    for (kernel, &t) in model.conv_kernels().iter().zip(model.conv_thresholds()) {
        let act = BitPlane::from_fn(INPUT_SIZE, |x, y| {
            let mut sum = 0i32;
            for ky in 0..KERNEL_SIZE {
                for kx in 0..KERNEL_SIZE {
                    let sy = y as i32 + ky as i32 - 1;
                    let sx = x as i32 + kx as i32 - 1;
                    if sy < 0 || sy >= INPUT_SIZE as i32 || sx < 0 || sx >= INPUT_SIZE as i32 {
                        continue; // outside taps contribute 0
                    }
                    let bit = input_bits.get(sx as usize, sy as usize) as i32;
                    sum += kernel.tap(kx, ky) as i32 * (2 * bit - 1);
                }
            }
            sum as f32 >= t
        });
        let pooled = BitPlane::from_fn(POOLED_SIZE, |cx, cy| {
            for by in 0..POOL_WINDOW {
                for bx in 0..POOL_WINDOW {
                    if act.get(cx * POOL_WINDOW + bx, cy * POOL_WINDOW + by) != 0 {
                        return true;
                    }
                }
            }
            false
        });
        conv_planes.push(act);
        pooled_planes.push(pooled);
    }

    let features = flatten(&pooled_planes);
    let mut scores_x = [0i32; HEAD_OUTPUTS];
    let mut scores_y = [0i32; HEAD_OUTPUTS];
    for o in 0..HEAD_OUTPUTS {
        scores_x[o] = dot_pm_direct(model.fc_x()[o].bits(), features.bits());
        scores_y[o] = dot_pm_direct(model.fc_y()[o].bits(), features.bits());
    }

    Ok(InferenceResult {
        prediction: PredictionDistribution::from_scores(scores_x, scores_y),
        input_bits,
        conv_planes,
        pooled_planes,
        features,
    })
}

/// Direct ±1 dot product of two {0,1}-coded vectors.
fn dot_pm_direct(a: &[u8], b: &[u8]) -> i32 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (2 * x as i32 - 1) * (2 * y as i32 - 1))
        .sum()
}

/// Fraction of cells on which two binary planes agree.
pub fn plane_agreement(a: &BitPlane, b: &BitPlane) -> Result<f64, PlaneError> {
    a.same_shape(b)?;
    let equal = a
        .cells()
        .iter()
        .zip(b.cells())
        .filter(|(x, y)| x == y)
        .count();
    Ok(equal as f64 / a.cells().len() as f64)
}

/// Normalized L1 similarity of two score vectors: `1 − mean|a−b| / range`.
pub fn score_agreement(a: &[i32], b: &[i32], range: f64) -> Result<f64, PlaneError> {
    if a.len() != b.len() {
        return Err(PlaneError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let mean_abs = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum::<f64>()
        / a.len() as f64;
    Ok(1.0 - mean_abs / range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::model::{ConvKernel, FEATURE_LEN};
    use crate::ppa::{not, BitPlane};
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(rng: &mut ChaCha8Rng) -> GrayImage {
        GrayImage::from_pixels(
            INPUT_SIZE,
            INPUT_SIZE,
            (0..INPUT_SIZE * INPUT_SIZE).map(|_| rng.gen()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_paths_agree_bit_exactly() {
        let model = BnnModel::random(123);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let frame = random_frame(&mut rng);
            let mut noiseless = NoiseModel::noiseless();
            let ppa = infer_ppa(&model, &frame, &mut noiseless).unwrap();
            let reference = infer_reference(&model, &frame).unwrap();
            assert_eq!(ppa, reference);
        }
    }

    #[test]
    fn reference_is_deterministic() {
        let model = BnnModel::random(5);
        let frame = random_frame(&mut ChaCha8Rng::seed_from_u64(6));
        assert_eq!(
            infer_reference(&model, &frame).unwrap(),
            infer_reference(&model, &frame).unwrap()
        );
    }

    #[test]
    fn all_zero_frame_propagates_constant_input() {
        // Pixel 0 centers to −128, below the default threshold, so the input
        // plane is all zeros and each conv interior value is −Σtaps.
        let model = BnnModel::random(9);
        let result = infer_reference(&model, &GrayImage::new(INPUT_SIZE, INPUT_SIZE)).unwrap();
        assert_eq!(result.input_bits, BitPlane::zeros(INPUT_SIZE));
        for (c, plane) in result.conv_planes.iter().enumerate() {
            let kernel_sum: i32 = model.conv_kernels()[c]
                .taps()
                .iter()
                .map(|&t| t as i32)
                .sum();
            let expect = (-kernel_sum) as f32 >= model.conv_thresholds()[c];
            // Interior cells all see the full kernel.
            assert_eq!(plane.get(30, 30) != 0, expect, "channel {c}");
        }
    }

    #[test]
    fn perfect_feature_match_scores_full_length() {
        // Build a model whose fc_x[3] equals the feature vector produced by a
        // frame, then check that output's score is exactly F.
        let model = BnnModel::random(31);
        let frame = random_frame(&mut ChaCha8Rng::seed_from_u64(32));
        let base = infer_reference(&model, &frame).unwrap();

        let mut fc_x = model.fc_x().to_vec();
        fc_x[3] = base.features.clone();
        let rigged = BnnModel::new(
            model.conv_kernels().to_vec(),
            model.conv_thresholds().to_vec(),
            fc_x,
            model.fc_y().to_vec(),
            model.input_threshold(),
        )
        .unwrap();
        let result = infer_reference(&rigged, &frame).unwrap();
        assert_eq!(result.prediction.scores_x[3], FEATURE_LEN as i32);
        assert_eq!(result.prediction.label_x, 3);
    }

    #[test]
    fn scores_match_direct_dot_product_oracle() {
        let model = BnnModel::random(55);
        let frame = random_frame(&mut ChaCha8Rng::seed_from_u64(56));
        let mut noiseless = NoiseModel::noiseless();
        let result = infer_ppa(&model, &frame, &mut noiseless).unwrap();
        for o in 0..HEAD_OUTPUTS {
            let oracle: i64 = model.fc_x()[o]
                .bits()
                .iter()
                .zip(result.features.bits())
                .map(|(&w, &f)| (2 * w as i64 - 1) * (2 * f as i64 - 1))
                .sum();
            assert_eq!(result.prediction.scores_x[o] as i64, oracle);
        }
    }

    #[test]
    fn wrong_frame_size_is_rejected() {
        let model = BnnModel::random(2);
        let frame = GrayImage::new(32, 32);
        assert!(infer_reference(&model, &frame).is_err());
        assert!(infer_ppa(&model, &frame, &mut NoiseModel::noiseless()).is_err());
    }

    #[test]
    fn ppa_inference_is_reproducible_for_a_fixed_noise_seed() {
        let model = BnnModel::random(88);
        let frame = random_frame(&mut ChaCha8Rng::seed_from_u64(89));
        let mut n1 = NoiseModel::new(1.0, 0.25, 1234);
        let mut n2 = NoiseModel::new(1.0, 0.25, 1234);
        assert_eq!(
            infer_ppa(&model, &frame, &mut n1).unwrap(),
            infer_ppa(&model, &frame, &mut n2).unwrap()
        );
    }

    #[test]
    fn agreement_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = BitPlane::from_fn(16, |_, _| rng.next_u32() & 1 == 1);
        assert_eq!(plane_agreement(&p, &p).unwrap(), 1.0);
        assert_eq!(plane_agreement(&p, &not(&p)).unwrap(), 0.0);
    }

    #[test]
    fn score_agreement_is_one_for_identical_vectors() {
        let s = [5, -3, 100, 0, 7, 7, -9, 2];
        assert_eq!(
            score_agreement(&s, &s, 2.0 * FEATURE_LEN as f64).unwrap(),
            1.0
        );
    }

    #[test]
    fn default_noise_keeps_conv_agreement_high() {
        let model = BnnModel::random(300);
        let mut rng = ChaCha8Rng::seed_from_u64(301);
        let mut noise = NoiseModel::with_defaults(302);
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..20 {
            let frame = random_frame(&mut rng);
            let noisy = infer_ppa(&model, &frame, &mut noise).unwrap();
            let exact = infer_reference(&model, &frame).unwrap();
            for (a, b) in noisy.conv_planes.iter().zip(&exact.conv_planes) {
                total += plane_agreement(a, b).unwrap();
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!(mean >= 0.9, "mean conv agreement {mean}");
    }

    #[test]
    fn conv_direction_distinguishes_oriented_kernels() {
        // A vertical-edge frame and a horizontal-edge frame must produce
        // different activations under an oriented kernel; guards against
        // transposed tap/shift indexing, which the zero-noise equivalence
        // check alone cannot catch (both paths could be transposed together).
        let kernel = ConvKernel::new([-1, 1, 1, -1, 1, 1, -1, 1, 1]).unwrap(); // left column −1
        let model = BnnModel::new(
            vec![kernel; CHANNELS],
            vec![2.5; CHANNELS],
            BnnModel::random(1).fc_x().to_vec(),
            BnnModel::random(1).fc_y().to_vec(),
            0.0,
        )
        .unwrap();

        // Bright right half: columns >= 32 are 255, else 0.
        let mut vertical = GrayImage::new(INPUT_SIZE, INPUT_SIZE);
        for y in 0..INPUT_SIZE {
            for x in 32..INPUT_SIZE {
                vertical.set(x, y, 255);
            }
        }
        let result = infer_reference(&model, &vertical).unwrap();
        // Taps read columns x−1, x, x+1. Hand-computed sums:
        //   x=32: dark/bright/bright → (−1)(−1)·3 + 3 + 3 = 9  → on
        //   x=50: all bright         → −3 + 3 + 3 = 3          → on
        //   x=10: all dark           → 3 − 3 − 3 = −3          → off
        //   x=31: dark/dark/bright   → 3 − 3 + 3 = 3           → on
        //   x=30: all dark           → −3                      → off
        assert_eq!(result.conv_planes[0].get(32, 30), 1);
        assert_eq!(result.conv_planes[0].get(50, 30), 1);
        assert_eq!(result.conv_planes[0].get(10, 30), 0);
        assert_eq!(result.conv_planes[0].get(31, 30), 1);
        assert_eq!(result.conv_planes[0].get(30, 30), 0);
    }
}
