//! The instruction subset of the array needed for binarized-CNN inference.
//!
//! Everything here operates on whole planes at once, the way the physical
//! array does. The analogue ops (`load_image`, `accumulate_shifted`) draw
//! from the `NoiseModel`; the digital ops are exact.
//!
//! Shift border policy: cells shifted in from outside the array read as 0,
//! and in the ±1 accumulation they contribute 0 rather than −1.

use crate::image::GrayImage;

use super::noise::NoiseModel;
use super::plane::{AnalogPlane, BitPlane, PlaneError, AREG_MAX, AREG_MIN};

/// Load an 8-bit image into an analogue register: `pixels − 128` plus one
/// read-noise sample per cell, saturated to the register range.
pub fn load_image(img: &GrayImage, noise: &mut NoiseModel) -> Result<AnalogPlane, PlaneError> {
    if img.width() != img.height() {
        return Err(PlaneError::ShapeMismatch {
            expected: img.width(),
            got: img.height(),
        });
    }
    let size = img.width();
    let values = img
        .pixels()
        .iter()
        .map(|&p| (p as f32 - 128.0 + noise.read_sample()).clamp(AREG_MIN, AREG_MAX))
        .collect();
    Ok(AnalogPlane::from_values(size, values))
}

/// Binarize an analogue plane: 1 where the value is ≥ `t` (inclusive).
pub fn threshold(a: &AnalogPlane, t: f32) -> BitPlane {
    let bits = a.values().iter().map(|&v| (v >= t) as u8).collect();
    BitPlane::from_cells(a.size(), bits)
}

/// Translate a bit plane by (`dx`, `dy`): `out[y][x] = p[y−dy][x−dx]`,
/// zero-filled at the borders. Shift magnitudes must stay below the plane
/// size.
pub fn shift(p: &BitPlane, dx: i32, dy: i32) -> Result<BitPlane, PlaneError> {
    let size = p.size();
    if dx.unsigned_abs() as usize >= size || dy.unsigned_abs() as usize >= size {
        return Err(PlaneError::ShiftOutOfRange { dx, dy, size });
    }
    let mut out = BitPlane::zeros(size);
    for y in 0..size {
        let sy = y as i32 - dy;
        if sy < 0 || sy >= size as i32 {
            continue;
        }
        for x in 0..size {
            let sx = x as i32 - dx;
            if sx < 0 || sx >= size as i32 {
                continue;
            }
            if p.get(sx as usize, sy as usize) != 0 {
                out.set(x, y, true);
            }
        }
    }
    Ok(out)
}

/// Element-wise XNOR: 1 where the planes agree. In ±1 coding this is the
/// binary multiply.
pub fn xnor(a: &BitPlane, b: &BitPlane) -> Result<BitPlane, PlaneError> {
    a.same_shape(b)?;
    let bits = a
        .cells()
        .iter()
        .zip(b.cells())
        .map(|(&x, &y)| (x == y) as u8)
        .collect();
    Ok(BitPlane::from_cells(a.size(), bits))
}

/// Element-wise complement.
pub fn not(p: &BitPlane) -> BitPlane {
    let bits = p.cells().iter().map(|&b| 1 - b).collect();
    BitPlane::from_cells(p.size(), bits)
}

/// Global count of set bits (the array's event/bit-counting readout).
pub fn popcount_global(p: &BitPlane) -> u32 {
    p.cells().iter().map(|&b| b as u32).sum()
}

/// One shift-and-add step of the array convolution:
/// `a' = clamp(a + sign·pm(shift(p, dx, dy)) + op_noise)` where `pm` maps
/// {0,1} to {−1,+1} and border cells shifted in from outside contribute 0.
pub fn accumulate_shifted(
    a: &AnalogPlane,
    p: &BitPlane,
    dx: i32,
    dy: i32,
    sign: i32,
    noise: &mut NoiseModel,
) -> Result<AnalogPlane, PlaneError> {
    if a.size() != p.size() {
        return Err(PlaneError::ShapeMismatch {
            expected: a.size(),
            got: p.size(),
        });
    }
    let size = a.size();
    if dx.unsigned_abs() as usize >= size || dy.unsigned_abs() as usize >= size {
        return Err(PlaneError::ShiftOutOfRange { dx, dy, size });
    }
    let sign = if sign >= 0 { 1.0f32 } else { -1.0f32 };
    let mut out = a.clone();
    let values = out.values_mut();
    for y in 0..size {
        let sy = y as i32 - dy;
        let row_in_bounds = sy >= 0 && sy < size as i32;
        for x in 0..size {
            let sx = x as i32 - dx;
            let contribution = if row_in_bounds && sx >= 0 && sx < size as i32 {
                let bit = p.get(sx as usize, sy as usize);
                sign * (2.0 * bit as f32 - 1.0)
            } else {
                0.0
            };
            let idx = y * size + x;
            values[idx] =
                (values[idx] + contribution + noise.op_sample()).clamp(AREG_MIN, AREG_MAX);
        }
    }
    Ok(out)
}

/// OR-pool over non-overlapping `window`×`window` blocks; for binary values
/// this is exactly max-pooling. The plane size must be divisible by the
/// window.
pub fn or_pool(p: &BitPlane, window: usize) -> Result<BitPlane, PlaneError> {
    let size = p.size();
    if window == 0 || size % window != 0 {
        return Err(PlaneError::ShapeMismatch {
            expected: window,
            got: size,
        });
    }
    let out_size = size / window;
    let mut out = BitPlane::zeros(out_size);
    for cy in 0..out_size {
        for cx in 0..out_size {
            'block: for by in 0..window {
                for bx in 0..window {
                    if p.get(cx * window + bx, cy * window + by) != 0 {
                        out.set(cx, cy, true);
                        break 'block;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_plane(size: usize, rng: &mut ChaCha8Rng) -> BitPlane {
        BitPlane::from_fn(size, |_, _| rng.next_u32() & 1 == 1)
    }

    fn image_from(size: usize, value: u8) -> GrayImage {
        GrayImage::from_pixels(size, size, vec![value; size * size]).unwrap()
    }

    #[test]
    fn load_image_offsets_by_128() {
        let mut n = NoiseModel::noiseless();
        let p = load_image(&image_from(8, 0), &mut n).unwrap();
        assert!(p.values().iter().all(|&v| v == -128.0));
        let p = load_image(&image_from(8, 255), &mut n).unwrap();
        assert!(p.values().iter().all(|&v| v == 127.0));
    }

    #[test]
    fn load_image_is_deterministic_per_seed() {
        let img = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            GrayImage::from_pixels(16, 16, (0..256).map(|_| rng.gen()).collect()).unwrap()
        };
        let mut n1 = NoiseModel::new(2.0, 0.0, 7);
        let mut n2 = NoiseModel::new(2.0, 0.0, 7);
        let a = load_image(&img, &mut n1).unwrap();
        let b = load_image(&img, &mut n2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_image_rejects_non_square() {
        let img = GrayImage::new(8, 4);
        assert!(load_image(&img, &mut NoiseModel::noiseless()).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let p = AnalogPlane::constant(4, 5.0);
        assert_eq!(threshold(&p, 5.0), BitPlane::ones(4));
        let p = AnalogPlane::constant(4, 4.999);
        assert_eq!(threshold(&p, 5.0), BitPlane::zeros(4));
    }

    #[test]
    fn threshold_matches_element_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f32> = (0..64 * 64).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let plane = AnalogPlane::from_values(64, values.clone());
        let got = threshold(&plane, 0.0);
        for y in 0..64 {
            for x in 0..64 {
                let expect = (values[y * 64 + x] >= 0.0) as u8;
                assert_eq!(got.get(x, y), expect);
            }
        }
    }

    #[test]
    fn shift_identity_and_unit_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_plane(16, &mut rng);
        assert_eq!(shift(&p, 0, 0).unwrap(), p);

        let mut single = BitPlane::zeros(4);
        single.set(0, 0, true);
        let moved = shift(&single, 1, 1).unwrap();
        assert_eq!(popcount_global(&moved), 1);
        assert_eq!(moved.get(1, 1), 1);
    }

    #[test]
    fn shift_matches_index_arithmetic_oracle() {
        // 1,000 random 4x4 planes over all |dx|,|dy| <= 2.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let p = random_plane(4, &mut rng);
            for dy in -2i32..=2 {
                for dx in -2i32..=2 {
                    let got = shift(&p, dx, dy).unwrap();
                    for y in 0..4i32 {
                        for x in 0..4i32 {
                            let (sx, sy) = (x - dx, y - dy);
                            let expect = if (0..4).contains(&sx) && (0..4).contains(&sy) {
                                p.get(sx as usize, sy as usize)
                            } else {
                                0
                            };
                            assert_eq!(got.get(x as usize, y as usize), expect);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shift_rejects_out_of_range() {
        let p = BitPlane::zeros(4);
        assert!(matches!(
            shift(&p, 4, 0),
            Err(PlaneError::ShiftOutOfRange { .. })
        ));
        assert!(shift(&p, 3, -3).is_ok());
    }

    #[test]
    fn shift_composes_when_no_bit_crosses_the_border() {
        let mut p = BitPlane::zeros(8);
        p.set(3, 3, true);
        p.set(4, 2, true);
        let once = shift(&shift(&p, 1, 0).unwrap(), 0, 2).unwrap();
        let combined = shift(&p, 1, 2).unwrap();
        assert_eq!(once, combined);
    }

    #[test]
    fn xnor_reflexivity_and_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = random_plane(16, &mut rng);
        assert_eq!(xnor(&p, &p).unwrap(), BitPlane::ones(16));
        assert_eq!(xnor(&p, &not(&p)).unwrap(), BitPlane::zeros(16));
    }

    #[test]
    fn xnor_matches_truth_table_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = random_plane(32, &mut rng);
        let b = random_plane(32, &mut rng);
        let got = xnor(&a, &b).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(got.get(x, y), (a.get(x, y) == b.get(x, y)) as u8);
            }
        }
        // Commutative through popcount.
        assert_eq!(
            popcount_global(&xnor(&a, &b).unwrap()),
            popcount_global(&xnor(&b, &a).unwrap())
        );
    }

    #[test]
    fn xnor_rejects_shape_mismatch() {
        assert!(xnor(&BitPlane::zeros(4), &BitPlane::zeros(8)).is_err());
    }

    #[test]
    fn popcount_extremes_and_complement_identity() {
        assert_eq!(popcount_global(&BitPlane::zeros(64)), 0);
        assert_eq!(popcount_global(&BitPlane::ones(64)), 4096);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let p = random_plane(16, &mut rng);
            let naive: u32 = (0..16)
                .flat_map(|y| (0..16).map(move |x| (x, y)))
                .map(|(x, y)| p.get(x, y) as u32)
                .sum();
            assert_eq!(popcount_global(&p), naive);
            assert_eq!(popcount_global(&not(&p)), 256 - naive);
        }
    }

    #[test]
    fn accumulate_all_ones_in_place() {
        let a = AnalogPlane::zeros(8);
        let p = BitPlane::ones(8);
        let mut n = NoiseModel::noiseless();
        let plus = accumulate_shifted(&a, &p, 0, 0, 1, &mut n).unwrap();
        assert!(plus.values().iter().all(|&v| v == 1.0));
        let minus = accumulate_shifted(&a, &p, 0, 0, -1, &mut n).unwrap();
        assert!(minus.values().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn nine_step_box_kernel_shows_border_falloff() {
        // 3x3 all-ones kernel over an all-ones plane: interior 9, edge 6,
        // corner 4, forced by the zero-fill border rule.
        let p = BitPlane::ones(8);
        let mut acc = AnalogPlane::zeros(8);
        let mut n = NoiseModel::noiseless();
        for dy in -1..=1 {
            for dx in -1..=1 {
                acc = accumulate_shifted(&acc, &p, dx, dy, 1, &mut n).unwrap();
            }
        }
        assert_eq!(acc.get(4, 4), 9.0);
        assert_eq!(acc.get(0, 4), 6.0);
        assert_eq!(acc.get(4, 0), 6.0);
        assert_eq!(acc.get(0, 0), 4.0);
        assert_eq!(acc.get(7, 7), 4.0);
    }

    #[test]
    fn accumulate_saturates_at_register_range() {
        let a = AnalogPlane::constant(4, 127.0);
        let p = BitPlane::ones(4);
        let mut n = NoiseModel::noiseless();
        let out = accumulate_shifted(&a, &p, 0, 0, 1, &mut n).unwrap();
        assert!(out.values().iter().all(|&v| v == 127.0));
        let a = AnalogPlane::constant(4, -128.0);
        let out = accumulate_shifted(&a, &p, 0, 0, -1, &mut n).unwrap();
        assert!(out.values().iter().all(|&v| v == -128.0));
    }

    #[test]
    fn or_pool_is_max_over_window() {
        let mut p = BitPlane::zeros(8);
        p.set(5, 2, true); // block (1, 0)
        let pooled = or_pool(&p, 4).unwrap();
        assert_eq!(pooled.size(), 2);
        assert_eq!(pooled.get(1, 0), 1);
        assert_eq!(pooled.get(0, 0), 0);
        assert_eq!(pooled.get(0, 1), 0);
        assert_eq!(pooled.get(1, 1), 0);
    }

    #[test]
    fn or_pool_monotone_in_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let p = random_plane(16, &mut rng);
            let pooled = or_pool(&p, 4).unwrap();
            // Setting any bit can only keep pooled outputs or raise them.
            let mut p2 = p.clone();
            let (x, y) = (rng.gen_range(0..16), rng.gen_range(0..16));
            p2.set(x, y, true);
            let pooled2 = or_pool(&p2, 4).unwrap();
            for cy in 0..4 {
                for cx in 0..4 {
                    assert!(pooled2.get(cx, cy) >= pooled.get(cx, cy));
                }
            }
        }
    }
}
