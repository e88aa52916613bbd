//! Register planes of the emulated pixel-processor array.
//!
//! A `BitPlane` models a digital register: one bit per pixel, square layout.
//! An `AnalogPlane` models an analogue register: one real value per pixel,
//! saturating at the 8-bit-equivalent range `[-128, 127]`.
//!
//! Bit coding is fixed once for the whole crate: a stored `1` means `+1` and
//! a stored `0` means `-1` in the ±1 algebra used by binarized networks.

use thiserror::Error;

/// Default side length of the planes the CNN operates on.
pub const CNN_PLANE_SIZE: usize = 64;
/// Side length of full-resolution sensor planes.
pub const SENSOR_PLANE_SIZE: usize = 256;

/// Lower saturation bound of an analogue register.
pub const AREG_MIN: f32 = -128.0;
/// Upper saturation bound of an analogue register.
pub const AREG_MAX: f32 = 127.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlaneError {
    #[error("plane shape mismatch: expected {expected}x{expected}, got {got}x{got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("shift ({dx}, {dy}) out of range for a {size}x{size} plane")]
    ShiftOutOfRange { dx: i32, dy: i32, size: usize },
    #[error("vector length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
}

/// Square plane of binary values, row-major, one byte per cell holding 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    size: usize,
    bits: Vec<u8>,
}

impl BitPlane {
    /// All-zero plane.
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            bits: vec![0; size * size],
        }
    }

    /// All-one plane.
    pub fn ones(size: usize) -> Self {
        Self {
            size,
            bits: vec![1; size * size],
        }
    }

    /// Build from raw cells; every nonzero byte is stored as 1.
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                bits.push(f(x, y) as u8);
            }
        }
        Self { size, bits }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.bits[y * self.size + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.size + x] = v as u8;
    }

    /// Raw row-major cells, each 0 or 1.
    pub fn cells(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn from_cells(size: usize, bits: Vec<u8>) -> Self {
        debug_assert_eq!(bits.len(), size * size);
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { size, bits }
    }

    pub fn same_shape(&self, other: &BitPlane) -> Result<(), PlaneError> {
        if self.size == other.size {
            Ok(())
        } else {
            Err(PlaneError::ShapeMismatch {
                expected: self.size,
                got: other.size,
            })
        }
    }
}

/// Square plane of real values saturating at the analogue register range.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogPlane {
    size: usize,
    values: Vec<f32>,
}

impl AnalogPlane {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            values: vec![0.0; size * size],
        }
    }

    /// Build from raw values; every entry is clamped to the register range.
    pub fn from_values(size: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), size * size);
        let values = values
            .into_iter()
            .map(|v| v.clamp(AREG_MIN, AREG_MAX))
            .collect();
        Self { size, values }
    }

    pub fn constant(size: usize, v: f32) -> Self {
        Self::from_values(size, vec![v; size * size])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.size + x]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &AnalogPlane) -> Result<(), PlaneError> {
        if self.size == other.size {
            Ok(())
        } else {
            Err(PlaneError::ShapeMismatch {
                expected: self.size,
                got: other.size,
            })
        }
    }
}

/// Flat binary vector; the flattened feature form consumed by the binary
/// fully-connected heads. Same {0,1} ↔ {−1,+1} coding as `BitPlane`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v as u8;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Count of set bits.
    pub fn popcount(&self) -> u32 {
        self.bits.iter().map(|&b| b as u32).sum()
    }

    /// Element-wise XNOR: 1 where the two vectors agree.
    pub fn xnor(&self, other: &BitVector) -> Result<BitVector, PlaneError> {
        if self.len() != other.len() {
            return Err(PlaneError::LengthMismatch {
                a: self.len(),
                b: other.len(),
            });
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| (a == b) as u8)
            .collect();
        Ok(BitVector { bits })
    }

    /// ±1 dot product with `other` via the XNOR-popcount identity:
    /// `2·popcount(xnor(a, b)) − n`.
    pub fn dot_pm(&self, other: &BitVector) -> Result<i32, PlaneError> {
        let matches = self.xnor(other)?.popcount() as i32;
        Ok(2 * matches - self.len() as i32)
    }
}
