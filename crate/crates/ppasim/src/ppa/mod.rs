//! Pixel-processor-array emulation: register planes, the instruction subset
//! used for binarized-CNN inference, and the analogue noise model.
//!
//! Planes are plain values; nothing in here locks or shares state. With both
//! noise sigmas at zero every analogue pipeline is bit-exact equal to its
//! integer-arithmetic counterpart, which the inference module exploits as a
//! cross-check.

mod noise;
mod ops;
mod plane;

pub use noise::{NoiseModel, DEFAULT_SIGMA_OP, DEFAULT_SIGMA_READ};
pub use ops::{
    accumulate_shifted, load_image, not, or_pool, popcount_global, shift, threshold, xnor,
};
pub use plane::{
    AnalogPlane, BitPlane, BitVector, PlaneError, AREG_MAX, AREG_MIN, CNN_PLANE_SIZE,
    SENSOR_PLANE_SIZE,
};
