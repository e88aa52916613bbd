//! Semi-simulated robot-vision platform: a pixel-processor-array emulator
//! runs binarized-CNN inference on frames streamed from a lightweight world
//! simulator, and the predictions close a PID tracking loop around a drone
//! following a moving car.
//!
//! The pieces, bottom to top:
//!
//! - [`ppa`] — register planes, the array instruction subset, analogue noise.
//! - [`bnn`] — the two-headed binarized localisation CNN, runnable both on
//!   the emulated array and via an exact integer reference path.
//! - [`world`] — top-down renderer, camera jitter, dataset generation, and
//!   the preset car trajectory.
//! - [`train`] — straight-through-estimator training of the latent model and
//!   export with batch-norm folding.
//! - [`bridge`] — framed wire protocol linking the simulator process to the
//!   vision host, with one server and one client endpoint.
//! - [`track`] — PID control, closed-loop episodes, and trajectory metrics.
//!
//! Every stochastic component is seeded; identical seeds reproduce identical
//! bytes, from dataset files to tracking logs.

pub mod bnn;
pub mod image;
pub mod ppa;
pub mod train;
pub mod world;
