//! Desk-scale stand-in for the robot simulator: a flat textured floor, a car
//! following a preset course, and a drone-mounted downward camera with pose
//! jitter. Stepping is pure (state in, state out) and everything stochastic
//! is seeded.

mod dataset;
mod render;
mod texture;
mod trajectory;

pub use dataset::{
    generate_dataset, load_dataset, read_dataset, save_dataset, synthesize_split, write_dataset,
    DatasetError, DatasetParams, LabeledFrame, DATASET_MAGIC,
};
pub use render::{
    downsample, render, render_with_texture, CAR_LENGTH, CAR_SHADE, CAR_WIDTH, FRAME_SIZE,
    SENSOR_SIZE,
};
pub use texture::{FloorTexture, Texture, TONE_DARK, TONE_LIGHT};
pub use trajectory::{TrajectorySpec, Wave};

/// Side of the square ground window the camera images, in meters.
pub const VIEW_SIDE: f64 = 8.0;
/// Side of the square map, in meters.
pub const MAP_EXTENT: f64 = 16.0;
/// Position bins per axis across the view field.
pub const BINS_PER_AXIS: u8 = 8;
/// Default drone speed limit, meters per step.
pub const DEFAULT_V_MAX: f64 = 0.25;

/// Plain 2-D vector in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Clamp the magnitude to `max`, preserving direction.
    pub fn clamp_norm(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self.scale(max / n)
        } else {
            self
        }
    }

    /// Rotate by `angle` radians (counter-clockwise in x-right/y-down terms
    /// is irrelevant here; the same convention is used everywhere).
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Car pose: position plus heading in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarPose {
    pub position: Vec2,
    pub heading: f64,
}

/// Ground truth of the whole scene at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub car: CarPose,
    pub drone: Vec2,
    pub map_extent: f64,
    pub texture_seed: u64,
    pub time_step: u64,
}

impl WorldState {
    /// World at step 0 of a course, with the drone parked at `drone`.
    pub fn at_start(trajectory: &TrajectorySpec, drone: Vec2, texture_seed: u64) -> Self {
        Self {
            car: CarPose {
                position: trajectory.position(0),
                heading: trajectory.heading(0),
            },
            drone,
            map_extent: MAP_EXTENT,
            texture_seed,
            time_step: 0,
        }
    }
}

/// Camera-pose noise generator: per-frame translation and roll drawn from a
/// seeded stream, modeling the vibration and tilt of a flying platform.
#[derive(Debug, Clone)]
pub struct CameraJitter {
    sigma_trans: f64,
    sigma_rot: f64,
    seed: u64,
    rng: rand_chacha::ChaCha8Rng,
}

/// Default translational jitter std-dev, meters.
pub const DEFAULT_SIGMA_TRANS: f64 = 0.15;
/// Default rotational jitter std-dev, radians.
pub const DEFAULT_SIGMA_ROT: f64 = 0.03;

/// One drawn camera perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JitterSample {
    pub dx: f64,
    pub dy: f64,
    pub rot: f64,
}

impl JitterSample {
    /// No perturbation at all.
    pub fn none() -> Self {
        Self::default()
    }
}

impl CameraJitter {
    pub fn new(sigma_trans: f64, sigma_rot: f64, seed: u64) -> Self {
        use rand::SeedableRng;
        Self {
            sigma_trans: sigma_trans.max(0.0),
            sigma_rot: sigma_rot.max(0.0),
            seed,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(DEFAULT_SIGMA_TRANS, DEFAULT_SIGMA_ROT, seed)
    }

    pub fn sigma_trans(&self) -> f64 {
        self.sigma_trans
    }

    pub fn sigma_rot(&self) -> f64 {
        self.sigma_rot
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draw the next perturbation. Zero sigmas draw nothing from the stream.
    pub fn sample(&mut self) -> JitterSample {
        JitterSample {
            dx: self.gauss(self.sigma_trans),
            dy: self.gauss(self.sigma_trans),
            rot: self.gauss(self.sigma_rot),
        }
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        use rand::RngCore;
        if sigma == 0.0 {
            return 0.0;
        }
        let u = |rng: &mut rand_chacha::ChaCha8Rng| {
            (((rng.next_u64() >> 11) + 1) as f64) / ((1u64 << 53) as f64 + 1.0)
        };
        let u1 = u(&mut self.rng);
        let u2 = u(&mut self.rng);
        sigma * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Map a car offset in the camera frame to per-axis bins. Bins are half-open
/// `[lo, lo + view/8)`; `None` when the offset falls outside the view on
/// either axis.
pub fn pose_to_label(offset: Vec2, view_side: f64) -> Option<(u8, u8)> {
    let bin = |o: f64| -> Option<u8> {
        let b = ((o + view_side / 2.0) / (view_side / BINS_PER_AXIS as f64)).floor();
        if (0.0..BINS_PER_AXIS as f64).contains(&b) {
            Some(b as u8)
        } else {
            None
        }
    };
    Some((bin(offset.x)?, bin(offset.y)?))
}

/// Advance the world one step: the car moves along its preset course, the
/// drone integrates the commanded velocity (magnitude-clamped to `v_max`),
/// and the step counter increments.
pub fn step(
    world: &WorldState,
    drone_velocity: Vec2,
    trajectory: &TrajectorySpec,
    v_max: f64,
) -> WorldState {
    let k = world.time_step + 1;
    let v = drone_velocity.clamp_norm(v_max);
    let drone = Vec2 {
        x: (world.drone.x + v.x).clamp(0.0, world.map_extent - f64::EPSILON),
        y: (world.drone.y + v.y).clamp(0.0, world.map_extent - f64::EPSILON),
    };
    WorldState {
        car: CarPose {
            position: trajectory.position(k),
            heading: trajectory.heading(k),
        },
        drone,
        map_extent: world.map_extent,
        texture_seed: world.texture_seed,
        time_step: k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_bins_are_half_open() {
        assert_eq!(pose_to_label(Vec2::new(0.0, 0.0), 8.0), Some((4, 4)));
        assert_eq!(pose_to_label(Vec2::new(-4.0, -4.0), 8.0), Some((0, 0)));
        assert_eq!(pose_to_label(Vec2::new(3.999, -0.001), 8.0), Some((7, 3)));
        assert_eq!(pose_to_label(Vec2::new(4.0, 0.0), 8.0), None);
        assert_eq!(pose_to_label(Vec2::new(0.0, -4.001), 8.0), None);
    }

    #[test]
    fn zero_velocity_step_only_advances_time() {
        let traj = TrajectorySpec::stationary(Vec2::new(5.0, 5.0));
        let world = WorldState::at_start(&traj, Vec2::new(2.0, 3.0), 1);
        let next = step(&world, Vec2::new(0.0, 0.0), &traj, DEFAULT_V_MAX);
        assert_eq!(next.car, world.car);
        assert_eq!(next.drone, world.drone);
        assert_eq!(next.time_step, 1);
    }

    #[test]
    fn velocity_magnitude_is_clamped() {
        let traj = TrajectorySpec::stationary(Vec2::new(5.0, 5.0));
        let world = WorldState::at_start(&traj, Vec2::new(2.0, 3.0), 1);
        let next = step(&world, Vec2::new(10.0, 0.0), &traj, DEFAULT_V_MAX);
        assert!((next.drone.x - 2.25).abs() < 1e-12);
        assert_eq!(next.drone.y, 3.0);
    }

    #[test]
    fn car_follows_the_course() {
        let traj = TrajectorySpec::chaotic(Vec2::new(8.0, 8.0), 3);
        let mut world = WorldState::at_start(&traj, Vec2::new(8.0, 8.0), 1);
        for _ in 0..10 {
            world = step(&world, Vec2::default(), &traj, DEFAULT_V_MAX);
        }
        assert_eq!(world.car.position, traj.position(10));
        assert_eq!(world.time_step, 10);
    }

    #[test]
    fn jitter_is_seed_deterministic_and_zero_sigma_is_exact() {
        let mut a = CameraJitter::new(0.2, 0.05, 9);
        let mut b = CameraJitter::new(0.2, 0.05, 9);
        for _ in 0..20 {
            assert_eq!(a.sample(), b.sample());
        }
        let mut none = CameraJitter::new(0.0, 0.0, 9);
        assert_eq!(none.sample(), JitterSample::none());
    }

    #[test]
    fn clamp_norm_preserves_direction() {
        let v = Vec2::new(3.0, 4.0).clamp_norm(1.0);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.y / v.x - 4.0 / 3.0).abs() < 1e-12);
        let small = Vec2::new(0.1, 0.0).clamp_norm(1.0);
        assert_eq!(small, Vec2::new(0.1, 0.0));
    }
}
