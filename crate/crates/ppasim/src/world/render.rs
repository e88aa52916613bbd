//! Orthographic top-down camera: renders the jittered view window at sensor
//! resolution and box-downsamples it to the CNN input size.

use crate::image::{GrayImage, ImageError};

use super::texture::{FloorTexture, Texture};
use super::{JitterSample, Vec2, WorldState, VIEW_SIDE};

/// Sensor resolution (square).
pub const SENSOR_SIZE: usize = 256;
/// CNN input resolution (square).
pub const FRAME_SIZE: usize = 64;
/// Car body length along its heading, meters.
pub const CAR_LENGTH: f64 = 0.9;
/// Car body width, meters.
pub const CAR_WIDTH: f64 = 0.5;
/// Shade of the car body, darker than either floor tone.
pub const CAR_SHADE: u8 = 25;

/// Render the world through the drone camera perturbed by `jitter`, using
/// the world's own floor texture.
pub fn render(world: &WorldState, jitter: &JitterSample) -> GrayImage {
    render_with_texture(world, jitter, &FloorTexture::new(world.texture_seed))
}

/// Same, but with an arbitrary floor. The camera center is the drone
/// position plus the jitter translation; the window is rotated by the jitter
/// roll. Pixels covered by the car body take `CAR_SHADE`.
pub fn render_with_texture(
    world: &WorldState,
    jitter: &JitterSample,
    texture: &impl Texture,
) -> GrayImage {
    let cam = Vec2::new(world.drone.x + jitter.dx, world.drone.y + jitter.dy);
    let scale = VIEW_SIDE / SENSOR_SIZE as f64;
    let (sin_r, cos_r) = jitter.rot.sin_cos();
    let (sin_h, cos_h) = world.car.heading.sin_cos();
    let car = world.car.position;
    let half_len = CAR_LENGTH / 2.0;
    let half_wid = CAR_WIDTH / 2.0;

    let mut img = GrayImage::new(SENSOR_SIZE, SENSOR_SIZE);
    for py in 0..SENSOR_SIZE {
        let v = (py as f64 + 0.5) * scale - VIEW_SIDE / 2.0;
        for px in 0..SENSOR_SIZE {
            let u = (px as f64 + 0.5) * scale - VIEW_SIDE / 2.0;
            // Camera frame -> world frame.
            let wx = cam.x + cos_r * u - sin_r * v;
            let wy = cam.y + sin_r * u + cos_r * v;
            // World frame -> car frame.
            let dx = wx - car.x;
            let dy = wy - car.y;
            let local_x = cos_h * dx + sin_h * dy;
            let local_y = -sin_h * dx + cos_h * dy;
            let shade = if local_x.abs() <= half_len && local_y.abs() <= half_wid {
                CAR_SHADE
            } else {
                texture.sample(wx, wy)
            };
            img.set(px, py, shade);
        }
    }
    img
}

/// 4×4 box average from sensor to CNN resolution, rounding half up.
pub fn downsample(img: &GrayImage) -> Result<GrayImage, ImageError> {
    if img.width() != SENSOR_SIZE || img.height() != SENSOR_SIZE {
        return Err(ImageError::ShapeMismatch {
            expected_w: SENSOR_SIZE,
            expected_h: SENSOR_SIZE,
            got_w: img.width(),
            got_h: img.height(),
        });
    }
    let factor = SENSOR_SIZE / FRAME_SIZE;
    let cells = factor * factor;
    let mut out = GrayImage::new(FRAME_SIZE, FRAME_SIZE);
    for oy in 0..FRAME_SIZE {
        for ox in 0..FRAME_SIZE {
            let mut sum = 0u32;
            for by in 0..factor {
                for bx in 0..factor {
                    sum += img.get(ox * factor + bx, oy * factor + by) as u32;
                }
            }
            out.set(ox, oy, ((sum + cells as u32 / 2) / cells as u32) as u8);
        }
    }
    Ok(out)
}
