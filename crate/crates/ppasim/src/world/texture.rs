//! Procedural floor texture.
//!
//! Multi-octave value noise over world coordinates, thresholded to a
//! two-tone mid-gray pattern. Purely a function of (seed, x, y), so any two
//! renders of the same world region are identical and the pattern is anchored
//! to the floor, not to the camera.

/// Tone used where the noise field is below threshold.
///
/// Both tones sit above the mid-gray input binarization point, and the dark
/// tone keeps a 3-sigma margin against the default read noise: the floor
/// disrupts the sensor image and the analogue path, but binarized CNN input
/// stays a clean dark-object indicator. With dark texture at or below the
/// binarization point, texture false positives at 64×64 rival the car's own
/// footprint and cap localisation accuracy well short of usable.
pub const TONE_DARK: u8 = 131;
/// Tone used where the noise field is at or above threshold.
pub const TONE_LIGHT: u8 = 170;

/// Field level below which a point takes the dark tone.
const DARK_LEVEL: f64 = 0.45;

/// (wavelength in meters, weight); finest octaves dominate so the pattern
/// stays busy at sensor resolution.
const OCTAVES: [(f64, f64); 4] = [(2.0, 0.10), (1.0, 0.15), (0.5, 0.30), (0.25, 0.45)];

/// Anything that maps a world point to an 8-bit floor shade.
pub trait Texture {
    fn sample(&self, x: f64, y: f64) -> u8;
}

impl<F: Fn(f64, f64) -> u8> Texture for F {
    fn sample(&self, x: f64, y: f64) -> u8 {
        self(x, y)
    }
}

/// The default seeded two-tone floor.
#[derive(Debug, Clone, Copy)]
pub struct FloorTexture {
    seed: u64,
}

impl FloorTexture {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Blended multi-octave field in [0, 1).
    pub fn field(&self, x: f64, y: f64) -> f64 {
        OCTAVES
            .iter()
            .enumerate()
            .map(|(i, &(wavelength, weight))| {
                let octave_seed = self
                    .seed
                    .wrapping_add((i as u64).wrapping_mul(0x9e3779b97f4a7c15));
                weight * value_noise(octave_seed, x / wavelength, y / wavelength)
            })
            .sum()
    }
}

impl Texture for FloorTexture {
    fn sample(&self, x: f64, y: f64) -> u8 {
        if self.field(x, y) >= DARK_LEVEL {
            TONE_LIGHT
        } else {
            TONE_DARK
        }
    }
}

/// Bilinear value noise in [0, 1) with smoothstep fade between lattice
/// corners.
fn value_noise(seed: u64, u: f64, v: f64) -> f64 {
    let iu = u.floor();
    let iv = v.floor();
    let fu = smoothstep(u - iu);
    let fv = smoothstep(v - iv);
    let (iu, iv) = (iu as i64, iv as i64);
    let v00 = lattice(seed, iu, iv);
    let v10 = lattice(seed, iu + 1, iv);
    let v01 = lattice(seed, iu, iv + 1);
    let v11 = lattice(seed, iu + 1, iv + 1);
    let top = v00 + (v10 - v00) * fu;
    let bottom = v01 + (v11 - v01) * fu;
    top + (bottom - top) * fv
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Deterministic corner value in [0, 1) from a splitmix-style integer hash.
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let mut h = seed
        ^ (ix as u64).wrapping_mul(0x8ebc6af09c88c6e3)
        ^ (iy as u64).wrapping_mul(0x589965cc75374cc3);
    h = h.wrapping_add(0x9e3779b97f4a7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d049bb133111eb);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}
