//! Labeled-frame container and dataset generation.
//!
//! File layout (integers little-endian):
//!
//! ```text
//! 0   4        magic "LOC1"
//! 4   4        u32 record count
//! 8   n*4098   records: 64*64 grayscale bytes row-major,
//!              then label_x and label_y, one byte each
//! ```
//!
//! Generation samples the camera anywhere on the map, perturbs it with the
//! jitter stream, and places the car uniformly inside the jittered view so
//! every record carries an in-view label. Train and test draws come from
//! disjoint streams of the same seed, so the two sets never share a sample
//! sequence.

use std::io::{self, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image::GrayImage;

use super::render::{downsample, render, FRAME_SIZE};
use super::{pose_to_label, CameraJitter, CarPose, Vec2, WorldState, MAP_EXTENT, VIEW_SIDE};

pub const DATASET_MAGIC: [u8; 4] = *b"LOC1";

const RECORD_PIXELS: usize = FRAME_SIZE * FRAME_SIZE;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad dataset magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("dataset file truncated")]
    Truncated,
    #[error("record {index} has out-of-range label ({label_x}, {label_y})")]
    BadLabel { index: usize, label_x: u8, label_y: u8 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One training record: a CNN-resolution frame and its per-axis bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledFrame {
    pub image: GrayImage,
    pub label_x: u8,
    pub label_y: u8,
}

pub fn write_dataset<W: Write>(records: &[LabeledFrame], w: &mut W) -> Result<(), DatasetError> {
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for r in records {
        debug_assert_eq!(r.image.pixels().len(), RECORD_PIXELS);
        w.write_all(r.image.pixels())?;
        w.write_all(&[r.label_x, r.label_y])?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Vec<LabeledFrame>, DatasetError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != DATASET_MAGIC {
        return Err(DatasetError::BadMagic(magic));
    }
    let mut count_bytes = [0u8; 4];
    r.read_exact(&mut count_bytes).map_err(truncated)?;
    let count = u32::from_le_bytes(count_bytes) as usize;
    let mut records = Vec::with_capacity(count);
    for index in 0..count {
        let mut pixels = vec![0u8; RECORD_PIXELS];
        r.read_exact(&mut pixels).map_err(truncated)?;
        let mut labels = [0u8; 2];
        r.read_exact(&mut labels).map_err(truncated)?;
        let (label_x, label_y) = (labels[0], labels[1]);
        if label_x > 7 || label_y > 7 {
            return Err(DatasetError::BadLabel {
                index,
                label_x,
                label_y,
            });
        }
        records.push(LabeledFrame {
            image: GrayImage::from_pixels(FRAME_SIZE, FRAME_SIZE, pixels)
                .expect("record buffer sized above"),
            label_x,
            label_y,
        });
    }
    Ok(records)
}

fn truncated(e: io::Error) -> DatasetError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        DatasetError::Truncated
    } else {
        DatasetError::Io(e)
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledFrame>, DatasetError> {
    read_dataset(&mut std::fs::File::open(path)?)
}

pub fn save_dataset(records: &[LabeledFrame], path: &Path) -> Result<(), DatasetError> {
    write_dataset(records, &mut std::fs::File::create(path)?)
}

#[derive(Debug, Clone)]
pub struct DatasetParams {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub texture_seed: u64,
    pub sigma_trans: f64,
    pub sigma_rot: f64,
}

const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

/// Generate and write both dataset files. Byte-deterministic in the params.
pub fn generate_dataset(
    params: &DatasetParams,
    train_path: &Path,
    test_path: &Path,
) -> Result<(), DatasetError> {
    let train = synthesize_split(params, params.n_train, TRAIN_STREAM);
    save_dataset(&train, train_path)?;
    let test = synthesize_split(params, params.n_test, TEST_STREAM);
    save_dataset(&test, test_path)?;
    Ok(())
}

/// Synthesize one split from its own stream of the dataset seed.
pub fn synthesize_split(params: &DatasetParams, count: usize, stream: u64) -> Vec<LabeledFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);
    // The jitter stream is derived from the same split so the two files stay
    // fully independent.
    let mut jitter = CameraJitter::new(
        params.sigma_trans,
        params.sigma_rot,
        params.seed.wrapping_add(stream.wrapping_mul(0x517cc1b727220a95)),
    );

    // Keep the camera far enough from the map edge that the car, placed
    // anywhere in the (jittered) view, still lands inside the map.
    let lo = VIEW_SIDE / 2.0 + 0.5;
    let hi = MAP_EXTENT - VIEW_SIDE / 2.0 - 0.5;
    (0..count)
        .map(|_| {
            let cam_base = Vec2::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi));
            let j = jitter.sample();
            let offset = Vec2::new(
                rng.gen_range(-VIEW_SIDE / 2.0..VIEW_SIDE / 2.0),
                rng.gen_range(-VIEW_SIDE / 2.0..VIEW_SIDE / 2.0),
            );
            let heading = rng.gen_range(0.0..std::f64::consts::TAU);
            let (label_x, label_y) =
                pose_to_label(offset, VIEW_SIDE).expect("offset sampled inside the view");

            let cam = Vec2::new(cam_base.x + j.dx, cam_base.y + j.dy);
            let car_pos = cam.add(offset.rotate(j.rot));
            let world = WorldState {
                car: CarPose {
                    position: car_pos,
                    heading,
                },
                drone: cam_base,
                map_extent: MAP_EXTENT,
                texture_seed: params.texture_seed,
                time_step: 0,
            };
            let sensor = render(&world, &j);
            let image = downsample(&sensor).expect("sensor render is 256x256");
            LabeledFrame {
                image,
                label_x,
                label_y,
            }
        })
        .collect()
}
