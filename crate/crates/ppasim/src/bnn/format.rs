//! Binary model container.
//!
//! Layout (all multi-byte integers little-endian):
//!
//! ```text
//! offset  size            field
//! 0       4               magic "BNN1"
//! 4       2               u16 channel count C
//! 6       2               u16 kernel side K
//! 8       2               u16 input plane side
//! 10      2               u16 pool window
//! 12      4               u32 feature length F
//! 16      2               u16 outputs per head
//! 18      2               u16 reserved, must be 0
//! 20      4               f32 input threshold
//! 24      C*ceil(K*K/8)   conv kernels, one bit per weight, row-major taps,
//!                         LSB-first within each byte, 1 ⇒ +1 / 0 ⇒ −1,
//!                         each kernel padded up to a byte boundary
//! ...     C*4             conv thresholds, f32 each
//! ...     H*ceil(F/8)     fc_x weight vectors, bit-packed as above,
//!                         each vector starting on a byte boundary
//! ...     H*ceil(F/8)     fc_y weight vectors
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::model::{
    BnnModel, ConvKernel, ModelError, CHANNELS, FEATURE_LEN, HEAD_OUTPUTS, INPUT_SIZE,
    KERNEL_SIZE, POOL_WINDOW,
};
use crate::ppa::BitVector;

pub const MODEL_MAGIC: [u8; 4] = *b"BNN1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad model magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("model file truncated")]
    Truncated,
    #[error("unsupported model geometry: {0}")]
    UnsupportedGeometry(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Pack a slice of 0/1 cells into bytes, LSB-first.
fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()
}

pub fn write_model<W: Write>(model: &BnnModel, w: &mut W) -> Result<(), FormatError> {
    w.write_all(&MODEL_MAGIC)?;
    w.write_all(&(CHANNELS as u16).to_le_bytes())?;
    w.write_all(&(KERNEL_SIZE as u16).to_le_bytes())?;
    w.write_all(&(INPUT_SIZE as u16).to_le_bytes())?;
    w.write_all(&(POOL_WINDOW as u16).to_le_bytes())?;
    w.write_all(&(FEATURE_LEN as u32).to_le_bytes())?;
    w.write_all(&(HEAD_OUTPUTS as u16).to_le_bytes())?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&model.input_threshold().to_le_bytes())?;
    for kernel in model.conv_kernels() {
        let bits: Vec<u8> = kernel.taps().iter().map(|&t| (t > 0) as u8).collect();
        w.write_all(&pack_bits(&bits))?;
    }
    for &t in model.conv_thresholds() {
        w.write_all(&t.to_le_bytes())?;
    }
    for head in [model.fc_x(), model.fc_y()] {
        for vec in head {
            w.write_all(&pack_bits(vec.bits()))?;
        }
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<BnnModel, FormatError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    parse_model(&buf)
}

fn parse_model(buf: &[u8]) -> Result<BnnModel, FormatError> {
    let take = |offset: usize, len: usize| -> Result<&[u8], FormatError> {
        buf.get(offset..offset + len).ok_or(FormatError::Truncated)
    };

    let magic: [u8; 4] = take(0, 4)?.try_into().unwrap();
    if magic != MODEL_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let u16_at = |off: usize| -> Result<usize, FormatError> {
        Ok(u16::from_le_bytes(take(off, 2)?.try_into().unwrap()) as usize)
    };
    let channels = u16_at(4)?;
    let kernel = u16_at(6)?;
    let input = u16_at(8)?;
    let pool = u16_at(10)?;
    let features = u32::from_le_bytes(take(12, 4)?.try_into().unwrap()) as usize;
    let outputs = u16_at(16)?;
    let geometry = (channels, kernel, input, pool, features, outputs);
    let expected = (
        CHANNELS,
        KERNEL_SIZE,
        INPUT_SIZE,
        POOL_WINDOW,
        FEATURE_LEN,
        HEAD_OUTPUTS,
    );
    if geometry != expected {
        return Err(FormatError::UnsupportedGeometry(format!(
            "{geometry:?}, this build supports {expected:?}"
        )));
    }
    let input_threshold = f32::from_le_bytes(take(20, 4)?.try_into().unwrap());

    let kernel_bytes = (KERNEL_SIZE * KERNEL_SIZE).div_ceil(8);
    let mut offset = 24;
    let mut kernels = Vec::with_capacity(CHANNELS);
    for _ in 0..CHANNELS {
        let bits = unpack_bits(take(offset, kernel_bytes)?, KERNEL_SIZE * KERNEL_SIZE);
        offset += kernel_bytes;
        let mut taps = [0i8; KERNEL_SIZE * KERNEL_SIZE];
        for (t, b) in taps.iter_mut().zip(&bits) {
            *t = if *b != 0 { 1 } else { -1 };
        }
        kernels.push(ConvKernel::new(taps)?);
    }

    let mut thresholds = Vec::with_capacity(CHANNELS);
    for _ in 0..CHANNELS {
        thresholds.push(f32::from_le_bytes(take(offset, 4)?.try_into().unwrap()));
        offset += 4;
    }

    let vec_bytes = FEATURE_LEN.div_ceil(8);
    let read_head = |offset: &mut usize| -> Result<Vec<BitVector>, FormatError> {
        let mut head = Vec::with_capacity(HEAD_OUTPUTS);
        for _ in 0..HEAD_OUTPUTS {
            let bits = unpack_bits(take(*offset, vec_bytes)?, FEATURE_LEN);
            *offset += vec_bytes;
            head.push(BitVector::from_bits(bits));
        }
        Ok(head)
    };
    let fc_x = read_head(&mut offset)?;
    let fc_y = read_head(&mut offset)?;

    Ok(BnnModel::new(
        kernels,
        thresholds,
        fc_x,
        fc_y,
        input_threshold,
    )?)
}

pub fn save_model(model: &BnnModel, path: &Path) -> Result<(), FormatError> {
    let mut f = std::fs::File::create(path)?;
    write_model(model, &mut f)
}

pub fn load_model(path: &Path) -> Result<BnnModel, FormatError> {
    let mut f = std::fs::File::open(path)?;
    read_model(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let model = BnnModel::random(77);
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        let back = parse_model(&bytes).unwrap();
        assert_eq!(model, back);

        // Serialization itself is deterministic.
        let mut again = Vec::new();
        write_model(&model, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let model = BnnModel::random(1);
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            parse_model(&bytes),
            Err(FormatError::BadMagic(_))
        ));
    }

    #[test]
    fn truncation_is_rejected() {
        let model = BnnModel::random(2);
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(matches!(parse_model(&bytes), Err(FormatError::Truncated)));
    }

    #[test]
    fn pack_unpack_round_trip() {
        let bits: Vec<u8> = (0..19).map(|i| (i % 3 == 0) as u8).collect();
        assert_eq!(unpack_bits(&pack_bits(&bits), 19), bits);
    }
}
