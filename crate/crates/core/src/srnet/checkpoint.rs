//! Binary weight container. All fields little-endian:
//!
//! | offset | type    | field                                   |
//! |--------|---------|-----------------------------------------|
//! | 0      | [u8; 4] | magic `CZSR`                            |
//! | 4      | u32     | format version (1)                      |
//! | 8      | u32     | SR channels C                           |
//! | 12     | u32     | SR encoder residual blocks B            |
//! | 16     | u32     | SR decoder residual blocks              |
//! | 20     | u32     | scale s                                 |
//! | 24     | u32     | kernel size (3)                         |
//! | 28     | u32     | shift channels                          |
//! | 32     | u32     | shift strided layers                    |
//! | 36     | f32     | shift bound in pixels                   |
//! | 40     | u64     | SR parameter count                      |
//! | 48     | u64     | shift parameter count                   |
//! | 56     | f32[]   | SR parameters, then shift parameters    |
//!
//! Parameter order follows [`Parameters::visit`]: for every convolution the
//! weight tensor `[out][in][ky][kx]` and then its bias; modules in the order
//! encoder (input conv, mid conv, residual blocks), fusion, decoder
//! (residual blocks, head), and for the shift model its strided convs then
//! the dense head `[out][in]` and bias.

use std::path::Path;

use super::model::{SrConfig, SrModel};
use super::nn::Parameters;
use super::shift::{ShiftConfig, ShiftModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CZSR";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 56;

pub fn write_checkpoint(sr: &SrModel, shift: &ShiftModel) -> Vec<u8> {
    let a = sr.flatten();
    let b = shift.flatten();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (a.len() + b.len()));
    out.extend_from_slice(CHECKPOINT_MAGIC);
    let c = sr.config;
    for v in [
        CHECKPOINT_VERSION,
        c.channels as u32,
        c.res_blocks as u32,
        c.decoder_blocks as u32,
        c.scale as u32,
        3,
        shift.config.channels as u32,
        shift.config.layers as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&shift.config.max_shift.to_le_bytes());
    out.extend_from_slice(&(a.len() as u64).to_le_bytes());
    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    for v in a.iter().chain(&b) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(SrModel, ShiftModel)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    if u32_at(24) != 3 {
        return Err(bad("kernel size other than 3"));
    }
    let sr_cfg = SrConfig {
        channels: u32_at(8) as usize,
        res_blocks: u32_at(12) as usize,
        decoder_blocks: u32_at(16) as usize,
        scale: u32_at(20) as usize,
    };
    let shift_cfg = ShiftConfig {
        channels: u32_at(28) as usize,
        layers: u32_at(32) as usize,
        max_shift: f32::from_le_bytes(bytes[36..40].try_into().unwrap()),
    };
    if sr_cfg.channels == 0 || sr_cfg.scale == 0 || shift_cfg.channels == 0 || shift_cfg.layers == 0 {
        return Err(bad("zero-sized architecture"));
    }
    if sr_cfg.channels > 4096 || shift_cfg.channels > 4096 || sr_cfg.res_blocks > 1024 || sr_cfg.decoder_blocks > 1024 || shift_cfg.layers > 64 {
        return Err(bad("implausible architecture"));
    }
    let mut sr = SrModel::new(sr_cfg, 0);
    let mut shift = ShiftModel::new(shift_cfg, 0);
    let (na, nb) = (u64_at(40) as usize, u64_at(48) as usize);
    if na != sr.param_count() || nb != shift.param_count() {
        return Err(bad("parameter count does not match the architecture"));
    }
    if bytes.len() != HEADER_LEN + 4 * (na + nb) {
        return Err(bad("payload length mismatch"));
    }
    let floats: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    sr.load_flat(&floats[..na]);
    shift.load_flat(&floats[na..]);
    if !sr.all_finite() || !shift.all_finite() {
        return Err(bad("non-finite weights"));
    }
    Ok((sr, shift))
}

pub fn save_checkpoint(path: &Path, sr: &SrModel, shift: &ShiftModel) -> Result<()> {
    std::fs::write(path, write_checkpoint(sr, shift)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(SrModel, ShiftModel)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn models() -> (SrModel, ShiftModel) {
        let cfg = SrConfig {
            channels: 4,
            res_blocks: 1,
            decoder_blocks: 1,
            scale: 2,
        };
        let mut sr = SrModel::new(cfg, 9);
        sr.decoder.head.weight[0] = 0.25;
        let shift = ShiftModel::new(ShiftConfig { channels: 4, layers: 2, max_shift: 6.0 }, 3);
        (sr, shift)
    }

    #[test]
    fn round_trip_is_exact() {
        let (sr, shift) = models();
        let (a, b) = read_checkpoint(&write_checkpoint(&sr, &shift)).unwrap();
        assert_eq!(a, sr);
        assert_eq!(b, shift);
    }

    #[test]
    fn header_layout() {
        let (sr, shift) = models();
        let bytes = write_checkpoint(&sr, &shift);
        assert_eq!(&bytes[..4], b"CZSR");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(f32::from_le_bytes(bytes[36..40].try_into().unwrap()), 6.0);
        assert_eq!(bytes.len(), 56 + 4 * (sr.param_count() + shift.param_count()));
    }

    #[test]
    fn corruption_is_detected() {
        let (sr, shift) = models();
        let bytes = write_checkpoint(&sr, &shift);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(read_checkpoint(&bad).is_err());
        let mut bad = bytes;
        let at = bad.len() - 4;
        bad[at..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(read_checkpoint(&bad).is_err());
    }
}
