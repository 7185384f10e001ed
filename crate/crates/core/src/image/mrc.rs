//! MRC2014 subset: mode 2 (float32), little-endian, 1024-byte main header,
//! one section per movie frame.

use std::fs;
use std::path::Path;

use super::{Image2D, MovieStack};
use crate::error::{Error, Result};

pub const MRC_HEADER_LEN: usize = 1024;

const OFF_NX: usize = 0;
const OFF_NY: usize = 4;
const OFF_NZ: usize = 8;
const OFF_MODE: usize = 12;
const OFF_MX: usize = 28;
const OFF_CELLA: usize = 40;
const OFF_CELLB: usize = 52;
const OFF_MAPC: usize = 64;
const OFF_DMIN: usize = 76;
const OFF_DMAX: usize = 80;
const OFF_DMEAN: usize = 84;
const OFF_NSYMBT: usize = 92;
const OFF_NVERSION: usize = 108;
const OFF_MAP: usize = 208;
const OFF_MACHST: usize = 212;
const OFF_RMS: usize = 216;
const OFF_NLABL: usize = 220;
const OFF_LABEL: usize = 224;

fn i32_at(buf: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(buf[off..off + 4].try_into().unwrap())
}

fn f32_at(buf: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(buf[off..off + 4].try_into().unwrap())
}

fn put_i32(buf: &mut [u8], off: usize, v: i32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_f32(buf: &mut [u8], off: usize, v: f32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn unsupported(field: &'static str, detail: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        field,
        detail: detail.into(),
    }
}

/// Parse an in-memory MRC file.
pub fn decode_mrc(bytes: &[u8]) -> Result<MovieStack> {
    if bytes.len() < MRC_HEADER_LEN {
        return Err(unsupported("header", format!("{} bytes, need 1024", bytes.len())));
    }
    if &bytes[OFF_MAP..OFF_MAP + 4] != b"MAP " {
        return Err(unsupported(
            "map",
            format!("stamp {:?}, expected \"MAP \"", &bytes[OFF_MAP..OFF_MAP + 4]),
        ));
    }
    let mode = i32_at(bytes, OFF_MODE);
    if mode != 2 {
        return Err(unsupported("mode", format!("mode {mode}, only mode 2 (float32) is supported")));
    }
    let (nx, ny, nz) = (
        i32_at(bytes, OFF_NX),
        i32_at(bytes, OFF_NY),
        i32_at(bytes, OFF_NZ),
    );
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(unsupported("nx/ny/nz", format!("dimensions {nx}x{ny}x{nz}")));
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    if nx % 2 != 0 || ny % 2 != 0 {
        return Err(Error::Dimension(format!(
            "odd frame dimensions {nx}x{ny} are not supported"
        )));
    }
    let nsymbt = i32_at(bytes, OFF_NSYMBT).max(0) as usize;
    let start = MRC_HEADER_LEN + nsymbt;
    let frame_len = nx * ny;
    let need = start + frame_len * nz * 4;
    if bytes.len() < need {
        return Err(unsupported(
            "data",
            format!("file holds {} bytes, header implies {need}", bytes.len()),
        ));
    }
    let mx = i32_at(bytes, OFF_MX);
    let sampling = if mx > 0 { mx as f64 } else { nx as f64 };
    let cella_x = f32_at(bytes, OFF_CELLA) as f64;
    let pixel_size = if cella_x > 0.0 { cella_x / sampling } else { 1.0 };

    let mut frames = Vec::with_capacity(nz);
    for z in 0..nz {
        let base = start + z * frame_len * 4;
        let data: Vec<f64> = bytes[base..base + frame_len * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        frames.push(Image2D::new(nx, ny, pixel_size, data)?);
    }
    MovieStack::new(frames)
}

/// Serialize a stack as a mode-2 MRC file.
pub fn encode_mrc(stack: &MovieStack) -> Vec<u8> {
    let (nx, ny) = stack.dims();
    let nz = stack.frame_count();
    let ps = stack.pixel_size() as f32;
    let mut out = vec![0u8; MRC_HEADER_LEN + nx * ny * nz * 4];
    let hdr = &mut out[..MRC_HEADER_LEN];
    put_i32(hdr, OFF_NX, nx as i32);
    put_i32(hdr, OFF_NY, ny as i32);
    put_i32(hdr, OFF_NZ, nz as i32);
    put_i32(hdr, OFF_MODE, 2);
    put_i32(hdr, OFF_MX, nx as i32);
    put_i32(hdr, OFF_MX + 4, ny as i32);
    put_i32(hdr, OFF_MX + 8, nz as i32);
    put_f32(hdr, OFF_CELLA, nx as f32 * ps);
    put_f32(hdr, OFF_CELLA + 4, ny as f32 * ps);
    put_f32(hdr, OFF_CELLA + 8, nz as f32 * ps);
    for i in 0..3 {
        put_f32(hdr, OFF_CELLB + 4 * i, 90.0);
        put_i32(hdr, OFF_MAPC + 4 * i, i as i32 + 1);
    }
    let (mut lo, mut hi, mut sum, mut sq) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0);
    for f in stack.frames() {
        for &v in f.data() {
            let v = v as f32 as f64;
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
            sq += v * v;
        }
    }
    let n = (nx * ny * nz) as f64;
    let mean = sum / n;
    put_f32(hdr, OFF_DMIN, lo as f32);
    put_f32(hdr, OFF_DMAX, hi as f32);
    put_f32(hdr, OFF_DMEAN, mean as f32);
    put_f32(hdr, OFF_RMS, (sq / n - mean * mean).max(0.0).sqrt() as f32);
    put_i32(hdr, OFF_NVERSION, 20140);
    hdr[OFF_MAP..OFF_MAP + 4].copy_from_slice(b"MAP ");
    hdr[OFF_MACHST..OFF_MACHST + 4].copy_from_slice(&[0x44, 0x44, 0x00, 0x00]);
    put_i32(hdr, OFF_NLABL, 1);
    let label = b"cryozssr";
    hdr[OFF_LABEL..OFF_LABEL + label.len()].copy_from_slice(label);

    let mut cursor = MRC_HEADER_LEN;
    for f in stack.frames() {
        for &v in f.data() {
            out[cursor..cursor + 4].copy_from_slice(&(v as f32).to_le_bytes());
            cursor += 4;
        }
    }
    out
}

pub fn read_mrc(path: impl AsRef<Path>) -> Result<MovieStack> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mrc(&bytes)
}

/// Write a stack; samples are stored as float32.
pub fn write_mrc(stack: &MovieStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mrc(stack)).map_err(|e| Error::io(path, e))
}
