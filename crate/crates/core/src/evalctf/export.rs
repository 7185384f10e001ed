use std::fmt::Write as _;
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::image::Image2D;

/// Two-column CSV with header `frequency_invA,value`.
pub fn curve_csv(frequencies: &[f64], values: &[f64]) -> String {
    let mut s = String::from("frequency_invA,value\n");
    for (f, v) in frequencies.iter().zip(values) {
        writeln!(s, "{f:.6},{v:.6}").unwrap();
    }
    s
}

pub fn write_curve_csv(path: &Path, frequencies: &[f64], values: &[f64]) -> Result<()> {
    std::fs::write(path, curve_csv(frequencies, values)).map_err(|e| Error::io(path, e))
}

/// Log-scaled 16-bit grayscale rendering of a power spectrum.
pub fn spectrum_raster(spectrum: &Image2D) -> ImageBuffer<Luma<u16>, Vec<u16>> {
    let logs: Vec<f64> = spectrum.data().iter().map(|&p| (p.max(0.0) + 1e-12).ln()).collect();
    let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = spectrum.dims();
    ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let v = (logs[y as usize * w + x as usize] - lo) / span;
        Luma([(v * 65535.0).round() as u16])
    })
}

pub fn write_spectrum_png(path: &Path, spectrum: &Image2D) -> Result<()> {
    spectrum_raster(spectrum).save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    })
}
