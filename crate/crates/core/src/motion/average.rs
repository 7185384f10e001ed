use crate::error::{Error, Result};
use crate::exec;
use crate::image::{lanczos_shift, pixelwise_mean, Image2D, MovieStack, SpectrumImage, LANCZOS_DEFAULT_TAPS};

use super::register::{correlate, prepare};

/// Movie with per-frame correlation spectra computed once, so many
/// reference frames can be served without re-transforming.
pub struct Aligner<'a> {
    stack: &'a MovieStack,
    spectra: Vec<SpectrumImage>,
}

impl<'a> Aligner<'a> {
    pub fn new(stack: &'a MovieStack) -> Result<Self> {
        let spectra = exec::try_map_slice(stack.frames(), prepare)?;
        Ok(Self { stack, spectra })
    }

    /// Displacement of frame `i` relative to frame `j`.
    pub fn displacement(&self, j: usize, i: usize) -> Result<(f64, f64)> {
        if i == j {
            return Ok((0.0, 0.0));
        }
        Ok(correlate(&self.spectra[j], &self.spectra[i])?.subpixel)
    }

    /// Mean of all frames after moving each onto frame `j`.
    pub fn average_onto(&self, j: usize) -> Result<Image2D> {
        let m = self.stack.frame_count();
        if j >= m {
            return Err(Error::Range(format!("reference frame {j} not in 0..{m}")));
        }
        let aligned = (0..m)
            .map(|i| {
                let (dx, dy) = self.displacement(j, i)?;
                let frame = self.stack.frame(i);
                if dx == 0.0 && dy == 0.0 {
                    Ok(frame.clone())
                } else {
                    lanczos_shift(frame, -dx, -dy, LANCZOS_DEFAULT_TAPS)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        pixelwise_mean(&aligned)
    }
}

/// Align every frame to reference frame `j` and average.
pub fn align_and_average(stack: &MovieStack, j: usize) -> Result<Image2D> {
    if j >= stack.frame_count() {
        return Err(Error::Range(format!(
            "reference frame {j} not in 0..{}",
            stack.frame_count()
        )));
    }
    Aligner::new(stack)?.average_onto(j)
}
