use rand::Rng;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::image::{block_downsample, extract_patch, Dihedral, Image2D};
use crate::motion::LrSet;

/// One synthetic training example drawn from the LR set itself.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    /// Crops of every member, block-downsampled by the scale.
    pub lr: LrSet,
    /// Full-resolution crop of member `member`.
    pub hr: Image2D,
    pub member: usize,
    pub origin: (usize, usize),
    pub transform: Dihedral,
}

/// Crop every member at one random location, apply one random dihedral
/// element, downsample the crops to form the temporary LR set and keep the
/// crop of a randomly chosen member as the temporary HR target.
pub fn sample_training_pair<R: Rng>(lr_set: &LrSet, cfg: &TrainConfig, rng: &mut R) -> Result<TrainingPair> {
    let (w, h) = lr_set.dims();
    let c = cfg.crop_size;
    if c > w || c > h {
        return Err(Error::Argument(format!("crop {c} exceeds member size {w}x{h}")));
    }
    if c % cfg.scale != 0 || (c / cfg.scale) % 2 != 0 {
        return Err(Error::Argument(format!(
            "crop {c} must give an even temporary LR size at scale {}",
            cfg.scale
        )));
    }
    let x0 = rng.random_range(0..=w - c);
    let y0 = rng.random_range(0..=h - c);
    let transform = Dihedral::new(rng.random_range(0..8))?;
    let member = rng.random_range(0..lr_set.len());
    let crops = lr_set
        .members()
        .iter()
        .map(|m| Ok(transform.apply(&extract_patch(m, x0, y0, c, c)?)))
        .collect::<Result<Vec<_>>>()?;
    let lr_members = crops
        .iter()
        .map(|crop| block_downsample(crop, cfg.scale))
        .collect::<Result<Vec<_>>>()?;
    let lr = LrSet::new(lr_members, lr_set.reference_indices().to_vec())?;
    let hr = crops.into_iter().nth(member).expect("member index in range");
    Ok(TrainingPair {
        lr,
        hr,
        member,
        origin: (x0, y0),
        transform,
    })
}
