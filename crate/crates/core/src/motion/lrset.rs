use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::average::Aligner;
use crate::error::{Error, Result};
use crate::exec;
use crate::image::{pixelwise_mean, pixelwise_median, Image2D, MovieStack};

/// K frame averages, each aligned to a different reference frame, plus
/// their pixel-wise median used as the fusion reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSet {
    members: Vec<Image2D>,
    reference_indices: Vec<usize>,
    reference_image: Image2D,
}

impl LrSet {
    pub fn new(members: Vec<Image2D>, reference_indices: Vec<usize>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::Argument(format!(
                "an LR set needs at least 2 members, got {}",
                members.len()
            )));
        }
        if reference_indices.len() != members.len() {
            return Err(Error::Argument(format!(
                "{} reference indices for {} members",
                reference_indices.len(),
                members.len()
            )));
        }
        let mut sorted = reference_indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("reference indices must be distinct".into()));
        }
        let first = &members[0];
        for m in &members {
            first.require_same_shape(m, "LR set member")?;
            if m.pixel_size() != first.pixel_size() {
                return Err(Error::Dimension("LR set members differ in pixel size".into()));
            }
        }
        let reference_image = pixelwise_median(&members)?;
        Ok(Self {
            members,
            reference_indices,
            reference_image,
        })
    }

    /// Members with placeholder reference indices `0..K`.
    pub fn from_members(members: Vec<Image2D>) -> Result<Self> {
        let k = members.len();
        Self::new(members, (0..k).collect())
    }

    /// Read back a set stored as a frame stack.
    pub fn from_stack(stack: MovieStack) -> Result<Self> {
        Self::from_members(stack.into_frames())
    }

    pub fn to_stack(&self) -> MovieStack {
        MovieStack::new(self.members.clone()).expect("members are homogeneous")
    }

    pub fn members(&self) -> &[Image2D] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn reference_indices(&self) -> &[usize] {
        &self.reference_indices
    }

    pub fn reference_image(&self) -> &Image2D {
        &self.reference_image
    }

    pub fn dims(&self) -> (usize, usize) {
        self.members[0].dims()
    }

    pub fn pixel_size(&self) -> f64 {
        self.members[0].pixel_size()
    }

    /// Pixel-wise mean of the members.
    pub fn mean_image(&self) -> Image2D {
        pixelwise_mean(&self.members).expect("non-empty homogeneous set")
    }

    /// Apply the same image map to every member and recompute the reference.
    pub fn map_members(&self, f: impl Fn(&Image2D) -> Result<Image2D> + Sync + Send) -> Result<LrSet> {
        let members = exec::try_map_slice(&self.members, f)?;
        LrSet::new(members, self.reference_indices.clone())
    }
}

/// Draw `k` distinct reference frames and average the movie onto each.
pub fn make_lr_set(stack: &MovieStack, k: usize, seed: u64) -> Result<LrSet> {
    let m = stack.frame_count();
    if k < 2 || k > m {
        return Err(Error::Argument(format!(
            "K={k} must satisfy 2 <= K <= M={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = sample(&mut rng, m, k).into_vec();
    let aligner = Aligner::new(stack)?;
    let members = exec::try_map_slice(&indices, |&j| aligner.average_onto(j))?;
    LrSet::new(members, indices)
}
