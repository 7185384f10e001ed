//! The eight rotation/flip symmetries of the square acting on images.

use super::Image2D;
use crate::error::{Error, Result};

/// Element `k` of the dihedral group D4: an optional horizontal mirror
/// (`k >= 4`) followed by `k % 4` counter-clockwise quarter turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dihedral(u8);

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral(0);
    pub const ROT90: Dihedral = Dihedral(1);

    pub fn new(k: usize) -> Result<Self> {
        if k < 8 {
            Ok(Dihedral(k as u8))
        } else {
            Err(Error::Range(format!("dihedral index {k} not in 0..8")))
        }
    }

    pub fn all() -> impl Iterator<Item = Dihedral> {
        (0..8).map(Dihedral)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn mirrored(self) -> bool {
        self.0 >= 4
    }

    fn turns(self) -> u8 {
        self.0 % 4
    }

    pub fn inverse(self) -> Dihedral {
        if self.mirrored() {
            self
        } else {
            Dihedral((4 - self.turns()) % 4)
        }
    }

    /// Whether the transform swaps width and height.
    pub fn swaps_axes(self) -> bool {
        self.turns() % 2 == 1
    }

    pub fn apply(self, image: &Image2D) -> Image2D {
        let mut out = if self.mirrored() {
            mirror(image)
        } else {
            image.clone()
        };
        for _ in 0..self.turns() {
            out = rot90(&out);
        }
        out
    }

    pub fn apply_inverse(self, image: &Image2D) -> Image2D {
        self.inverse().apply(image)
    }

    /// Source coordinate for output pixel `(x, y)` when applied to a `w x h`
    /// input. Lets callers permute non-image buffers consistently.
    pub fn source_index(self, x: usize, y: usize, w: usize, h: usize) -> (usize, usize) {
        // Walk the quarter turns backwards, then undo the mirror.
        let (mut x, mut y) = (x, y);
        let (mut cw, mut ch) = if self.swaps_axes() { (h, w) } else { (w, h) };
        for _ in 0..self.turns() {
            // out(x', y') = in(cw_in - 1 - y', x') where the input had width ch.
            let (nx, ny) = (ch - 1 - y, x);
            x = nx;
            y = ny;
            std::mem::swap(&mut cw, &mut ch);
        }
        if self.mirrored() {
            x = cw - 1 - x;
        }
        (x, y)
    }
}

fn mirror(image: &Image2D) -> Image2D {
    let (w, h) = image.dims();
    Image2D::from_fn(w, h, image.pixel_size(), |x, y| image.get(w - 1 - x, y))
}

fn rot90(image: &Image2D) -> Image2D {
    let (w, h) = image.dims();
    Image2D::from_fn(h, w, image.pixel_size(), |x, y| image.get(w - 1 - y, x))
}

/// Apply symmetry `k` (0..8) to an image; sample permutation only.
pub fn dihedral(image: &Image2D, k: usize) -> Result<Image2D> {
    Ok(Dihedral::new(k)?.apply(image))
}

/// Undo [`dihedral`] with the same `k`.
pub fn dihedral_inverse(image: &Image2D, k: usize) -> Result<Image2D> {
    Ok(Dihedral::new(k)?.apply_inverse(image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(w: usize, h: usize) -> Image2D {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Image2D::from_fn(w, h, 1.0, |_, _| rng.random())
    }

    #[test]
    fn identity_and_round_trips_are_exact() {
        let im = random(16, 16);
        assert_eq!(dihedral(&im, 0).unwrap(), im);
        for k in 0..8 {
            let t = dihedral(&im, k).unwrap();
            assert_eq!(dihedral_inverse(&t, k).unwrap(), im, "k={k}");
        }
        let rect = random(6, 4);
        for k in 0..8 {
            let t = dihedral(&rect, k).unwrap();
            let swapped = Dihedral::new(k).unwrap().swaps_axes();
            assert_eq!(t.dims(), if swapped { (4, 6) } else { (6, 4) });
            assert_eq!(dihedral_inverse(&t, k).unwrap(), rect);
        }
        assert!(dihedral(&im, 8).is_err());
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let im = random(8, 8);
        let mut t = im.clone();
        for _ in 0..4 {
            t = Dihedral::ROT90.apply(&t);
        }
        assert_eq!(t, im);
    }

    #[test]
    fn composition_table_is_a_group() {
        let im = random(5, 5);
        let images: Vec<Image2D> = Dihedral::all().map(|g| g.apply(&im)).collect();
        // all eight images are distinct for a generic input
        for a in 0..8 {
            for b in a + 1..8 {
                assert_ne!(images[a], images[b]);
            }
        }
        let mut table = [[0usize; 8]; 8];
        for a in Dihedral::all() {
            for b in Dihedral::all() {
                let ab = a.apply(&b.apply(&im));
                let c = images.iter().position(|x| *x == ab).expect("closure");
                table[a.index()][b.index()] = c;
            }
        }
        for row in &table {
            let mut seen = [false; 8];
            row.iter().for_each(|&c| seen[c] = true);
            assert!(seen.iter().all(|&s| s));
        }
        for a in 0..8 {
            assert_eq!(table[0][a], a);
            assert_eq!(table[a][Dihedral(a as u8).inverse().index()], 0);
        }
    }

    #[test]
    fn source_index_agrees_with_apply() {
        let im = random(6, 4);
        for g in Dihedral::all() {
            let t = g.apply(&im);
            for y in 0..t.height() {
                for x in 0..t.width() {
                    let (sx, sy) = g.source_index(x, y, 6, 4);
                    assert_eq!(t.get(x, y), im.get(sx, sy), "{g:?} ({x},{y})");
                }
            }
        }
    }
}
