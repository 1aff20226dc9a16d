//! Deterministic seeding: per-task hashes, ChaCha streams and the R2
//! low-discrepancy sequence used for orbit seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::point::Point;

/// One round of the splitmix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with two task indices (pixel row/column, sample id).
pub fn task_seed(master: u64, i: u64, j: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ i) ^ j.rotate_left(32))
}

pub fn task_rng(master: u64, i: u64, j: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(task_seed(master, i, j))
}

// Plastic number; the R2 sequence steps by (1/g, 1/g²).
const PLASTIC: f64 = 1.324_717_957_244_746;
const R2_A1: f64 = 1.0 / PLASTIC;
const R2_A2: f64 = 1.0 / (PLASTIC * PLASTIC);

/// Kronecker sequence in `[0,1)²` with a Cranley–Patterson shift.
#[derive(Clone, Debug)]
pub struct R2Sequence {
    shift: Point<f64>,
    index: u64,
}

impl R2Sequence {
    /// Sequence whose random shift is drawn from `seed`.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { shift: Point::new(rng.gen(), rng.gen()), index: 0 }
    }

    /// Unshifted sequence starting at index 0.
    pub fn unshifted() -> Self {
        Self { shift: Point::origin(), index: 0 }
    }

    pub fn point(&self, k: u64) -> Point<f64> {
        let kf = (k + 1) as f64;
        let x = self.shift.x + kf * R2_A1;
        let y = self.shift.y + kf * R2_A2;
        Point::new(x - x.floor(), y - y.floor())
    }
}

impl Iterator for R2Sequence {
    type Item = Point<f64>;

    fn next(&mut self) -> Option<Point<f64>> {
        let p = self.point(self.index);
        self.index += 1;
        Some(p)
    }
}
