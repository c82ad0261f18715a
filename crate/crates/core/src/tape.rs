//! Sources of protocol randomness.
//!
//! Classical protocols draw every random choice through [`Tape`]. Any `rand`
//! generator is a tape; [`ExhaustiveTape`] instead walks every possible
//! sequence of draws, which turns a randomized protocol run into an exact
//! enumeration of its outcome distribution.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub trait Tape {
    /// Uniform draw from `0..n`; `n` must be positive.
    fn draw(&mut self, n: u64) -> u64;
}

impl<R: RngCore + ?Sized> Tape for R {
    fn draw(&mut self, n: u64) -> u64 {
        assert!(n > 0, "draw from an empty range");
        // Lemire-style rejection keeps the draw exactly uniform.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }
}

/// Deterministic generator for a given seed and stream index.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Enumerates the full tree of draw sequences in depth-first order.
///
/// Each call to [`ExhaustiveTape::next_path`] prepares the next leaf; draws
/// made during one run replay the recorded prefix and extend it with zeros.
#[derive(Debug, Default)]
pub struct ExhaustiveTape {
    path: Vec<(u64, u64)>,
    pos: usize,
    started: bool,
    visited: u64,
}

impl Tape for ExhaustiveTape {
    fn draw(&mut self, n: u64) -> u64 {
        assert!(n > 0, "draw from an empty range");
        if self.pos < self.path.len() {
            let (digit, radix) = self.path[self.pos];
            assert_eq!(radix, n, "draw ranges must not depend on the path order");
            self.pos += 1;
            digit
        } else {
            self.path.push((0, n));
            self.pos += 1;
            0
        }
    }
}

impl ExhaustiveTape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance to the next leaf. Returns `false` once every path was visited.
    pub fn next_path(&mut self) -> bool {
        if !self.started {
            self.started = true;
            self.pos = 0;
            self.visited = 1;
            return true;
        }
        // Draws past `pos` were not made on this path; drop them.
        self.path.truncate(self.pos);
        while let Some((digit, radix)) = self.path.pop() {
            if digit + 1 < radix {
                self.path.push((digit + 1, radix));
                self.pos = 0;
                self.visited += 1;
                return true;
            }
        }
        false
    }

    /// Probability of the path just run.
    pub fn weight(&self) -> BigRational {
        let denom = self.path[..self.pos]
            .iter()
            .fold(BigInt::one(), |acc, &(_, r)| acc * BigInt::from(r));
        BigRational::new(BigInt::one(), denom)
    }

    pub fn visited(&self) -> u64 {
        self.visited
    }
}

/// Run `trial` on every path of the draw tree, passing each path's probability.
pub fn enumerate<F>(limit: u64, mut trial: F) -> Result<()>
where
    F: FnMut(&mut ExhaustiveTape) -> Result<()>,
{
    let mut tape = ExhaustiveTape::new();
    while tape.next_path() {
        if tape.visited() > limit {
            return Err(Error::EnumerationTooLarge { limit });
        }
        trial(&mut tape)?;
    }
    Ok(())
}
