//! Correlated complex Wiener increments and per-trajectory random streams.
//!
//! The signal and idler noises of one phase-space branch are built from the
//! same pair of real Gaussians, `dW1 = (w_a + i w_b)/sqrt(2)` and
//! `dW2 = (w_a - i w_b)/sqrt(2)`, which gives `<dW1 dW2> = dt` and
//! `<dW1^2> = <dW2^2> = 0`. The conjugate branch uses an independent pair.

use std::ops::{Add, AddAssign};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseIncrement {
    pub dw1: Complex64,
    pub dw2: Complex64,
    pub dw1p: Complex64,
    pub dw2p: Complex64,
}

impl NoiseIncrement {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Increment built from four real Gaussian variates that already carry
    /// variance `dt/2` each.
    #[inline]
    pub fn from_half_variance(wa: f64, wb: f64, wc: f64, wd: f64) -> Self {
        Self {
            dw1: Complex64::new(wa, wb),
            dw2: Complex64::new(wa, -wb),
            dw1p: Complex64::new(wc, wd),
            dw2p: Complex64::new(wc, -wd),
        }
    }
}

impl Add for NoiseIncrement {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            dw1: self.dw1 + rhs.dw1,
            dw2: self.dw2 + rhs.dw2,
            dw1p: self.dw1p + rhs.dw1p,
            dw2p: self.dw2p + rhs.dw2p,
        }
    }
}

impl AddAssign for NoiseIncrement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Draws one increment for a step of length `dt`.
#[inline]
pub fn sample_wiener_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> NoiseIncrement {
    let sigma = (0.5 * dt).sqrt();
    let wa: f64 = rng.sample(StandardNormal);
    let wb: f64 = rng.sample(StandardNormal);
    let wc: f64 = rng.sample(StandardNormal);
    let wd: f64 = rng.sample(StandardNormal);
    NoiseIncrement::from_half_variance(sigma * wa, sigma * wb, sigma * wc, sigma * wd)
}

/// Independent, reproducible stream for one trajectory.
///
/// ChaCha is counter based: the master seed selects the key, the trajectory
/// index selects the stream, and the block counter advances with the step
/// index, so a trajectory's draws never depend on which worker runs it.
pub fn trajectory_stream(master_seed: u64, trajectory_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory_index);
    rng
}
