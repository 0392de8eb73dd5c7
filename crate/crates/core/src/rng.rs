//! Deterministic random streams.
//!
//! Every consumer derives its generator from `(seed, domain, index)`, so a
//! realization's draws never depend on which worker evaluates it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Stream domains; keeps e.g. scenario placement and channel draws apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Placement = 1,
    Channel = 2,
    Selection = 3,
    Scenario = 4,
    Oracle = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(splitmix64(seed ^ splitmix64(domain as u64)));
    rng.set_stream(index);
    rng
}

/// Child seed for nested derivations (e.g. a per-sample scenario seed).
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain as u64)) ^ splitmix64(index.wrapping_add(1)))
}

/// One draw of `CN(0, 1)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
