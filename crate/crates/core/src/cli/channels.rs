use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::model::C64;

/// `num_users` channel vectors of length `num_antennas` with i.i.d.
/// circularly symmetric complex Gaussian entries of unit variance.
///
/// The generator is ChaCha20 seeded through `seed_from_u64`; each entry
/// takes two uniforms `u1, u2` in `[0, 1)` and applies Box–Muller,
/// `sqrt(-ln(1 - u1)) * (cos(2 pi u2), sin(2 pi u2))`, so the real and
/// imaginary parts each have variance 1/2. Users are filled in order, one
/// vector at a time.
pub fn generate_channels(seed: u64, num_antennas: usize, num_users: usize) -> Vec<Vec<C64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..num_users)
        .map(|_| {
            (0..num_antennas)
                .map(|_| {
                    let u1: f64 = rng.gen();
                    let u2: f64 = rng.gen();
                    let r = (-(1.0 - u1).ln()).sqrt();
                    C64::from_polar(r, TAU * u2)
                })
                .collect()
        })
        .collect()
}
