//! Seed derivation. A run has one seed; each consumer draws from its own
//! ChaCha stream so adding draws in one component never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Prototypes = 1,
    HcdInit = 2,
    HcdSampling = 3,
    Head = 4,
    Backbone = 5,
    Batches = 6,
    Synthetic = 7,
}

pub fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

/// Uniform sample from the Euclidean ball of the given radius.
pub fn uniform_in_ball<R: rand::Rng>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let r = radius * u.powf(1.0 / dim as f64);
        return dir.into_iter().map(|v| v * r / n).collect();
    }
}
