use rand::distributions::Distribution;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::tensor::AmbientTensor;

/// Seeded generator used everywhere randomness is needed.
///
/// Backed by ChaCha8 (counter based), so a seed fixes the stream bit for bit
/// across platforms and runs. Normal variates come from `rand_distr`'s
/// ziggurat sampler. `substream` yields independent generators from the same
/// seed, keeping data generation and e.g. minibatch sampling decoupled.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator derived from the same seed. Streams with
    /// different labels never overlap; label 0 is the default stream.
    pub fn substream(&self, label: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(label);
        Self {
            seed: self.seed,
            inner,
        }
    }

    /// Standard normal variate.
    pub fn n01(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Matrix of i.i.d. standard normals, filled in row-major order.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> AmbientTensor {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.n01());
        }
        AmbientTensor::from_row_major(rows, cols, data)
            .expect("normal sampler produced non-finite value")
    }
}
