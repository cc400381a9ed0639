//! Fixtures shared by the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rocp::synth::{add_noise, gen_ground_truth};
use rocp::{CpModel, DenseTensor, NoiseSpec};

/// Ground-truth model and its Cauchy-contaminated tensor for an `n^d` problem.
pub fn problem(n: usize, d: usize, t: usize, rank: usize, seed: u64) -> (CpModel, DenseTensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (model, a0) = gen_ground_truth(&vec![n; d], t, rank, &mut rng).expect("valid problem shape");
    let a = add_noise(&a0, &NoiseSpec::cauchy(), &mut rng).expect("valid noise");
    (model, a)
}
