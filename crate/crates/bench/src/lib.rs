//! Shared inputs for the criterion benches.

use flowplex_core::attention::{BiasedAttentionProblem, Tensor};
use flowplex_core::geometry::RigidTransform;
use flowplex_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect()).expect("shape matches")
}

/// Random pair-biased attention problem with `g` groups of length `n`.
pub fn attention_problem(g: usize, n: usize, d: usize, seed: u64) -> BiasedAttentionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = tensor(&mut rng, &[g, n, n, d]);
    let k = tensor(&mut rng, &[g, n, n, d]);
    let v = tensor(&mut rng, &[g, n, n, d]);
    let b = tensor(&mut rng, &[g, n, n]);
    BiasedAttentionProblem::new(q, k, v, b).expect("consistent shapes")
}

/// Random cloud and a noisy rigidly moved copy of it.
pub fn point_pair(n: usize, seed: u64) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = || Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let a: Vec<Vec3> = (0..n).map(|_| p()).collect();
    let b = a.iter().map(|x| x + p() * 0.01).collect::<Vec<_>>();
    let motion = RigidTransform::random(&mut rng, 5.0);
    (a, motion.apply_all(&b))
}
