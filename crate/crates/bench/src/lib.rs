//! Fixtures shared by the benchmarks.

use dwcgp_core::synth::{render, Scene, SceneSpec};
use dwcgp_core::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random boolean grid with the given fill probability.
pub fn random_grid(height: usize, width: usize, p: f64, seed: u64) -> Grid<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Grid::from_fn(height, width, |_, _| rng.random_bool(p))
}

/// A rendered scene of the given size with the default stand.
pub fn scene(width: usize, height: usize, seed: u64) -> Scene {
    render(&SceneSpec {
        width,
        height,
        stem_count: width / 8,
        stem_height_range: (height as f64 * 0.3, height as f64 * 0.8),
        seed,
        ..SceneSpec::default()
    })
    .expect("bench scene spec is valid")
}
