#![allow(dead_code)]

pub mod checks;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilenca::nca::CellState;
use tilenca::params::ParamGrads;
use tilenca::shape::ShapeGrid;

/// Dense random weights with every layer populated and diagonal taps zeroed.
pub fn random_params(seed: u64, scale: f64) -> ParamGrads {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamGrads::zeros().map(|_| 0.0);
    for w in p.iter_mut() {
        *w = rng.random_range(-1.0..1.0) * scale;
    }
    p.zero_corners();
    p
}

pub fn random_state(rng: &mut impl Rng) -> CellState {
    CellState(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
}

/// Random connected shape grown from a seed cell inside a `w × h` box.
pub fn random_shape(rng: &mut impl Rng, w: usize, h: usize, cells: usize, label: u8) -> ShapeGrid {
    let mut mask = vec![false; w * h];
    mask[rng.random_range(0..w * h)] = true;
    let mut count = 1;
    while count < cells.min(w * h) {
        let idx = rng.random_range(0..w * h);
        if mask[idx] {
            continue;
        }
        let (x, y) = (idx % w, idx / w);
        let touches = (x > 0 && mask[idx - 1])
            || (x + 1 < w && mask[idx + 1])
            || (y > 0 && mask[idx - w])
            || (y + 1 < h && mask[idx + w]);
        if touches {
            mask[idx] = true;
            count += 1;
        }
    }
    ShapeGrid::new(w, h, mask, label).expect("grown shapes are connected")
}
