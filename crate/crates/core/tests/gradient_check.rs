//! Analytic gradients against central finite differences.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tilenca::nca::Nca;
use tilenca::params::{perceive_index, CORNER_TAPS};
use tilenca::trainer::{gradients, rollout_with_tape, sample_masks};

#[test]
fn gradients_match_central_differences() {
    let summary = common::checks::gradient_vs_fd().unwrap();
    println!("{summary}");
}

#[test]
fn diagonal_taps_get_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = common::random_shape(&mut rng, 3, 3, 7, 4);
    let mut params = common::random_params(5, 0.3);
    // Even nonzero diagonal weights must not receive gradient.
    for (row, col) in CORNER_TAPS {
        params.perceive_kernel[perceive_index(row, col, 0, 0)] = 0.7;
    }
    let nca = Nca::new(&params);
    let masks = sample_masks(shape.active_count(), 4, 0.0, 5);
    let g = gradients(&rollout_with_tape(&nca, &shape, &masks), 4);
    assert!(g.corners_are_zero());
    assert!(g.perceive_kernel.iter().any(|&v| v != 0.0));
}

#[test]
fn dropped_cells_keep_their_state_on_the_tape() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let shape = common::random_shape(&mut rng, 4, 4, 9, 2);
    let params = common::random_params(6, 0.3);
    let nca = Nca::new(&params);
    let masks = sample_masks(shape.active_count(), 6, 0.5, 6);
    let tape = rollout_with_tape(&nca, &shape, &masks);
    for t in 0..tape.steps() {
        for (i, &keep) in tape.mask_at(t).iter().enumerate() {
            if !keep {
                let before = tape.states_at(t)[i];
                let after = tape.states_at(t + 1)[i];
                assert!(before.0.iter().zip(&after.0).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }
    }
}
