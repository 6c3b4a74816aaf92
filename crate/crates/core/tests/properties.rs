//! Structural properties that need no trained model.

mod common;

use common::checks;

#[test]
fn training_and_stepping_respect_constraints() {
    checks::corner_and_clamp().unwrap();
}

#[test]
fn lattice_step_matches_dense_convolution() {
    checks::dense_conv_oracle().unwrap();
}

#[test]
fn quantizer_error_is_within_half_a_step() {
    checks::quantizer_bound().unwrap();
}

#[test]
fn weight_files_round_trip_bit_for_bit() {
    checks::weight_file_round_trip().unwrap();
}

#[test]
fn perturbations_stay_inside_the_light_cone() {
    checks::light_cone().unwrap();
}

#[test]
fn seeded_runs_are_reproducible() {
    checks::determinism().unwrap();
}
