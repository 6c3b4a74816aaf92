//! Running a trained automaton the way the tiles would.
//!
//! Three schedulers share one report type: synchronous steps, the random
//! with-replacement evaluation order used for validation, and an event-driven
//! model of the tile firmware with per-direction mailboxes and virtual timers.

mod firmware;
mod report;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use firmware::{
    firmware_run, firmware_simulate, tile_update, LinkCodec, Packet, SimClockConfig, TileAgent, FIRMWARE_UPDATE_CAP,
};
pub use report::{render_trace, RunReport, SimMode, Snapshot, TileReport};

use crate::nca::{classify, Lattice, Nca};
use crate::shape::ShapeGrid;

/// Default number of updates or outer steps per run.
pub const DEFAULT_STEPS: usize = 30;

/// `n_steps` synchronous full-mask steps, one snapshot per step.
pub fn sync_run(nca: &Nca, shape: &ShapeGrid, n_steps: usize) -> RunReport {
    let lattice = Lattice::new(shape);
    let mask = vec![true; lattice.len()];
    let mut states = lattice.initial_states();
    let mut snapshots = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        states = nca.step_cells(&lattice, &states, &mask);
        snapshots.push(Snapshot {
            update: step,
            tiles: states
                .iter()
                .map(|s| TileReport {
                    update_count: step as u32,
                    prediction: Some(classify(s)),
                })
                .collect(),
        });
    }
    RunReport {
        shape: shape.clone(),
        mode: SimMode::Sync,
        snapshots,
    }
}

/// Asynchronous validation: each outer step performs `N` single-cell
/// evaluations, each on a cell drawn uniformly with replacement, applied in
/// place so later evaluations see earlier results.
///
/// Cells not yet evaluated are reported as unreported.
pub fn listing1_validate(nca: &Nca, shape: &ShapeGrid, n_steps: usize, seed: u64) -> RunReport {
    let lattice = Lattice::new(shape);
    let n = lattice.len();
    let mut states = lattice.initial_states();
    let mut counts = vec![0u32; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut snapshots = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        for _ in 0..n {
            let cell = rng.random_range(0..n);
            let (delta, _) = nca.forward_cell(&lattice, &states, cell);
            states[cell] = states[cell].add(&delta);
            counts[cell] += 1;
        }
        snapshots.push(Snapshot {
            update: step,
            tiles: states
                .iter()
                .zip(&counts)
                .map(|(s, &c)| TileReport {
                    update_count: c,
                    prediction: (c > 0).then(|| classify(s)),
                })
                .collect(),
        });
    }
    RunReport {
        shape: shape.clone(),
        mode: SimMode::Listing1,
        snapshots,
    }
}
