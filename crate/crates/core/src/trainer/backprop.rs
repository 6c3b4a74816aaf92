//! Unrolled rollouts with a tape, the squared-error loss and reverse-mode gradients.

use crate::nca::{Activations, CellState, Lattice, Nca, StateGrid, LOGIT_OFFSET};
use crate::params::{perceive_index, ParamGrads, HIDDEN_DIM, STATE_DIM};
use crate::shape::{ShapeGrid, NUM_CLASSES};

/// Squared error between each active cell's logits and the one-hot label, summed over cells.
pub fn loss(final_grid: &StateGrid, label: u8) -> f64 {
    cells_loss(&final_grid.active_states(), label)
}

pub(crate) fn cells_loss(states: &[CellState], label: u8) -> f64 {
    states
        .iter()
        .map(|s| {
            s.logits()
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let target = if k == usize::from(label) { 1.0 } else { 0.0 };
                    (v - target) * (v - target)
                })
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone)]
struct TapeStep {
    before: Vec<CellState>,
    mask: Vec<bool>,
    /// Present exactly for cells whose update was applied.
    activations: Vec<Option<Activations>>,
}

/// Record of an unrolled rollout: every pre-step state, mask and hidden activation.
#[derive(Clone)]
pub struct Tape<'a> {
    nca: &'a Nca,
    shape: ShapeGrid,
    lattice: Lattice,
    steps: Vec<TapeStep>,
    final_states: Vec<CellState>,
}

/// Runs `masks.len()` synchronous steps from the initial grid, recording a tape.
///
/// `masks[t][i]` says whether active cell `i` (row-major) applies its update at step `t`.
/// Masked-out cells are not evaluated at all.
pub fn rollout_with_tape<'a>(nca: &'a Nca, shape: &ShapeGrid, masks: &[Vec<bool>]) -> Tape<'a> {
    assert!(!masks.is_empty(), "a rollout needs at least one step");
    let lattice = Lattice::new(shape);
    let mut states = lattice.initial_states();
    let mut steps = Vec::with_capacity(masks.len());
    for mask in masks {
        assert_eq!(mask.len(), lattice.len(), "one mask entry per active cell");
        let mut next = states.clone();
        let mut activations = vec![None; lattice.len()];
        for i in 0..lattice.len() {
            if mask[i] {
                let (delta, acts) = nca.forward_cell(&lattice, &states, i);
                next[i] = states[i].add(&delta);
                activations[i] = Some(acts);
            }
        }
        steps.push(TapeStep {
            before: std::mem::replace(&mut states, next),
            mask: mask.clone(),
            activations,
        });
    }
    Tape {
        nca,
        shape: shape.clone(),
        lattice,
        steps,
        final_states: states,
    }
}

impl Tape<'_> {
    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    pub fn final_grid(&self) -> StateGrid {
        StateGrid::from_active_states(&self.shape, &self.final_states)
    }

    pub fn final_states(&self) -> &[CellState] {
        &self.final_states
    }

    /// Active-cell states before step `t` (0-based); `t == steps()` gives the final states.
    pub fn states_at(&self, t: usize) -> &[CellState] {
        if t == self.steps.len() {
            &self.final_states
        } else {
            &self.steps[t].before
        }
    }

    pub fn mask_at(&self, t: usize) -> &[bool] {
        &self.steps[t].mask
    }

    /// Re-runs the recorded masks forward without recording.
    pub fn replay(&self) -> StateGrid {
        let mut states = self.lattice.initial_states();
        for step in &self.steps {
            states = self.nca.step_cells(&self.lattice, &states, &step.mask);
        }
        StateGrid::from_active_states(&self.shape, &states)
    }

    pub fn loss(&self, label: u8) -> f64 {
        cells_loss(&self.final_states, label)
    }
}

/// Gradient accumulators laid out like [`Nca`]'s evaluation form.
struct GradAccumulator {
    taps: Vec<[[f64; HIDDEN_DIM]; STATE_DIM]>,
    perceive_bias: [f64; HIDDEN_DIM],
    dense: Vec<[f64; HIDDEN_DIM]>,
    dense_bias: [f64; HIDDEN_DIM],
    output: Vec<[f64; STATE_DIM]>,
    output_bias: [f64; STATE_DIM],
}

impl GradAccumulator {
    fn new() -> Self {
        GradAccumulator {
            taps: vec![[[0.0; HIDDEN_DIM]; STATE_DIM]; 5],
            perceive_bias: [0.0; HIDDEN_DIM],
            dense: vec![[0.0; HIDDEN_DIM]; HIDDEN_DIM],
            dense_bias: [0.0; HIDDEN_DIM],
            output: vec![[0.0; STATE_DIM]; HIDDEN_DIM],
            output_bias: [0.0; STATE_DIM],
        }
    }

    fn into_params(self) -> ParamGrads {
        let mut g = ParamGrads::zeros();
        for (tap, &(row, col)) in self.taps.iter().zip(Nca::TAP_POSITIONS.iter()) {
            for (i, row_in) in tap.iter().enumerate() {
                for (o, &v) in row_in.iter().enumerate() {
                    g.perceive_kernel[perceive_index(row, col, i, o)] = v;
                }
            }
        }
        g.perceive_bias.copy_from_slice(&self.perceive_bias);
        for (j, row) in self.dense.iter().enumerate() {
            g.dmodel_kernel_1[j * HIDDEN_DIM..(j + 1) * HIDDEN_DIM].copy_from_slice(row);
        }
        g.dmodel_bias_1.copy_from_slice(&self.dense_bias);
        for (j, row) in self.output.iter().enumerate() {
            g.dmodel_kernel_2[j * STATE_DIM..(j + 1) * STATE_DIM].copy_from_slice(row);
        }
        g.dmodel_bias_2.copy_from_slice(&self.output_bias);
        g
    }
}

/// Exact gradient of [`Tape::loss`] with respect to every weight.
///
/// Diagonal taps receive zero gradient; they never take part in the forward pass.
pub fn gradients(tape: &Tape<'_>, label: u8) -> ParamGrads {
    let nca = tape.nca;
    let lattice = &tape.lattice;
    let mut acc = GradAccumulator::new();

    let mut grad_states: Vec<[f64; STATE_DIM]> = tape
        .final_states
        .iter()
        .map(|s| {
            let mut g = [0.0; STATE_DIM];
            for k in 0..NUM_CLASSES {
                let target = if k == usize::from(label) { 1.0 } else { 0.0 };
                g[LOGIT_OFFSET + k] = 2.0 * (s[LOGIT_OFFSET + k] - target);
            }
            g
        })
        .collect();

    for step in tape.steps.iter().rev() {
        // Residual path: every state feeds itself into the next step unchanged.
        let mut grad_before = grad_states.clone();
        for (cell, acts) in step.activations.iter().enumerate() {
            let Some(acts) = acts else { continue };
            let grad_delta = &grad_states[cell];

            // Output layer.
            let mut grad_hidden2 = [0.0; HIDDEN_DIM];
            for (j, (g, &h)) in grad_hidden2.iter_mut().zip(&acts.hidden2).enumerate() {
                if h > 0.0 {
                    let w = &nca.output()[j];
                    let row = &mut acc.output[j];
                    let mut dot = 0.0;
                    for k in 0..STATE_DIM {
                        row[k] += h * grad_delta[k];
                        dot += w[k] * grad_delta[k];
                    }
                    *g = dot;
                }
            }
            for (b, g) in acc.output_bias.iter_mut().zip(grad_delta) {
                *b += g;
            }

            // Hidden dense layer; `grad_hidden2` is already gated by the ReLU.
            let mut grad_hidden1 = [0.0; HIDDEN_DIM];
            for (j, (g, &h)) in grad_hidden1.iter_mut().zip(&acts.hidden1).enumerate() {
                if h > 0.0 {
                    let w = &nca.dense()[j];
                    let row = &mut acc.dense[j];
                    let mut dot = 0.0;
                    for o in 0..HIDDEN_DIM {
                        row[o] += h * grad_hidden2[o];
                        dot += w[o] * grad_hidden2[o];
                    }
                    *g = dot;
                }
            }
            for (b, g) in acc.dense_bias.iter_mut().zip(&grad_hidden2) {
                *b += g;
            }

            // Perceive layer: centre tap plus present cardinal neighbours.
            for (b, g) in acc.perceive_bias.iter_mut().zip(&grad_hidden1) {
                *b += g;
            }
            let sources = std::iter::once((Nca::CENTER_TAP, Some(cell))).chain(
                lattice
                    .neighbors(cell)
                    .into_iter()
                    .enumerate()
                    .map(|(d, n)| (d + 1, n)),
            );
            for (tap, source) in sources {
                let Some(source) = source else { continue };
                let input = &step.before[source];
                let weights = nca.tap(tap);
                let tap_acc = &mut acc.taps[tap];
                let grad_in = &mut grad_before[source];
                for c in 0..STATE_DIM {
                    let x = input[c];
                    let w = &weights[c];
                    let row = &mut tap_acc[c];
                    let mut dot = 0.0;
                    for o in 0..HIDDEN_DIM {
                        row[o] += x * grad_hidden1[o];
                        dot += w[o] * grad_hidden1[o];
                    }
                    grad_in[c] += dot;
                }
            }
        }
        grad_states = grad_before;
    }

    acc.into_params()
}
