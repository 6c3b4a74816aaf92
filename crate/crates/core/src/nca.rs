//! Cell states and the residual update rule applied by every tile.

use std::ops::{Index, IndexMut};

use crate::params::{
    perceive_index, Params, HIDDEN_DIM, KERNEL_SIZE, STATE_DIM,
};
use crate::shape::{ShapeGrid, NUM_CLASSES};

/// First channel holding a class logit; logits occupy the last ten channels.
pub const LOGIT_OFFSET: usize = STATE_DIM - NUM_CLASSES;

/// The four cardinal link directions of a tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    /// Grid offset `(dx, dy)`; north is the row above.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    /// `(row, col)` of the perceive-kernel tap that reads this neighbour.
    pub fn kernel_tap(self) -> (usize, usize) {
        let (dx, dy) = self.offset();
        ((1 + dy) as usize, (1 + dx) as usize)
    }
}

#[derive(Clone, Copy, PartialEq)]
pub struct CellState(pub [f64; STATE_DIM]);

impl CellState {
    pub const ZERO: CellState = CellState([0.0; STATE_DIM]);

    /// Initial state of an active cell: one in channel 0, zero elsewhere.
    pub fn seed() -> Self {
        let mut s = Self::ZERO;
        s.0[0] = 1.0;
        s
    }

    pub fn logits(&self) -> &[f64] {
        &self.0[LOGIT_OFFSET..]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn add(&self, delta: &CellState) -> CellState {
        let mut out = *self;
        for (o, d) in out.0.iter_mut().zip(&delta.0) {
            *o += d;
        }
        out
    }
}

impl Default for CellState {
    fn default() -> Self {
        Self::ZERO
    }
}

impl std::fmt::Debug for CellState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for CellState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CellState {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Argmax over the class logits; ties go to the lowest class index.
pub fn classify(state: &CellState) -> u8 {
    let mut best = 0;
    for (i, &v) in state.logits().iter().enumerate().skip(1) {
        if v > state.logits()[best] {
            best = i;
        }
    }
    best as u8
}

/// Active cells of a shape with their cardinal neighbour links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    width: usize,
    height: usize,
    /// `(x, y)` of active cell `i`, row-major.
    cells: Vec<(usize, usize)>,
    /// Active-cell index of each neighbour, `None` when empty or off-grid.
    neighbors: Vec<[Option<usize>; 4]>,
    index_of: Vec<Option<usize>>,
}

impl Lattice {
    pub fn new(shape: &ShapeGrid) -> Self {
        let (width, height) = (shape.width(), shape.height());
        let cells = shape.active_cells();
        let mut index_of = vec![None; width * height];
        for (i, &(x, y)) in cells.iter().enumerate() {
            index_of[y * width + x] = Some(i);
        }
        let neighbors = cells
            .iter()
            .map(|&(x, y)| {
                Direction::ALL.map(|d| {
                    let (dx, dy) = d.offset();
                    let nx = x.checked_add_signed(dx).filter(|&v| v < width)?;
                    let ny = y.checked_add_signed(dy).filter(|&v| v < height)?;
                    index_of[ny * width + nx]
                })
            })
            .collect();
        Lattice {
            width,
            height,
            cells,
            neighbors,
            index_of,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn neighbors(&self, cell: usize) -> [Option<usize>; 4] {
        self.neighbors[cell]
    }

    pub fn index_of(&self, x: usize, y: usize) -> Option<usize> {
        if x < self.width && y < self.height {
            self.index_of[y * self.width + x]
        } else {
            None
        }
    }

    pub fn initial_states(&self) -> Vec<CellState> {
        vec![CellState::seed(); self.len()]
    }
}

/// Hidden activations of one cell update, kept for the backward pass.
#[derive(Debug, Clone, Copy)]
pub struct Activations {
    pub hidden1: [f64; HIDDEN_DIM],
    pub hidden2: [f64; HIDDEN_DIM],
}

type TapMatrix = [[f64; HIDDEN_DIM]; STATE_DIM];

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// The update network in evaluation form: double precision, diagonal taps dropped.
#[derive(Clone)]
pub struct Nca {
    /// Perceive taps, indexed by [`Nca::CENTER_TAP`] then [`Direction::index`] + 1.
    taps: Box<[TapMatrix; 5]>,
    perceive_bias: [f64; HIDDEN_DIM],
    dense: Box<[[f64; HIDDEN_DIM]; HIDDEN_DIM]>,
    dense_bias: [f64; HIDDEN_DIM],
    output: Box<[[f64; STATE_DIM]; HIDDEN_DIM]>,
    output_bias: [f64; STATE_DIM],
}

impl Nca {
    pub const CENTER_TAP: usize = 0;

    /// `(row, col)` kernel position of each evaluated tap.
    pub const TAP_POSITIONS: [(usize, usize); 5] = [(1, 1), (0, 1), (1, 2), (2, 1), (1, 0)];

    /// Builds the evaluation form. Diagonal taps are ignored whatever they hold.
    pub fn new<T: Copy + Into<f64>>(params: &Params<T>) -> Self {
        let mut taps = Box::new([[[0.0; HIDDEN_DIM]; STATE_DIM]; 5]);
        for (tap, &(row, col)) in taps.iter_mut().zip(Self::TAP_POSITIONS.iter()) {
            debug_assert!(row < KERNEL_SIZE && col < KERNEL_SIZE);
            for (i, w_in) in tap.iter_mut().enumerate() {
                for (o, w) in w_in.iter_mut().enumerate() {
                    *w = params.perceive_kernel[perceive_index(row, col, i, o)].into();
                }
            }
        }
        let mut dense = Box::new([[0.0; HIDDEN_DIM]; HIDDEN_DIM]);
        for (j, row) in dense.iter_mut().enumerate() {
            for (o, w) in row.iter_mut().enumerate() {
                *w = params.dmodel_kernel_1[j * HIDDEN_DIM + o].into();
            }
        }
        let mut output = Box::new([[0.0; STATE_DIM]; HIDDEN_DIM]);
        for (j, row) in output.iter_mut().enumerate() {
            for (k, w) in row.iter_mut().enumerate() {
                *w = params.dmodel_kernel_2[j * STATE_DIM + k].into();
            }
        }
        Nca {
            taps,
            perceive_bias: std::array::from_fn(|o| params.perceive_bias[o].into()),
            dense,
            dense_bias: std::array::from_fn(|o| params.dmodel_bias_1[o].into()),
            output,
            output_bias: std::array::from_fn(|k| params.dmodel_bias_2[k].into()),
        }
    }

    /// Additive update of one cell. Absent neighbours read as zero states.
    pub fn cell_update(
        &self,
        center: &CellState,
        north: &CellState,
        east: &CellState,
        south: &CellState,
        west: &CellState,
    ) -> CellState {
        self.forward(center, [Some(north), Some(east), Some(south), Some(west)])
            .0
    }

    /// Update given neighbours in [`Direction::ALL`] order, together with the
    /// hidden activations.
    pub fn forward(
        &self,
        center: &CellState,
        neighbors: [Option<&CellState>; 4],
    ) -> (CellState, Activations) {
        let mut pre = self.perceive_bias;
        accumulate_tap(&mut pre, &self.taps[Self::CENTER_TAP], center);
        for (d, n) in neighbors.iter().enumerate() {
            if let Some(n) = n {
                accumulate_tap(&mut pre, &self.taps[d + 1], n);
            }
        }
        let hidden1 = pre.map(relu);

        let mut pre = self.dense_bias;
        for (h, row) in hidden1.iter().zip(self.dense.iter()) {
            if *h != 0.0 {
                for (p, w) in pre.iter_mut().zip(row) {
                    *p += h * w;
                }
            }
        }
        let hidden2 = pre.map(relu);

        let mut delta = self.output_bias;
        for (h, row) in hidden2.iter().zip(self.output.iter()) {
            if *h != 0.0 {
                for (d, w) in delta.iter_mut().zip(row) {
                    *d += h * w;
                }
            }
        }
        (CellState(delta), Activations { hidden1, hidden2 })
    }

    /// Update of active cell `cell` reading neighbour states from `states`.
    pub fn forward_cell(
        &self,
        lattice: &Lattice,
        states: &[CellState],
        cell: usize,
    ) -> (CellState, Activations) {
        let neighbors = lattice.neighbors(cell).map(|n| n.map(|j| &states[j]));
        self.forward(&states[cell], neighbors)
    }

    /// One synchronous step over compact active-cell states.
    ///
    /// Every delta reads the pre-step states; cells with `mask[i] == false`
    /// keep their state bit for bit.
    pub fn step_cells(&self, lattice: &Lattice, states: &[CellState], mask: &[bool]) -> Vec<CellState> {
        assert_eq!(states.len(), lattice.len());
        assert_eq!(mask.len(), lattice.len());
        (0..lattice.len())
            .map(|i| {
                if mask[i] {
                    let (delta, _) = self.forward_cell(lattice, states, i);
                    states[i].add(&delta)
                } else {
                    states[i]
                }
            })
            .collect()
    }

    /// Synchronous step of a full grid. `update_mask` has one entry per
    /// active cell in row-major order.
    pub fn grid_step(&self, grid: &StateGrid, update_mask: &[bool]) -> StateGrid {
        let next = self.step_cells(&grid.lattice, &grid.active_states(), update_mask);
        grid.with_active_states(&next)
    }

    /// `steps` full-mask synchronous steps.
    pub fn run_sync(&self, grid: &StateGrid, steps: usize) -> StateGrid {
        let mask = vec![true; grid.lattice.len()];
        let mut states = grid.active_states();
        for _ in 0..steps {
            states = self.step_cells(&grid.lattice, &states, &mask);
        }
        grid.with_active_states(&states)
    }

    pub(crate) fn tap(&self, tap: usize) -> &TapMatrix {
        &self.taps[tap]
    }

    pub(crate) fn dense(&self) -> &[[f64; HIDDEN_DIM]; HIDDEN_DIM] {
        &self.dense
    }

    pub(crate) fn output(&self) -> &[[f64; STATE_DIM]; HIDDEN_DIM] {
        &self.output
    }
}

#[inline]
fn accumulate_tap(acc: &mut [f64; HIDDEN_DIM], tap: &TapMatrix, input: &CellState) {
    for (x, row) in input.0.iter().zip(tap.iter()) {
        if *x != 0.0 {
            for (a, w) in acc.iter_mut().zip(row) {
                *a += x * w;
            }
        }
    }
}

/// Per-position states of a shape; empty positions hold the zero state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    shape: ShapeGrid,
    lattice: Lattice,
    states: Vec<CellState>,
}

/// Fresh grid: active cells at [`CellState::seed`], empty positions zero.
pub fn init_grid(shape: &ShapeGrid) -> StateGrid {
    let lattice = Lattice::new(shape);
    let states = lattice.initial_states();
    StateGrid::from_active_states(shape, &states)
}

impl StateGrid {
    /// Grid with the given active-cell states (row-major active order).
    pub fn from_active_states(shape: &ShapeGrid, active: &[CellState]) -> Self {
        let lattice = Lattice::new(shape);
        assert_eq!(active.len(), lattice.len());
        let mut states = vec![CellState::ZERO; shape.width() * shape.height()];
        for (&(x, y), s) in lattice.cells().iter().zip(active) {
            states[y * shape.width() + x] = *s;
        }
        StateGrid {
            shape: shape.clone(),
            lattice,
            states,
        }
    }

    pub fn shape(&self) -> &ShapeGrid {
        &self.shape
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// State at any grid position; zero for empty positions.
    pub fn state(&self, x: usize, y: usize) -> &CellState {
        &self.states[y * self.shape.width() + x]
    }

    /// Every position's state, row-major.
    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    pub fn active_states(&self) -> Vec<CellState> {
        self.lattice
            .cells()
            .iter()
            .map(|&(x, y)| *self.state(x, y))
            .collect()
    }

    pub fn with_active_states(&self, active: &[CellState]) -> StateGrid {
        assert_eq!(active.len(), self.lattice.len());
        let mut next = self.clone();
        let w = self.shape.width();
        for (&(x, y), s) in self.lattice.cells().iter().zip(active) {
            next.states[y * w + x] = *s;
        }
        next
    }

    /// Predicted class of every active cell.
    pub fn predictions(&self) -> Vec<u8> {
        self.active_states().iter().map(classify).collect()
    }

    /// Whether every active cell predicts `label`.
    pub fn all_agree_on(&self, label: u8) -> bool {
        self.predictions().iter().all(|&p| p == label)
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(CellState::is_finite)
    }
}
