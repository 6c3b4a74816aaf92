//! Network weights of the per-cell update rule.
//!
//! The rule is a 3×3 "perceive" convolution with 40 output channels and ReLU,
//! a 40→40 dense layer with ReLU and a linear 40→21 output layer. The four
//! diagonal taps of the 3×3 kernel are structurally zero: tiles only talk to
//! their cardinal neighbours.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const STATE_DIM: usize = 21;
pub const HIDDEN_DIM: usize = 40;
pub const KERNEL_SIZE: usize = 3;

pub const PERCEIVE_KERNEL_LEN: usize = KERNEL_SIZE * KERNEL_SIZE * STATE_DIM * HIDDEN_DIM;
pub const DENSE_KERNEL_LEN: usize = HIDDEN_DIM * HIDDEN_DIM;
pub const OUTPUT_KERNEL_LEN: usize = HIDDEN_DIM * STATE_DIM;

/// Total number of stored scalars, diagonal taps included.
pub const PARAM_COUNT: usize = PERCEIVE_KERNEL_LEN
    + HIDDEN_DIM
    + DENSE_KERNEL_LEN
    + HIDDEN_DIM
    + OUTPUT_KERNEL_LEN
    + STATE_DIM;

/// `(row, col)` of the four diagonal kernel taps.
pub const CORNER_TAPS: [(usize, usize); 4] = [(0, 0), (0, 2), (2, 0), (2, 2)];

/// Shapes of the six tensors in storage order.
pub const TENSOR_SHAPES: [&[usize]; 6] = [
    &[KERNEL_SIZE, KERNEL_SIZE, STATE_DIM, HIDDEN_DIM],
    &[HIDDEN_DIM],
    &[HIDDEN_DIM, HIDDEN_DIM],
    &[HIDDEN_DIM],
    &[HIDDEN_DIM, STATE_DIM],
    &[STATE_DIM],
];

pub const TENSOR_NAMES: [&str; 6] = [
    "perceive_kernel",
    "perceive_bias",
    "dmodel_kernel_1",
    "dmodel_bias_1",
    "dmodel_kernel_2",
    "dmodel_bias_2",
];

/// Weights of the update network, generic over the scalar type.
///
/// Kernels are row-major: `perceive_kernel[row][col][in][out]`,
/// `dmodel_kernel_*[in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub perceive_kernel: Vec<T>,
    pub perceive_bias: Vec<T>,
    pub dmodel_kernel_1: Vec<T>,
    pub dmodel_bias_1: Vec<T>,
    pub dmodel_kernel_2: Vec<T>,
    pub dmodel_bias_2: Vec<T>,
}

/// Deployable weights, stored at the microcontroller's single precision.
pub type ModelParams = Params<f32>;

/// Gradients, optimizer moments and training master weights.
pub type ParamGrads = Params<f64>;

#[inline]
pub fn perceive_index(row: usize, col: usize, input: usize, output: usize) -> usize {
    ((row * KERNEL_SIZE + col) * STATE_DIM + input) * HIDDEN_DIM + output
}

pub fn is_corner_tap(row: usize, col: usize) -> bool {
    row != 1 && col != 1
}

impl<T: Copy + Default> Params<T> {
    pub fn zeros() -> Self {
        Params {
            perceive_kernel: vec![T::default(); PERCEIVE_KERNEL_LEN],
            perceive_bias: vec![T::default(); HIDDEN_DIM],
            dmodel_kernel_1: vec![T::default(); DENSE_KERNEL_LEN],
            dmodel_bias_1: vec![T::default(); HIDDEN_DIM],
            dmodel_kernel_2: vec![T::default(); OUTPUT_KERNEL_LEN],
            dmodel_bias_2: vec![T::default(); STATE_DIM],
        }
    }

    pub fn tensors(&self) -> [&[T]; 6] {
        [
            &self.perceive_kernel,
            &self.perceive_bias,
            &self.dmodel_kernel_1,
            &self.dmodel_bias_1,
            &self.dmodel_kernel_2,
            &self.dmodel_bias_2,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 6] {
        [
            &mut self.perceive_kernel,
            &mut self.perceive_bias,
            &mut self.dmodel_kernel_1,
            &mut self.dmodel_bias_1,
            &mut self.dmodel_kernel_2,
            &mut self.dmodel_bias_2,
        ]
    }

    /// All scalars in storage order.
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.tensors().into_iter().flat_map(|t| t.iter().copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.tensors_mut().into_iter().flat_map(|t| t.iter_mut())
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.iter().collect()
    }

    /// Inverse of [`Params::to_flat`]; `None` when the length is not [`PARAM_COUNT`].
    pub fn from_flat(flat: &[T]) -> Option<Self> {
        if flat.len() != PARAM_COUNT {
            return None;
        }
        let mut out = Self::zeros();
        for (dst, &src) in out.iter_mut().zip(flat) {
            *dst = src;
        }
        Some(out)
    }

    pub fn map<U>(&self, mut f: impl FnMut(T) -> U) -> Params<U> {
        let mut conv = |v: &Vec<T>| v.iter().map(|&x| f(x)).collect::<Vec<U>>();
        Params {
            perceive_kernel: conv(&self.perceive_kernel),
            perceive_bias: conv(&self.perceive_bias),
            dmodel_kernel_1: conv(&self.dmodel_kernel_1),
            dmodel_bias_1: conv(&self.dmodel_bias_1),
            dmodel_kernel_2: conv(&self.dmodel_kernel_2),
            dmodel_bias_2: conv(&self.dmodel_bias_2),
        }
    }

    /// Forces every diagonal tap to zero.
    pub fn zero_corners(&mut self) {
        for (row, col) in CORNER_TAPS {
            let start = perceive_index(row, col, 0, 0);
            self.perceive_kernel[start..start + STATE_DIM * HIDDEN_DIM].fill(T::default());
        }
    }
}

impl<T: Copy + Default + PartialEq> Params<T> {
    pub fn corners_are_zero(&self) -> bool {
        CORNER_TAPS.iter().all(|&(row, col)| {
            let start = perceive_index(row, col, 0, 0);
            self.perceive_kernel[start..start + STATE_DIM * HIDDEN_DIM]
                .iter()
                .all(|&w| w == T::default())
        })
    }
}

impl Params<f64> {
    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.iter_mut() {
            *a *= factor;
        }
    }

    /// Rounds to single precision.
    pub fn to_model(&self) -> ModelParams {
        self.map(|x| x as f32)
    }
}

impl Params<f32> {
    pub fn is_finite(&self) -> bool {
        self.iter().all(f32::is_finite)
    }

    pub fn to_f64(&self) -> ParamGrads {
        self.map(f64::from)
    }
}

/// Random initial weights.
///
/// The perceive and hidden layers are standard normal scaled by `1/sqrt(fan_in)`,
/// where the perceive fan-in counts only the five cardinal taps. The output
/// layer and every bias start at zero, so the first update is the identity.
pub fn init_params(seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros();

    let perceive_scale = 1.0 / ((5 * STATE_DIM) as f64).sqrt();
    for row in 0..KERNEL_SIZE {
        for col in 0..KERNEL_SIZE {
            if is_corner_tap(row, col) {
                continue;
            }
            let start = perceive_index(row, col, 0, 0);
            for w in &mut params.perceive_kernel[start..start + STATE_DIM * HIDDEN_DIM] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = (z * perceive_scale) as f32;
            }
        }
    }
    let dense_scale = 1.0 / (HIDDEN_DIM as f64).sqrt();
    for w in &mut params.dmodel_kernel_1 {
        let z: f64 = StandardNormal.sample(&mut rng);
        *w = (z * dense_scale) as f32;
    }
    params
}
