//! Model-free property checks shared by the integration tests and the acceptance runner.
//!
//! Each returns a short summary on success and the first violation otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilenca::nca::{init_grid, CellState, Nca, StateGrid};
use tilenca::params::{perceive_index, ModelParams, ParamGrads, HIDDEN_DIM, KERNEL_SIZE, PARAM_COUNT, STATE_DIM};
use tilenca::quant::Quantizer;
use tilenca::shape::{canonical_shapes, parse_shape, ShapeGrid};
use tilenca::sim::{firmware_run, listing1_validate, LinkCodec, SimClockConfig};
use tilenca::trainer::{gradients, rollout_with_tape, sample_masks, train_from, TrainConfig};
use tilenca::weights::{decode_weights, encode_weights};

use super::{random_params, random_shape, random_state};

pub type Check = Result<String, String>;

pub const FD_STEP: f64 = 1e-4;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_SEEDS: [u64; 5] = [1, 2, 3, 17, 42];

fn loss_at(params: &ParamGrads, shape: &ShapeGrid, masks: &[Vec<bool>]) -> f64 {
    rollout_with_tape(&Nca::new(params), shape, masks).loss(shape.label())
}

/// Central differences on 20 random nonzero weights per seed, random 3×3 shape, three steps.
pub fn gradient_vs_fd() -> Check {
    let mut worst: f64 = 0.0;
    for seed in FD_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let label = rng.random_range(0..10);
        let shape = random_shape(&mut rng, 3, 3, 6, label);
        let params = random_params(seed, 0.3);
        let masks = sample_masks(shape.active_count(), 3, 0.25, seed);
        let nca = Nca::new(&params);
        let tape = rollout_with_tape(&nca, &shape, &masks);
        let analytic = gradients(&tape, label).to_flat();
        let flat = params.to_flat();

        let mut checked = 0;
        while checked < 20 {
            let idx = rng.random_range(0..PARAM_COUNT);
            if flat[idx] == 0.0 {
                continue;
            }
            let mut plus = flat.clone();
            plus[idx] += FD_STEP;
            let mut minus = flat.clone();
            minus[idx] -= FD_STEP;
            let lp = loss_at(&ParamGrads::from_flat(&plus).unwrap(), &shape, &masks);
            let lm = loss_at(&ParamGrads::from_flat(&minus).unwrap(), &shape, &masks);
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            let a = analytic[idx];
            let scale = a.abs().max(numeric.abs());
            let err = (a - numeric).abs();
            // Absolute floor for weights the loss barely depends on.
            if err > FD_REL_TOL * scale + 1e-9 {
                return Err(format!("seed {seed} weight {idx}: analytic {a} numeric {numeric}"));
            }
            if scale > 0.0 {
                worst = worst.max(err / scale);
            }
            checked += 1;
        }
    }
    Ok(format!("100 weights, max relative error {worst:.2e}"))
}

/// Training keeps diagonal taps at zero; stepping keeps empty cells at zero.
pub fn corner_and_clamp() -> Check {
    let config = TrainConfig {
        iterations: 5,
        batch_size: 8,
        rng_seed: 11,
        ..TrainConfig::default()
    };
    let mut start = random_params(11, 0.2).to_model();
    for row in [0, 2] {
        for col in [0, 2] {
            start.perceive_kernel[perceive_index(row, col, 3, 3)] = 0.5;
        }
    }
    let (trained, _) = train_from(&config, &canonical_shapes(), start, |_| {}).map_err(|e| e.to_string())?;
    if !trained.corners_are_zero() {
        return Err("diagonal tap nonzero after training".into());
    }

    let nca = Nca::new(&random_params(12, 0.4));
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..20 {
        let cells = rng.random_range(3..18);
        let shape = random_shape(&mut rng, 5, 5, cells, 0);
        let mut grid = init_grid(&shape);
        for step in 0..10 {
            let mask: Vec<bool> = (0..shape.active_count()).map(|_| rng.random()).collect();
            grid = nca.grid_step(&grid, &mask);
            for y in 0..shape.height() {
                for x in 0..shape.width() {
                    if !shape.is_active(x, y) && !grid.state(x, y).is_zero() {
                        return Err(format!("trial {trial} step {step}: empty cell ({x}, {y}) nonzero"));
                    }
                }
            }
        }
    }
    Ok("corners exact zero after 5 Adam steps; empty cells zero over 200 steps".into())
}

/// Reference step: zero-padded 3×3 convolution over every grid position, then the
/// two pointwise layers, residual add, and clamping of empty cells.
pub fn reference_step(params: &ParamGrads, grid: &StateGrid) -> Vec<CellState> {
    let shape = grid.shape();
    let (w, h) = (shape.width() as isize, shape.height() as isize);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            if !shape.is_active(x as usize, y as usize) {
                out.push(CellState::ZERO);
                continue;
            }
            let mut h1 = params.perceive_bias.clone();
            for row in 0..KERNEL_SIZE {
                for col in 0..KERNEL_SIZE {
                    let (nx, ny) = (x + col as isize - 1, y + row as isize - 1);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let s = grid.state(nx as usize, ny as usize);
                    for i in 0..STATE_DIM {
                        for (o, acc) in h1.iter_mut().enumerate() {
                            *acc += s[i] * params.perceive_kernel[perceive_index(row, col, i, o)];
                        }
                    }
                }
            }
            let h1: Vec<f64> = h1.into_iter().map(|v| v.max(0.0)).collect();
            let mut h2 = params.dmodel_bias_1.clone();
            for (i, a) in h1.iter().enumerate() {
                for (o, acc) in h2.iter_mut().enumerate() {
                    *acc += a * params.dmodel_kernel_1[i * HIDDEN_DIM + o];
                }
            }
            let h2: Vec<f64> = h2.into_iter().map(|v| v.max(0.0)).collect();
            let mut next = *grid.state(x as usize, y as usize);
            for o in 0..STATE_DIM {
                let mut d = params.dmodel_bias_2[o];
                for (i, a) in h2.iter().enumerate() {
                    d += a * params.dmodel_kernel_2[i * STATE_DIM + o];
                }
                next[o] += d;
            }
            out.push(next);
        }
    }
    out
}

/// Lattice stepping against the dense convolution reference on random shapes and states.
pub fn dense_conv_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let params = random_params(100 + seed, 0.3);
        let nca = Nca::new(&params);
        let cells = rng.random_range(2..16);
        let shape = random_shape(&mut rng, 5, 4, cells, 0);
        let states: Vec<CellState> = (0..shape.active_count()).map(|_| random_state(&mut rng)).collect();
        let grid = StateGrid::from_active_states(&shape, &states);
        let expected = reference_step(&params, &grid);
        let got = nca.grid_step(&grid, &vec![true; shape.active_count()]);
        for (a, b) in got.states().iter().zip(&expected) {
            for c in 0..STATE_DIM {
                worst = worst.max((a[c] - b[c]).abs());
            }
        }
    }
    if worst <= 1e-6 {
        Ok(format!("10 random grids, max abs difference {worst:.2e}"))
    } else {
        Err(format!("max abs difference {worst:.2e} exceeds 1e-6"))
    }
}

/// 10,000 values per quantizer against the half-step bound.
pub fn quantizer_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..10 {
        let lo: f32 = rng.random_range(-5.0..0.0);
        let hi: f32 = lo + rng.random_range(0.01..8.0);
        let q = Quantizer::new(lo, hi).map_err(|e| e.to_string())?;
        let bound = (hi as f64 - lo as f64) / 510.0 + 1e-9;
        for _ in 0..10_000 {
            let v = rng.random_range(lo as f64..=hi as f64);
            let err = (q.dequantize_value(q.quantize_value(v)) - v).abs();
            if err > bound {
                return Err(format!("[{lo}, {hi}] value {v}: error {err} > {bound}"));
            }
            worst_ratio = worst_ratio.max(err / bound);
        }
    }
    Ok(format!("100000 values, worst error {:.3} of bound", worst_ratio))
}

pub fn weight_file_round_trip() -> Check {
    for seed in 0..5u64 {
        let params: ModelParams = random_params(200 + seed, 2.0).to_model();
        let q = Quantizer::new(-1.5 - seed as f32, 2.25).map_err(|e| e.to_string())?;
        let bytes = encode_weights(&params, &q);
        let (back, qb) = decode_weights(&bytes).map_err(|e| e.to_string())?;
        let same = params.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same || qb.lo().to_bits() != q.lo().to_bits() || qb.hi().to_bits() != q.hi().to_bits() {
            return Err(format!("seed {seed}: round trip changed bits"));
        }
        if encode_weights(&back, &qb) != bytes {
            return Err(format!("seed {seed}: re-encoding differs"));
        }
    }
    Ok("5 random parameter sets bit-identical".into())
}

/// A perturbation at the center of a full 5×5 grid reaches exactly the cells
/// within Manhattan distance `k` after `k` steps.
pub fn light_cone() -> Check {
    let shape = parse_shape("#####\n#####\n#####\n#####\n#####", 0).unwrap();
    let nca = Nca::new(&random_params(300, 0.3));
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let base: Vec<CellState> = (0..25).map(|_| random_state(&mut rng)).collect();
    let mut bumped = base.clone();
    bumped[12][5] += 0.25;
    let mut a = StateGrid::from_active_states(&shape, &base);
    let mut b = StateGrid::from_active_states(&shape, &bumped);
    let full = vec![true; 25];
    for k in 1..=3 {
        a = nca.grid_step(&a, &full);
        b = nca.grid_step(&b, &full);
        for y in 0..5usize {
            for x in 0..5usize {
                let dist = x.abs_diff(2) + y.abs_diff(2);
                let same = a.state(x, y).0.iter().zip(&b.state(x, y).0).all(|(p, q)| p.to_bits() == q.to_bits());
                if dist > k && !same {
                    return Err(format!("step {k}: ({x}, {y}) at distance {dist} changed"));
                }
                if dist == k && same {
                    return Err(format!("step {k}: ({x}, {y}) on the cone edge unchanged"));
                }
            }
        }
    }
    Ok("3 steps on 5×5, outside cone bit-identical".into())
}

/// Same seed, same bits: short training twice, then listing1 and firmware runs twice.
pub fn determinism() -> Check {
    let config = TrainConfig {
        iterations: 4,
        batch_size: 6,
        rng_seed: 21,
        ..TrainConfig::default()
    };
    let shapes = canonical_shapes();
    let (p1, _) = tilenca::train(&config, &shapes).map_err(|e| e.to_string())?;
    let (p2, _) = tilenca::train(&config, &shapes).map_err(|e| e.to_string())?;
    if p1.to_flat().iter().zip(p2.to_flat()).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err("training weights differ".into());
    }
    let nca = Nca::new(&p1);
    let q = Quantizer::new(-2.0, 2.0).unwrap();
    let codec = LinkCodec::Quantized(q);
    for shape in &shapes {
        if listing1_validate(&nca, shape, 30, 9) != listing1_validate(&nca, shape, 30, 9) {
            return Err(format!("listing1 report differs for {}", shape.label()));
        }
        let clock = SimClockConfig::with_seed(9);
        let r1 = firmware_run(&nca, shape, &codec, &clock).map_err(|e| e.to_string())?;
        let r2 = firmware_run(&nca, shape, &codec, &clock).map_err(|e| e.to_string())?;
        if r1 != r2 || r1.to_export() != r2.to_export() {
            return Err(format!("firmware report differs for {}", shape.label()));
        }
    }
    Ok("weights and 20 run reports bit-identical".into())
}
