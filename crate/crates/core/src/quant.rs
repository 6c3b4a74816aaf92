//! Linear 8-bit quantizer for cell states sent over the serial links.

use crate::error::{Error, Result};
use crate::nca::{init_grid, CellState, Nca};
use crate::params::STATE_DIM;
use crate::shape::ShapeGrid;

/// Steps run when measuring the dynamic range of a model's states.
pub const CALIBRATION_STEPS: usize = 30;

/// Extra headroom added on each side of the measured range.
pub const CALIBRATION_MARGIN: f64 = 0.05;

/// A quantized cell state as sent on the wire.
pub type QuantizedState = [u8; STATE_DIM];

/// Linear map with byte 0 at `lo` and byte 255 at `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    lo: f32,
    hi: f32,
}

impl Quantizer {
    pub fn new(lo: f32, hi: f32) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Validity(format!(
                "quantizer range [{lo}, {hi}] must be finite with lo < hi"
            )));
        }
        Ok(Quantizer { lo, hi })
    }

    pub fn lo(&self) -> f32 {
        self.lo
    }

    pub fn hi(&self) -> f32 {
        self.hi
    }

    /// Width of one code step.
    pub fn step(&self) -> f64 {
        (f64::from(self.hi) - f64::from(self.lo)) / 255.0
    }

    /// Largest round-trip error for in-range values: half a step.
    pub fn max_error(&self) -> f64 {
        self.step() / 2.0
    }

    /// Saturating quantization with round-half-up.
    pub fn quantize_value(&self, v: f64) -> u8 {
        let (lo, hi) = (f64::from(self.lo), f64::from(self.hi));
        if v.is_nan() {
            return 0;
        }
        let clamped = v.clamp(lo, hi);
        let scaled = 255.0 * (clamped - lo) / (hi - lo);
        (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
    }

    pub fn dequantize_value(&self, b: u8) -> f64 {
        let (lo, hi) = (f64::from(self.lo), f64::from(self.hi));
        lo + (hi - lo) * f64::from(b) / 255.0
    }

    pub fn quantize(&self, state: &CellState) -> QuantizedState {
        state.0.map(|v| self.quantize_value(v))
    }

    pub fn dequantize(&self, bytes: &QuantizedState) -> CellState {
        CellState(bytes.map(|b| self.dequantize_value(b)))
    }

    /// `dequantize(quantize(state))`.
    pub fn round_trip(&self, state: &CellState) -> CellState {
        self.dequantize(&self.quantize(state))
    }

    /// Symmetric range around zero covering `[min, max]`, widened by [`CALIBRATION_MARGIN`].
    pub fn from_observed_range(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::Calibration(format!(
                "observed range [{min}, {max}] is not finite"
            )));
        }
        let extent = min.abs().max(max.abs());
        if min >= max || extent == 0.0 {
            return Err(Error::Calibration(format!(
                "degenerate observed range [{min}, {max}]"
            )));
        }
        let bound = extent * (1.0 + CALIBRATION_MARGIN);
        Quantizer::new(-bound as f32, bound as f32)
            .map_err(|e| Error::Calibration(e.to_string()))
    }
}

/// Every active-cell state seen during [`CALIBRATION_STEPS`] synchronous steps
/// on each shape, including the initial states.
pub fn calibration_states(nca: &Nca, shapes: &[ShapeGrid]) -> Vec<CellState> {
    let mut out = Vec::new();
    for shape in shapes {
        let grid = init_grid(shape);
        let lattice = grid.lattice().clone();
        let mask = vec![true; lattice.len()];
        let mut states = grid.active_states();
        out.extend_from_slice(&states);
        for _ in 0..CALIBRATION_STEPS {
            states = nca.step_cells(&lattice, &states, &mask);
            out.extend_from_slice(&states);
        }
    }
    out
}

/// Fits a quantizer to the dynamic range of the model's rollouts on `shapes`.
pub fn calibrate(nca: &Nca, shapes: &[ShapeGrid]) -> Result<Quantizer> {
    if shapes.is_empty() {
        return Err(Error::Calibration("no shapes to calibrate on".into()));
    }
    let states = calibration_states(nca, shapes);
    let (min, max) = states
        .iter()
        .flat_map(|s| s.0.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    Quantizer::from_observed_range(min, max)
}
