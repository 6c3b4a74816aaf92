//! Neural cellular automata that let an assembly of square tiles agree on
//! which digit shape it forms, using only messages between cardinal neighbours.
//!
//! - [`shape`]: digit shapes and the built-in catalogs
//! - [`nca`]: cell states and the constrained update rule
//! - [`trainer`]: backpropagation through time and Adam
//! - [`sim`]: asynchronous validation and the firmware-level tile simulator
//! - [`quant`]: 8-bit message quantizer
//! - [`weights`]: weight files and firmware array export
//! - [`experiment`]: catalog-wide robustness experiments

pub mod error;
pub mod experiment;
pub mod nca;
pub mod params;
pub mod shape;
pub mod trainer;

pub use error::{Error, Result};
pub use nca::{classify, init_grid, CellState, Direction, Lattice, Nca, StateGrid};
pub use params::{init_params, ModelParams, ParamGrads, Params, PARAM_COUNT, STATE_DIM};
pub use shape::{canonical_shapes, parse_shape, render_shape, scaled_down_shapes, scaled_up_shapes, Catalog, ShapeGrid};
pub use trainer::{train, TrainConfig, TrainReport};
pub mod quant;
pub mod sim;
pub mod weights;
