//! Dense 2-D tensors with reverse-mode automatic differentiation, plus the
//! optimizer, learning-rate schedule and early-stopping rule used in training.

mod optim;
mod tape;

pub use optim::{Adam, AdamConfig, EarlyStopping, PlateauConfig, PlateauScheduler};
pub use tape::{Idx, Tape, Var};
pub(crate) use tape::silu;

/// All tensors are row-major `f64` matrices; vectors are `n x 1` or `1 x n`.
pub type Tensor = ndarray::Array2<f64>;
