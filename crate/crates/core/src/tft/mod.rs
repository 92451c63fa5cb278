//! Temporal Fusion Transformer: autodiff tape, layers, model and training.

mod blocks;
mod layers;
mod model;
mod params;
mod tape;
mod train;

pub use blocks::{AttentionBlock, GrnBlock, VariableSelectionBlock};
pub use layers::Mode;
pub use model::{
    enforce_quantile_monotonicity, Batch, ForwardNodes, InputSchema, InterpretationTrace, QuantileForecast,
    TftHyperParams, TftModel, VarKind, VariableSpec, CHECKPOINT_VERSION,
};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use train::{evaluate_loss, train_tft, EarlyStopping, EpochRecord, StopDecision, TrainingLog};
