//! Symmetric-difference training: sample classification, the four loss
//! terms, Adam with step decay, and the epoch loop with scheduled label
//! rebuilds.

mod config;
mod losses;
mod objective;
mod optim;
mod train;

pub use config::{DataLoss, TrainConfig};
pub use losses::{
    classify_symmetric_difference, loss_eikonal, loss_l1, loss_min_surface, loss_off, loss_on, LossWeights, SampleClass,
};
pub use objective::{total_loss_and_grads, FieldGrads, LossBreakdown, Objective, DATA_SHARD, REG_SHARD};
pub use optim::{adam_step, AdamConfig, OptimizerState};
pub use train::{train, train_with, LogRow, RebuildEvent, TrainHooks, TrainLog, TrainOutput, LOG_COLUMNS};
