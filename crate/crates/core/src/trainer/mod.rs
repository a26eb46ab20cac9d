//! Joint training of small softmax classifiers with a decorrelation penalty.
//!
//! Every member is a one-hidden-layer network with a leaky rectifier. The
//! ensemble minimises the sum of the members' cross-entropies plus
//!
//! ```text
//! λ · 2/(n−1) · Σ_{i<j} J_ij,
//! J_ij = −(1/M) Σ_m [ 1{h_i(x_m) ≠ y_m} ln(1 − p_j(h_i(x_m) | x_m))
//!                   + 1{h_j(x_m) ≠ y_m} ln(1 − p_i(h_j(x_m) | x_m)) ]
//! ```
//!
//! which pushes each member away from the wrong answers of the others.
//! Members may see the input through different orthogonal views, emulating
//! sensors placed at different angles.

mod data;
mod loss;
mod model;
mod optim;
mod sweep;
mod train;
mod view;

pub use data::{SyntheticDataset, SyntheticSpec};
pub use loss::{
    ensemble_penalty, pairwise_decorrelation_loss, penalty_coefficient, total_loss,
    total_loss_gradient, LossBreakdown, PROBABILITY_FLOOR,
};
pub use model::{EnsembleModel, MemberNet, LEAKY_SLOPE};
pub use optim::Adam;
pub use sweep::{
    cell_seed, lambda_sweep, run_cell, CellSummary, LambdaSummary, Stat, SweepCell, SweepReport,
    DEFAULT_GRID,
};
pub use train::{
    train_ensemble, EpochMetrics, LearningRateSchedule, StopReason, TrainingConfig, TrainingRun,
};
pub use view::ViewSpec;
