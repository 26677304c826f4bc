//! Loss, optimizer and the joint training loop.

pub mod loss;
pub mod reparam;
pub mod rmsprop;
pub mod train;

pub use loss::{loss_log_l1, loss_log_l1_grad};
pub use reparam::{decode, encode};
pub use rmsprop::RmsProp;
pub use train::{
    init_material_params, mean_loss, train_candidate, train_jointly, Candidate, EpochLog, MaterialData,
    MaterialParams, SplitData, TrainConfig, TrainOutcome, Trainable,
};
