//! Learned Gaussian dynamics model and the training loops built on it.

mod dynamics;
mod train;

pub use dynamics::{GaussianDynamicsModel, MODEL_LOSS_SAMPLES};
pub use train::{
    evaluate_mean_policy, evaluate_random_policy, mbrpl_train, rollout_policy_learning_step,
    ContinuousPolicy, Method, RolloutReport, StepRecord, TrainConfig, TrainResult,
    CORRECTION_SIGMA0,
};
