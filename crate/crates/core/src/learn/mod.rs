//! Kernel learning with a factorized spectral density.

pub mod baseline;
pub mod experiment;
pub mod model;
pub mod net;
pub mod optim;
pub mod train;

pub use baseline::{dense_nll, dense_posterior, exact_posterior, RbfModel};
pub use experiment::{
    synthetic_dataset, Dataset, LearningExperiment, SyntheticConfig, TrialResult,
};
pub use model::{
    build_learned_features, build_learned_spectral, gradient, lowrank_nll, negative_log_marginal,
    LearnedBasis, ModelParams, Objective, ParamGrads,
};
pub use net::{eval_spectral_net, SpectralNet};
pub use optim::{amsgrad_step, AmsGradConfig, AmsGradState};
pub use train::{
    init_params, lowrank_posterior, posterior_predict, train, train_from, PosteriorCache,
    TrainConfig, TrainOutcome,
};
