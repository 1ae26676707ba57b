//! MLP encoder/classifier trained with the constrained-embedding objective.

mod loss;
mod mlp;
mod model;
mod train;

pub use loss::{
    classification_loss, compute_losses, constrained_loss, Centroids, ConstrainedGrad, PROB_FLOOR,
};
pub use mlp::{Dense, ForwardCache, MlpParams, Mode, DEFAULT_HIDDEN, EMBEDDING_DIM};
pub use model::{Model, MODEL_FORMAT};
pub use train::{
    compute_centroids_posthoc, evaluate_accuracy, objective_gradients, train, ObjectiveGrad,
    TrainConfig, TrainHistory, TrainOutput,
};
