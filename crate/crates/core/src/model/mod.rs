//! Euclidean network `F(x; θ)`, manual backpropagation, Adam and the
//! training/inference loops around the penalized Busemann loss.

mod adam;
mod inference;
mod network;
mod train;

pub use adam::{Adam, BETA1, BETA2, EPSILON as ADAM_EPSILON};
pub use inference::{
    argmax_cosine_class, argmin_loss_class, embed_dataset, evaluate, logistic_cross_entropy, logreg_equivalence_check,
    one_dim_loss, predict, EmbeddedExample, EvalReport, LogregReport, Prediction, LOGREG_PREACTIVATION_RANGE,
};
pub use network::{Activation, Gradients, Layer, LayerGradient, Model};
pub use train::{accuracy, train, TrainConfig, TrainHistory};
