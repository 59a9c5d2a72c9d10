//! Backpropagation engine: layers, loss, optimizer, training loop and gradient checking.

mod gradcheck;
mod layers;
mod loss;
mod network;
mod optim;
mod train;

pub use gradcheck::{gradcheck, gradcheck_with, offset_biases, relative_error, GradcheckOptions, GradcheckReport, GroupCheck};
pub use layers::{relu, relu_backward, Conv2d, Dense, MaxPool2d};
pub use loss::{argmax, softmax, softmax_cross_entropy};
pub use network::{Layer, LayerCache, Network, Trace};
pub use optim::{sgd_step, TrainConfig};
pub use train::{batch_gradients, evaluate, mean_loss, predict_all, train, train_with, EpochMetrics, Metrics, GROUP};
