//! From-scratch recurrent networks (GRU and an LSTM baseline) with dense
//! layers, exact backpropagation through time, and a minibatch trainer.

pub mod checkpoint;
mod gru;
mod lstm;
mod matrix;
mod model;
mod train;

pub use gru::{gru_cell_backward, gru_cell_forward, GruStep, GruWeights};
pub use lstm::{lstm_cell_backward, lstm_cell_forward, LstmStep, LstmWeights};
pub use matrix::Matrix;
pub use model::{Activation, Cell, CellKind, DenseLayer, ForwardCache, HeadLoss, HeadSpec, ModelSpec, RecurrentModel};
pub use train::{batch_loss_and_grad, clip_global_norm, mean_loss, train, OptimizerKind, TrainConfig, MOMENTUM};
