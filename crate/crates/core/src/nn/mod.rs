//! Small reverse-mode autodiff engine over 64-bit dense tensors, with the
//! op set needed by the recurrent models, an SGD trainer and a checkpoint
//! format.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use gradcheck::{check_gradients, GradCheckReport};
pub use graph::{Gradients, Graph, ParamId, ParamStore, Var};
pub use layers::{Embedding, Linear, Lstm, LstmState};
pub use tensor::{log_softmax, log_sum_exp, softmax, Tensor};
pub use train::{clip_gradients, sgd_step, TrainConfig};
