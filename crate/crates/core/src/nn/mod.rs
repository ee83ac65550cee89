//! Minimal differentiable building blocks with hand-written backward passes.

pub mod archive;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod mlp;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod tensor;

pub use archive::{NamedTensor, TensorArchive};
pub use dense::{sigmoid, Activation, DenseGrads, DenseLayer};
pub use loss::{log_softmax, mse, softmax, softmax_cross_entropy, softmax_entropy};
pub use mlp::{Mlp, MlpGrads};
pub use lstm::{LstmCell, LstmGrads, LstmStep, PackedTrace};
pub use optim::{Optimizer, OptimizerKind};
pub use params::ParamSet;
pub use tensor::{gemm, Tensor2, View};
