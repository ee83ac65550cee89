//! Modular neural-architecture-search engine with hardware cost models.
//!
//! Components (search space, controller, weights manager, evaluator,
//! objective, trainer) exchange [`DiscreteRollout`]s and are assembled from
//! a YAML config through a [`Registry`].

pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod evaluator;
pub mod hwcost;
pub mod linalg;
pub mod nn;
pub mod orchestrator;
pub mod registry;
pub mod rng;
pub mod rollout;
pub mod scalar;
pub mod session;
pub mod space;

pub use config::{ComponentKind, Config};
pub use error::{Error, Result};
pub use registry::Registry;
pub use rollout::{DifferentiableRollout, DiscreteRollout};
pub use scalar::Scalar;
pub use session::Session;
pub use space::SearchSpace;

pub type Tensor = nn::Tensor2<f64>;
pub type Dense = nn::DenseLayer<f64>;
pub type DenseGrads = nn::DenseGrads<f64>;
pub type Lstm = nn::LstmCell<f64>;
pub type LstmGrads = nn::LstmGrads<f64>;
pub type Mlp = nn::Mlp<f64>;
pub type Optimizer = nn::Optimizer<f64>;
