//! Hardware cost prediction: simulated profiling, datasets, cost models
//! and their comparison against naive block-cost addition.

pub mod dataset;
pub mod device;
pub mod models;
pub mod normalize;
pub mod profiling;
pub mod report;

pub use dataset::{build_cost_dataset, CostDataset, CostSample};
pub use device::{DeviceKind, DeviceSimulator};
pub use models::{fit, CostModel, CostModelKind, FitReport, LstmRegressor, TrainSettings};
pub use normalize::Normalizer;
pub use profiling::{profile_primitives, PrimitiveKey, ProfilingTable};
pub use report::{compare_report, evaluate_rmse, run_pipeline, CostReport, PipelineOutput};
