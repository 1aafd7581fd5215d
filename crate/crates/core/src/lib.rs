//! Support vector clustering: minimum enclosing ball fitting in kernel space,
//! grid-hashing cluster labeling, and string/set kernels for term data.

pub mod data;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod labeling;
pub mod optimizer;
pub mod pipeline;
pub mod projection;
pub mod synth;

pub use data::{DataMatrix, LanguageModel, MatrixFormat, TermDataset};
pub use error::{Error, Result};
pub use kernels::{KernelKind, KernelMatrix, KernelParams};
pub use labeling::{ClusterAssignment, GridLabeling, LabelSpace};
pub use optimizer::{solve_dual, BallProblem, Method, SvcModel};
pub use pipeline::{fit, DataSource, FittedRun, RunConfig};
pub use projection::{project, Projection2D};
pub use eval::LabelMethod;
