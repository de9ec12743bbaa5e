//! Training linear scorers against precision/recall-style objectives through
//! hinge-bound surrogates and a stochastic saddle-point solver.

pub mod bounds;
pub mod cli;
pub mod duality;
pub mod error;
pub mod fbeta_lp;
pub mod io;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod optimizer;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    Label, LabeledDataset, LabeledExample, MetricsReport, ObjectiveKind, ObjectiveSpec,
    OperatingPoint, SaddleState, ThresholdedScorer,
};
