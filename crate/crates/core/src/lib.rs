//! Generalized kernel interpolation from linear functionals (point
//! evaluations and Radon line integrals) with greedy data selection.

pub mod error;
pub mod experiment;
pub mod functional;
pub mod greedy;
pub mod io;
pub mod kernel;
pub mod newton;
pub mod pairing;
pub mod phantom;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use experiment::{
    compute_msi, compute_msr, run_experiment, ExperimentConfig, Method, MethodSummary, ResultsTable,
};
pub use functional::{line_point, parameter_distance, Functional, ParameterMetric};
pub use greedy::{
    beta_indicator, run_greedy, GeometricSpace, GreedyTrace, RuleKind, SelectionRule, Selector,
    StopCriteria, StopReason, TraceRecord,
};
pub use kernel::{Kernel, KernelConfig, KernelFamily, Point, WeightFunction};
pub use newton::{
    direct_solve, fill_distance, CandidateSet, FillSpace, ModelSnapshot, NewtonModel,
};
pub use pairing::{condition_number, GramMatrix, PairingEngine, PairingMode};
pub use phantom::{
    phantom_eval, radon_exact, sample_functionals, Ellipse, EllipsePhantom, SampleSet,
};
pub use quadrature::{double_line_integral, line_integral, Estimate, QuadratureSpec};
