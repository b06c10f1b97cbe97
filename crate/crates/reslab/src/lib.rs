//! Library for studying discrete-time min-max algorithms through their
//! continuous-time companion fields: steppers, resolution ODEs, spectral
//! stability classification, step-size bounds, and batch experiments.

pub mod algorithms;
pub mod error;
pub mod expr;
pub mod experiments;
pub mod fields;
pub mod linalg;
pub mod odes;
pub mod problems;
pub mod sampling;
pub mod stability;
pub mod trajectory;

pub use algorithms::{dta_map, iterate, step, AlgorithmId, StepDiagnostics, StepOutcome, StopRule};
pub use error::{Error, Result};
pub use experiments::{
    basin_escape_study, degenerate_saddle_study, set_convergence_study, transfer_study,
    DegenerateOptions, Dynamics, EscapeOptions, SetConvergenceOptions, TransferOptions,
};
pub use expr::parse_objective;
pub use fields::{
    eval_f, eval_grad_f, eval_h, eval_hess_f_dir, lambda_tau, HyperParams, Matrix, Objective,
    Point, Vector,
};
pub use odes::{
    consistency_exponent, resolution_field, rk4_integrate, ConsistencyReport, ResolutionOrder,
    VectorField,
};
pub use problems::{builtin, random_quadratic, ProblemSpec, SpectrumSpec, BUILTIN_IDS};
pub use stability::{
    classify_equilibrium, eigs, field_jacobian_at, is_saddle, lemma_negeig_check,
    map_jacobian_at, step_bounds, BoundsOptions, BoundsReport, Kind, SaddleReport,
    SaddleVerdict, SpectrumReport, Verdict,
};
pub use trajectory::{DecayFit, Termination, Trajectory};
