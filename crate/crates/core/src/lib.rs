//! Beamforming design for cell-free massive MIMO integrated sensing and
//! communication (ISAC).
//!
//! The crate covers the full pipeline used by the experiment runner:
//!
//! * [`model`]: scenario configuration, ULA steering vectors, multipath
//!   channel generation and the sensing-side constants (MRC combiners,
//!   linear sensing threshold).
//! * [`nullspace`]: per-(AP, UE) null-space bases of the interference
//!   channels and the projected equivalent channels.
//! * [`solver`]: a direct KKT / dual-bisection solver for the convex
//!   surrogate subproblems (linear objective, disjoint weighted power
//!   constraints, one linear inequality).
//! * [`twostage`]: the two-stage distributed design, where every transmit AP
//!   refines its local precoders and the central unit refines the
//!   per-stream complex weights, exchanging only scalars.
//! * [`baseline`]: the centralized MM design over all null-space variables.
//! * [`metrics`]: SINR, sensing SNR, transmit beampatterns and fronthaul load.
//! * [`experiment`]: Monte Carlo runners producing CSV rows and a JSON summary.

pub mod baseline;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod nullspace;
pub mod rng;
pub mod solver;
pub mod twostage;

pub use baseline::{run_centralized, CentralizedState};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentKind, ExperimentOutput, ExperimentSpec, Row};
pub use metrics::{MetricsReport, Method};
pub use model::{default_config, ChannelSet, Scenario, SensingGeometry, SystemConfig};
pub use solver::{SolveStatus, SolverReport, SubproblemSpec};
pub use twostage::{run_two_stage, PrecoderState, RunRecord, TwoStageOptions};

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
