//! Linear open quantum systems as quadrature state-space models, composed
//! into feedback networks, solved for steady-state excitation numbers, and
//! optimized over measurement-based and coherent controller families.

pub mod controllers;
pub mod error;
pub mod model;
pub mod network;
pub mod optimize;
pub mod scenario;
pub mod steady;

pub use error::{QlinError, Result};
pub use model::{
    cavity_plant, commutation_matrix, optomech_plant, realizability_residual, CavityParams,
    ChannelKind, ChannelLabel, LinearModel, Mode, ModeKind, NoiseSpec, OptomechParams,
};
pub use network::{concatenate, feedback_interconnect, series, Wiring};
pub use steady::{
    is_hurwitz, noise_budget, solve_care, solve_lyapunov, steady_covariance, transfer_function,
    CovarianceResult, NoiseBudget,
};
