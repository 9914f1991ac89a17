//! Two-regime Markov-switching spatio-temporal log-ARCH models.
//!
//! The crate covers the whole workflow around the model
//!
//! ```text
//! Y*_t = rho_s W Y*_t + gamma_s Y*_{t-1} + delta_s W Y*_{t-1} + phi_s 1 + U*_t
//! ```
//!
//! where `Y*_t` is the vector of log-squared observations at time `t` and
//! `s = s_t` follows a two-state Markov chain:
//!
//! * [`weights`]: queen-contiguity grids, row normalization, and model-based
//!   k-nearest-neighbour matrices built from Piccolo distances between
//!   univariate log-ARCH fits.
//! * [`model`] and [`simulate`]: parameter and panel types, and the
//!   data-generating process.
//! * [`filter`]: conditional densities, the Hamilton filter, and Kim's
//!   smoother.
//! * [`estimation`]: quasi-maximum-likelihood fits of the two-regime and
//!   one-regime models, standard errors and BIC.
//! * [`montecarlo`]: replicate-simulate-estimate studies with mean/RMSE
//!   reporting.
//! * [`io`]: CSV and JSON formats used by the `msstarch` binary.

pub mod error;
pub mod estimation;
pub mod filter;
pub mod io;
pub mod linalg;
pub mod logarch;
pub mod model;
pub mod montecarlo;
pub mod optim;
pub mod rng;
pub mod simulate;
pub mod weights;

pub use error::{Error, Result};
pub use estimation::{
    bic, fit_one_regime, fit_two_regime, std_errors, EstimationResult, FitOptions, ModelKind,
    ParamVector,
};
pub use filter::{
    hamilton_filter, kim_smooth, log_cond_density, loglik, FilterOutput, SmoothedPath,
};
pub use logarch::{fit_log_arch, piccolo_distance, piccolo_matrix, UnivariateLogArchFit};
pub use model::{
    log_square, stationary_dist, LogSquaredPanel, ModelParams, Panel, RegimeParams, RegimePath,
    TransitionMatrix, ZeroPolicy, MU_EPSILON,
};
pub use montecarlo::{align_regimes, run_study, StudyConfig, StudyReport};
pub use simulate::{simulate, Simulation};
pub use weights::{build_queen_grid, knn_weights, row_normalize, DistanceMatrix, WeightMatrix};
