//! Bayesian calibration: likelihood, MH/DRAM sampling, posterior summaries
//! and predictive propagation.

pub mod calibration;
pub mod ensemble;
pub mod likelihood;
pub mod mcmc;
pub mod predict;

pub use calibration::{calibrate, case_report, CaseReport, SetRole, SizeError};
pub use ensemble::{
    effective_sample_size, information_measure, map_estimate, split_r_hat, PosteriorEnsemble,
    PosteriorSummary,
};
pub use likelihood::{gaussian_log_likelihood, Likelihood, LikelihoodSpec, NoiseSpec, SizeBlock};
pub use mcmc::{dram_sample, initial_points, mh_sample, run_chain, ChainConfig, ChainRun};
pub use predict::{posterior_predict, PredictiveBand};
