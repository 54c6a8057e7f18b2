//! Landweber, dual Landweber, modular gradient descent and their stochastic
//! variants, plus the epoch loop that drives them.

mod run;
mod runlog;
mod schedule;
mod steps;

pub use run::{hilbert_initial_step, run, AdaptHook, AdaptedMaps, Algorithm, Family, RunOutput, Sampling, SolverConfig};
pub use runlog::{EpochRecord, RunLog, RUNLOG_HEADER};
pub use schedule::{gamma_for_exponent, step_size, ScheduleKind, StepBoundConstants, StepSchedule};
pub use steps::{
    banach_sgd_step, dual_landweber_step, gradient_banach, gradient_modular, gradient_residual_hilbert,
    landweber_step, modular_gd_step, modular_sgd_step, objective_banach, objective_hilbert, objective_modular,
    BanachExponents, SolverState,
};
