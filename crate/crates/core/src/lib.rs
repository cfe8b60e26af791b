//! Langevin Monte Carlo for strongly convex potentials.
//!
//! Samplers (ULA, MALA), explicit non-asymptotic bounds in Wasserstein-2,
//! total variation and mean square error, a step-size planner, a reflection
//! coupling simulator and a Bayesian logistic regression benchmark.

pub mod benchmark;
pub mod bounds;
pub mod coupling;
pub mod error;
pub mod estimators;
pub mod normal;
pub mod potentials;
pub mod rng;
pub mod samplers;
pub mod schedules;

pub use error::{Error, Result};
pub use potentials::{
    check_gradient, ConvexityConstants, GaussianPotential, LogisticModel, LogisticPotential,
    Potential,
};
pub use schedules::{StepKind, StepSchedule};
pub use samplers::{
    mala_step, run_chain, run_replicas, synchronous_pair_step, ula_step, Algorithm, ChainConfig,
    ChainRun, ChainState,
};
pub use bounds::{BoundInputs, BoundReport, Metric, RhoReading, Variant};
pub use coupling::ArCouplingSpec;
pub use estimators::WeightedEstimatorConfig;
pub use benchmark::{BenchmarkConfig, BenchmarkReport, Dataset};
