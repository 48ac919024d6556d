//! Exact simulation of single-layer extended QAOA circuits on random Ising
//! problems, together with the tools used to show that the resulting pure
//! states are pseudo-Boltzmann: per-instance and replica-averaged Boltzmann
//! fits, the Hamming/energy covariance that sets the effective temperature,
//! and a Metropolis baseline for the rapid-mixing comparison.
//!
//! Configurations are indexed by an integer `x` whose bit `i` is spin `i`,
//! with bit value 1 meaning spin up (`s_i = +1`).

pub mod angles;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod interferometer;
pub mod mcmc;
pub mod optim;
pub mod problem;
pub mod seed;
pub mod sim;
pub mod spectrum;
pub mod stats;
pub mod thermo;

pub use angles::{optimize_angles, sweep, HeldAngle, OptResult, SweepPoint};
pub use ensemble::{analyze_at, analyze_instance, replica_problem, InstanceAnalysis};
pub use error::{Error, Result};
pub use graph::{gen_gnm_graph, gen_regular_graph, Graph};
pub use interferometer::{
    covariance_all, covariance_direct, exact_amplitude, exact_probabilities, fit_covariance_law, joint_distribution,
    moments, predict_logprob_degenerate, predict_logprob_nondegenerate, CovarianceBins, CovarianceLaw,
    CovarianceProfile, DegeneratePrediction, Hierarchy, JointMoments, MomentsResult, ReparamAngles,
};
pub use mcmc::{compare, metropolis_sample, ComparisonRow, MixingComparison, SampleSet};
pub use problem::{build_problem, operator_norm, Family, GraphMeta, IsingProblem};
pub use sim::{
    analytic_expectation, expectation_energy, ground_state_enhancement, prepare_state, probabilities, CircuitParams,
    Enhancement, QuantumState,
};
pub use spectrum::{full_spectrum, Spectrum, MAX_SPECTRUM_QUBITS};
pub use thermo::{
    fit_instance, fit_replicas, fit_scaling, BinAccumulator, BoltzmannFit, InstanceRecord, ReplicaFit, ReplicaSummary,
    ScalingFit, ScalingPredictor, ScalingTarget,
};
