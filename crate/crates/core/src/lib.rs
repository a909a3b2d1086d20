//! Hopfield networks in three operating modes (associative memory,
//! constraint optimization, self-optimization with Hebbian learning) plus
//! the statistics that score learning outcomes for novelty and
//! appropriateness.

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod hebbian;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod so;
pub mod tsp;
pub mod weights;

pub use dynamics::{async_step, energy, is_fixed_point, local_field, relax, relax_with, NodeOrder, NodeSchedule, Relaxation};
pub use error::{Error, Result};
pub use experiment::{
    derive_seed, effort_tradeoff, export, load_sweep, log_grid, read_plan, run_sweep, Artifact, CreativityScores, EffortReport, SweepDataset,
    SweepPlan,
};
pub use hebbian::{hebbian_update, HebbianCounts};
pub use metrics::{
    above_chance, aggregate_scores, appropriateness_score, classify_regime, convergence_score, fit_baseline,
    novelty_of_energy, value_of_energy, value_of_energy_with, AppropriatenessRule, BaselineFit, Convergence, EnergySample, Regime, RegimeEvidence,
    RegimeRule, ValueConvention,
};
pub use network::{BiasVector, Fingerprint, StateVector, WeightMatrix, WeightRole};
pub use rng::RngStream;
pub use so::{attractor_set, dominant_attractor, run_so, run_so_with, Engine, SoConfig, SoResult, SoRunRecord, Stage};
pub use tsp::{decode_tour, shortest_tour_exhaustive, solve_by_restarts, RestartSummary, tour_length, tsp_weights, InvalidTour, Tour, TspCoefficients, TspEncoding, TspInstance};
pub use weights::{hebbian_store, modular_from_spec, modular_weights, recall_rate, ModularSpec, PatternSet, RecallReport};
