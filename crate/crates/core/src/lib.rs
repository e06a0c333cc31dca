#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN
//! Multi-stage strategic classification with abstaining classifiers.
//!
//! An agent climbs a ladder of threshold classifiers by exerting improvement
//! (raises its true attribute) or gaming (raises only the observed feature)
//! effort. Each classifier promotes, demotes or abstains, and attributes
//! depreciate between rounds. The crate computes myopic best responses,
//! designs incentive-compatible ladders, simulates long runs and solves the
//! induced Markov chains.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common `f64` instantiation.

pub mod best_response;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod rl;
pub mod scalar;
pub mod stationary;

pub use best_response::{
    best_response, best_response_magnitude, check_prop2, evaluate_g, find_effort_window,
    find_effort_window_with, instantaneous_utility, select_direction, ActionKind, ClassWindows,
    DirectionChoice, EffortWindow, ResponseRegime, Restriction, WindowSearch,
};
pub use design::{
    check_incremental_thresholding, check_windows, design_levels, incentive_ceiling, Condition,
    ConditionReport, LadderDesign, Slack,
};
pub use dynamics::{
    run_experiment, run_experiment_with, summarize, summarize_range, AgentState, Averaging,
    ExperimentSummary, MetricSummary, PolicyKind, Simulator, StepRecord, TrajectoryMetrics,
};
pub use error::{Error, Result};
pub use model::{
    abstention, decision_probabilities, sample_decision, sigmoid, Abstention, AbstentionKind,
    BoundaryClass, Ladder, LevelSpec, ModelParams, Outcome, TransitionProbs,
};
pub use rl::{
    build_discrete_env, evaluate_policy, policy_value, sarsa_train, train_best_of_seeds,
    value_iteration_oracle, ActionMask, DiscreteEnv, Evaluation, FiniteMdp, RlConfig,
    TabularPolicy, ValueSolution,
};
pub use scalar::Scalar;
pub use stationary::{
    build_ng_chain, build_ni_chain, ergodic_utility, long_term_utilities, ni_peak_level,
    stationary_distribution, theorem_bounds, total_variation, verify_detailed_balance,
    BalanceReport, ChainKind, ChainModel, ChainState, TheoremReport,
};

pub type ModelParams64 = ModelParams<f64>;
pub type Abstention64 = Abstention<f64>;
pub type Ladder64 = Ladder<f64>;
pub type EffortWindow64 = EffortWindow<f64>;
pub type ClassWindows64 = ClassWindows<f64>;
pub type LadderDesign64 = LadderDesign<f64>;
pub type Simulator64 = Simulator<f64>;
