//! Variance-penalized episodic actor-critic for finite stochastic shortest
//! path MDPs.
//!
//! The learning side ([`critic`], [`actor`], [`harness`]) only ever sees
//! sampled trajectories. The [`oracle`] module computes the same quantities
//! exactly by dense linear algebra on the finite model, and is used for
//! diagnostics and for verifying every estimator the learner relies on.
//!
//! Monte Carlo loops that are embarrassingly parallel go through [`exec`],
//! which uses rayon when the `parallel` feature is enabled and falls back to
//! a plain sequential loop otherwise. Both paths produce bit-identical
//! results.

pub mod actor;
pub mod critic;
pub mod error;
pub mod exec;
pub mod features;
pub mod harness;
pub mod mdp;
pub mod models;
pub mod montecarlo;
pub mod oracle;

pub use actor::{
    actor_gradient_estimate, actor_step, unbiasedness_check, ScheduleKind, StepOutcome, StepSchedule,
    UnbiasednessReport,
};
pub use critic::{CriticFixedPoint, CriticIncrement, CriticState};
pub use error::{Error, Result};
pub use exec::Execution;
pub use features::{FeatureKind, FeatureMap, RankReport};
pub use mdp::{
    discounted_return, simulate_episode, EpisodeSampler, MdpModel, Returns, SoftmaxPolicy, Step,
    Trajectory,
};
pub use oracle::{ExactEvaluation, GradientReport};
