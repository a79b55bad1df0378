//! Episodic MDP model, softmax policy and episode simulation.

mod file;
mod model;
mod policy;
mod trajectory;

pub use file::{load_model, parse_model, ModelFile, StateEntry, TransitionEntry, FILE_ROW_SUM_TOL};
pub use model::{validate_model, MdpModel, ValidationReport, ROW_SUM_TOL};
pub use policy::SoftmaxPolicy;
pub use trajectory::{
    discounted_return, simulate_episode, EpisodeSampler, Returns, Step, Trajectory,
    DEFAULT_MAX_EPISODE_STEPS,
};
