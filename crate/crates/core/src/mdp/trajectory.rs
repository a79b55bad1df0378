use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, SoftmaxPolicy};

/// Default bound on episode length before a policy is declared non-proper.
pub const DEFAULT_MAX_EPISODE_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// One episode up to (excluding) the first visit to the terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::contract("trajectory must contain at least one step"));
        }
        Ok(Trajectory { steps })
    }

    /// Builds a trajectory from `(state, action)` pairs, filling rewards
    /// from the model.
    pub fn from_pairs(model: &MdpModel, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.iter().any(|&(x, _)| model.is_terminal(x)) {
            return Err(Error::contract("trajectory visits the terminal state"));
        }
        Self::new(
            pairs
                .iter()
                .map(|&(state, action)| Step {
                    state,
                    action,
                    reward: model.reward(state),
                })
                .collect(),
        )
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// First hitting time of the terminal state.
    pub fn tau(&self) -> usize {
        self.steps.len()
    }
}

/// Per-step return sums of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Returns {
    /// `B = Σ_k γ^k r(x_k)`.
    pub total: f64,
    /// `suffix[t] = Σ_{s ≥ t} γ^{s-t} r(x_s)`.
    pub suffix: Vec<f64>,
    /// `prefix[t] = Σ_{s < t} r(x_s)` (undiscounted).
    pub prefix: Vec<f64>,
}

pub fn discounted_return(traj: &Trajectory, gamma: f64) -> Returns {
    let tau = traj.tau();
    let mut suffix = vec![0.0; tau];
    let mut acc = 0.0;
    for t in (0..tau).rev() {
        acc = traj.steps[t].reward + gamma * acc;
        suffix[t] = acc;
    }
    let mut prefix = vec![0.0; tau];
    let mut run = 0.0;
    for t in 0..tau {
        prefix[t] = run;
        run += traj.steps[t].reward;
    }
    Returns {
        total: suffix[0],
        suffix,
        prefix,
    }
}

/// Precomputed sampling tables for a fixed model and policy.
///
/// Building this once and reusing it across many episodes avoids
/// recomputing the softmax at every step.
#[derive(Debug, Clone)]
pub struct EpisodeSampler<'a> {
    model: &'a MdpModel,
    actions: Vec<Option<WeightedIndex<f64>>>,
    transitions: Vec<Option<WeightedIndex<f64>>>,
    max_steps: usize,
}

impl<'a> EpisodeSampler<'a> {
    pub fn new(model: &'a MdpModel, policy: &SoftmaxPolicy, max_steps: usize) -> Result<Self> {
        let ns = model.n_states();
        let na = model.n_actions();
        let mut actions = vec![None; ns];
        let mut transitions = vec![None; ns * na];
        for x in model.nonterminal_states() {
            let probs = policy.action_distribution(x)?;
            actions[x] = Some(WeightedIndex::new(&probs).map_err(|e| {
                Error::contract(format!("action distribution at state {x}: {e}"))
            })?);
            for u in 0..na {
                transitions[x * na + u] = Some(
                    WeightedIndex::new(model.transition_row(x, u)).map_err(|e| {
                        Error::InvalidModel(format!(
                            "transition row ({}, {}): {e}",
                            model.state_names()[x],
                            model.action_names()[u]
                        ))
                    })?,
                );
            }
        }
        Ok(EpisodeSampler {
            model,
            actions,
            transitions,
            max_steps,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Trajectory> {
        let na = self.model.n_actions();
        let mut steps = Vec::new();
        let mut x = self.model.initial();
        while !self.model.is_terminal(x) {
            if steps.len() == self.max_steps {
                return Err(Error::EpisodeTooLong {
                    max_steps: self.max_steps,
                });
            }
            let u = self.actions[x].as_ref().expect("nonterminal").sample(rng);
            steps.push(Step {
                state: x,
                action: u,
                reward: self.model.reward(x),
            });
            x = self.transitions[x * na + u]
                .as_ref()
                .expect("nonterminal")
                .sample(rng);
        }
        Trajectory::new(steps)
    }
}

/// Samples one episode from the initial state until absorption.
pub fn simulate_episode<R: Rng + ?Sized>(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    rng: &mut R,
    max_steps: usize,
) -> Result<Trajectory> {
    EpisodeSampler::new(model, policy, max_steps)?.sample(rng)
}
