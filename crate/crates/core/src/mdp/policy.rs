use crate::error::{Error, Result};
use crate::mdp::MdpModel;

/// Tabular softmax policy with one reference action per state.
///
/// The reference action's logit is pinned at zero, so the parameter vector
/// has one entry per (nonterminal state, non-reference action) pair. With
/// free logits for every action the score vectors of each state would sum
/// to zero under the policy and the compatible feature matrix would lose
/// rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    theta: Vec<f64>,
    // parameter index for each (x, u), flattened [x][u]
    index: Vec<Option<usize>>,
    reference: Vec<usize>,
    n_actions: usize,
    terminal: usize,
}

impl SoftmaxPolicy {
    /// Number of parameters for `model` with one reference action per
    /// nonterminal state.
    pub fn param_count(model: &MdpModel) -> usize {
        model.n_nonterminal() * (model.n_actions() - 1)
    }

    /// Policy with the last action of every state as reference.
    pub fn new(model: &MdpModel, theta: Vec<f64>) -> Result<Self> {
        let refs = vec![model.n_actions() - 1; model.n_states()];
        Self::with_reference_actions(model, refs, theta)
    }

    pub fn zeros(model: &MdpModel) -> Self {
        Self::new(model, vec![0.0; Self::param_count(model)])
            .expect("zero vector has the right dimension")
    }

    /// `reference[x]` is the action whose logit is pinned to zero in state
    /// `x`. Entries for the terminal state are ignored.
    pub fn with_reference_actions(
        model: &MdpModel,
        reference: Vec<usize>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        let ns = model.n_states();
        let na = model.n_actions();
        if reference.len() != ns {
            return Err(Error::contract(format!(
                "expected {ns} reference actions, got {}",
                reference.len()
            )));
        }
        let mut index = vec![None; ns * na];
        let mut next = 0;
        for x in model.nonterminal_states() {
            if reference[x] >= na {
                return Err(Error::contract(format!(
                    "reference action {} out of range",
                    reference[x]
                )));
            }
            for u in 0..na {
                if u != reference[x] {
                    index[x * na + u] = Some(next);
                    next += 1;
                }
            }
        }
        if theta.len() != next {
            return Err(Error::contract(format!(
                "theta has {} entries, policy needs {next}",
                theta.len()
            )));
        }
        Ok(SoftmaxPolicy {
            theta,
            index,
            reference,
            n_actions: na,
            terminal: model.terminal(),
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn is_terminal(&self, x: usize) -> bool {
        x == self.terminal
    }

    pub fn reference_action(&self, x: usize) -> usize {
        self.reference[x]
    }

    /// Same layout, new parameters.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return Err(Error::contract(format!(
                "theta has {} entries, policy needs {}",
                theta.len(),
                self.theta.len()
            )));
        }
        Ok(SoftmaxPolicy {
            theta,
            ..self.clone()
        })
    }

    /// Parameter index of `(x, u)`, `None` for reference actions and the
    /// terminal state.
    pub fn param_index(&self, x: usize, u: usize) -> Option<usize> {
        self.index[x * self.n_actions + u]
    }

    fn check_nonterminal(&self, x: usize) -> Result<()> {
        if x == self.terminal {
            return Err(Error::contract("policy queried at the terminal state"));
        }
        if x * self.n_actions >= self.index.len() {
            return Err(Error::contract(format!("state {x} out of range")));
        }
        Ok(())
    }

    fn logit(&self, x: usize, u: usize) -> f64 {
        self.param_index(x, u).map_or(0.0, |j| self.theta[j])
    }

    /// `π_θ(· | x)`.
    pub fn action_distribution(&self, x: usize) -> Result<Vec<f64>> {
        self.check_nonterminal(x)?;
        let logits: Vec<f64> = (0..self.n_actions).map(|u| self.logit(x, u)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        Ok(probs)
    }

    /// `∇_θ log π_θ(u | x)`. Only the components belonging to state `x` are
    /// nonzero: `1{u = u'} - π(u' | x)` for each non-reference `u'`.
    pub fn score(&self, x: usize, u: usize) -> Result<Vec<f64>> {
        let probs = self.action_distribution(x)?;
        if u >= self.n_actions {
            return Err(Error::contract(format!("action {u} out of range")));
        }
        Ok(self.score_from_probs(x, u, &probs))
    }

    pub(crate) fn score_from_probs(&self, x: usize, u: usize, probs: &[f64]) -> Vec<f64> {
        let mut psi = vec![0.0; self.theta.len()];
        for (v, &p) in probs.iter().enumerate() {
            if let Some(j) = self.param_index(x, v) {
                psi[j] = if v == u { 1.0 - p } else { -p };
            }
        }
        psi
    }
}
