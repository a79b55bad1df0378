//! Exact evaluation of a fixed softmax policy by dense linear algebra.
//!
//! State-action tables are flattened `[x][u]` over *all* states; rows of the
//! terminal state are zero. State tables likewise carry a zero entry for the
//! terminal state.

mod gradient;
mod projection;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, SoftmaxPolicy};

pub use gradient::{
    assemble_gradient, exact_gradient, finite_difference_components, finite_difference_gradient,
    gradient_of, objective, projected_gradient, GradientInputs, GradientReport, InnerProducts, DEFAULT_FD_STEP,
};
pub use projection::{project, projection_weights, weighted_inner, weighted_least_squares};

/// Tolerance for the moment and total-expectation identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Values per state and per state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateValues {
    pub state: Vec<f64>,
    pub sa: Vec<f64>,
}

/// Weighted occupancy with the positivity check attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedOccupancy {
    pub state: Vec<f64>,
    pub sa: Vec<f64>,
    /// Minimum over nonterminal (x, u).
    pub min: f64,
    /// All nonterminal entries strictly positive. When false the weighted
    /// inner product is not a metric and a reward baseline may help.
    pub positive: bool,
}

/// The Markov chain induced by a policy, restricted to nonterminal states.
pub(crate) struct PolicyChain<'a> {
    model: &'a MdpModel,
    // nonterminal states in order; position k <-> state nt[k]
    nt: Vec<usize>,
    // action probabilities, flattened [x][u]
    probs: Vec<f64>,
    // P_π over nonterminal states
    p: DMatrix<f64>,
}

impl<'a> PolicyChain<'a> {
    pub(crate) fn new(model: &'a MdpModel, policy: &SoftmaxPolicy) -> Result<Self> {
        if policy.dim() != SoftmaxPolicy::param_count(model) || policy.n_actions() != model.n_actions() {
            return Err(Error::contract("policy does not match the model"));
        }
        let na = model.n_actions();
        let nt: Vec<usize> = model.nonterminal_states().collect();
        let k = nt.len();
        let mut probs = vec![0.0; model.n_states() * na];
        for &x in &nt {
            let d = policy.action_distribution(x)?;
            probs[x * na..(x + 1) * na].copy_from_slice(&d);
        }
        let mut p = DMatrix::zeros(k, k);
        for (i, &x) in nt.iter().enumerate() {
            for u in 0..na {
                let pu = probs[x * na + u];
                for (j, &y) in nt.iter().enumerate() {
                    p[(i, j)] += pu * model.prob(x, u, y);
                }
            }
        }
        Ok(PolicyChain { model, nt, probs, p })
    }

    pub(crate) fn prob(&self, x: usize, u: usize) -> f64 {
        self.probs[x * self.model.n_actions() + u]
    }

    fn solve(&self, a: DMatrix<f64>, b: DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::NonProper(what));
        }
        let sol = lu.solve(&b).ok_or(Error::NonProper(what))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonProper(what));
        }
        Ok(sol)
    }

    fn identity_minus(&self, scale: f64, transpose: bool) -> DMatrix<f64> {
        let k = self.nt.len();
        let p = if transpose { self.p.transpose() } else { self.p.clone() };
        DMatrix::identity(k, k) - p * scale
    }

    fn scatter(&self, v: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.model.n_states()];
        for (k, &x) in self.nt.iter().enumerate() {
            out[x] = v[k];
        }
        out
    }

    fn gather(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.nt.len(), self.nt.iter().map(|&x| full[x]))
    }

    /// `Σ_y P(y | x, u) f(y)` for every (x, u).
    fn expect_next(&self, f: &[f64]) -> Vec<f64> {
        let m = self.model;
        let na = m.n_actions();
        let mut out = vec![0.0; m.n_states() * na];
        for &x in &self.nt {
            for u in 0..na {
                out[x * na + u] = m
                    .transition_row(x, u)
                    .iter()
                    .zip(f)
                    .map(|(p, v)| p * v)
                    .sum();
            }
        }
        out
    }

    /// Spreads a state table over actions: `sa(x, u) = state(x) π(u | x)`.
    fn times_policy(&self, state: &[f64]) -> Vec<f64> {
        let na = self.model.n_actions();
        let mut out = vec![0.0; self.model.n_states() * na];
        for &x in &self.nt {
            for u in 0..na {
                out[x * na + u] = state[x] * self.prob(x, u);
            }
        }
        out
    }
}

/// Expected return `J`: solves `(I - γ P_π) J = r` on nonterminal states,
/// then `J(x, u) = r(x) + γ Σ_y P(y|x,u) J(y)`.
pub fn solve_j(model: &MdpModel, policy: &SoftmaxPolicy) -> Result<StateValues> {
    let chain = PolicyChain::new(model, policy)?;
    solve_j_on(&chain)
}

fn solve_j_on(chain: &PolicyChain) -> Result<StateValues> {
    let m = chain.model;
    let g = m.gamma();
    let r = chain.gather(m.rewards());
    let j = chain.solve(chain.identity_minus(g, false), r, "expected-return")?;
    let state = chain.scatter(&j);
    let next = chain.expect_next(&state);
    let na = m.n_actions();
    let mut sa = vec![0.0; m.n_states() * na];
    for &x in &chain.nt {
        for u in 0..na {
            sa[x * na + u] = m.reward(x) + g * next[x * na + u];
        }
    }
    Ok(StateValues { state, sa })
}

/// Second moment `M` of the return from
/// `M(x, u) = r(x)^2 + 2γ r(x) Σ_y P(y|x,u) J(y) + γ^2 Σ_y P(y|x,u) M(y)`.
///
/// For `γ = 1` this is the familiar second-moment Bellman equation; the
/// `γ < 1` form is experimental.
pub fn solve_m(model: &MdpModel, policy: &SoftmaxPolicy, j: &StateValues) -> Result<StateValues> {
    let chain = PolicyChain::new(model, policy)?;
    solve_m_on(&chain, j)
}

fn solve_m_on(chain: &PolicyChain, j: &StateValues) -> Result<StateValues> {
    let m = chain.model;
    if j.state.len() != m.n_states() || j.sa.len() != m.n_states() * m.n_actions() {
        return Err(Error::contract("J table does not match the model"));
    }
    let g = m.gamma();
    let na = m.n_actions();
    let next_j = chain.expect_next(&j.state);
    // state-level right-hand side: r^2 + 2γ r Σ_u π(u|x) E[J(next) | x, u]
    let rhs = DVector::from_iterator(
        chain.nt.len(),
        chain.nt.iter().map(|&x| {
            let r = m.reward(x);
            let pj: f64 = (0..na).map(|u| chain.prob(x, u) * next_j[x * na + u]).sum();
            r * r + 2.0 * g * r * pj
        }),
    );
    let mv = chain.solve(chain.identity_minus(g * g, false), rhs, "second-moment")?;
    let state = chain.scatter(&mv);
    let next_m = chain.expect_next(&state);
    let mut sa = vec![0.0; m.n_states() * na];
    for &x in &chain.nt {
        let r = m.reward(x);
        for u in 0..na {
            let i = x * na + u;
            sa[i] = r * r + 2.0 * g * r * next_j[i] + g * g * next_m[i];
        }
    }
    Ok(StateValues { state, sa })
}

/// `V = M - J^2` elementwise.
pub fn variance_from_moments(j: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    if j.len() != m.len() {
        return Err(Error::contract(format!(
            "moment tables differ in length ({} vs {})",
            j.len(),
            m.len()
        )));
    }
    Ok(j.iter().zip(m).map(|(j, m)| m - j * j).collect())
}

/// Expected visit counts `q(x, u) = Σ_t P(x_t = x, u_t = u)`.
pub fn occupancy(model: &MdpModel, policy: &SoftmaxPolicy) -> Result<StateValues> {
    let chain = PolicyChain::new(model, policy)?;
    occupancy_on(&chain)
}

fn occupancy_on(chain: &PolicyChain) -> Result<StateValues> {
    let m = chain.model;
    let mut e0 = vec![0.0; m.n_states()];
    e0[m.initial()] = 1.0;
    let q = chain.solve(chain.identity_minus(1.0, true), chain.gather(&e0), "occupancy")?;
    let state = chain.scatter(&q);
    let sa = chain.times_policy(&state);
    Ok(StateValues { state, sa })
}

/// Reward-weighted occupancy
/// `q̃(x, u) = Σ_{t≥1} P(x_t = x, u_t = u) E[Σ_{s<t} r(x_s) | x_t = x]`,
/// computed as `(I - P_πᵀ)⁻¹ P_πᵀ R (I - P_πᵀ)⁻¹ e(x₀)`.
///
/// Only defined for undiscounted models.
pub fn weighted_occupancy(model: &MdpModel, policy: &SoftmaxPolicy) -> Result<WeightedOccupancy> {
    let chain = PolicyChain::new(model, policy)?;
    let q = occupancy_on(&chain)?;
    weighted_occupancy_on(&chain, &q)
}

fn weighted_occupancy_on(chain: &PolicyChain, q: &StateValues) -> Result<WeightedOccupancy> {
    let m = chain.model;
    if m.gamma() != 1.0 {
        return Err(Error::contract("weighted occupancy requires an undiscounted model"));
    }
    let rq: DVector<f64> = chain.gather(&q.state).component_mul(&chain.gather(m.rewards()));
    let rhs = chain.p.transpose() * rq;
    let qt = chain.solve(chain.identity_minus(1.0, true), rhs, "weighted-occupancy")?;
    let state = chain.scatter(&qt);
    let sa = chain.times_policy(&state);
    let na = m.n_actions();
    let min = chain
        .nt
        .iter()
        .flat_map(|&x| (0..na).map(move |u| x * na + u))
        .map(|i| sa[i])
        .fold(f64::INFINITY, f64::min);
    let positive = min > 0.0;
    if !positive {
        warn!("weighted occupancy not positive (min {min:e}); consider a reward baseline");
    }
    Ok(WeightedOccupancy {
        state,
        sa,
        min,
        positive,
    })
}

/// Everything the oracle knows about one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactEvaluation {
    pub mu: f64,
    pub j: StateValues,
    pub m: StateValues,
    pub v: StateValues,
    pub q: StateValues,
    /// Absent for discounted models.
    pub qtilde: Option<WeightedOccupancy>,
    /// `J(x₀) - μ V(x₀)`.
    pub eta: f64,
    pub initial: usize,
}

impl ExactEvaluation {
    pub fn j0(&self) -> f64 {
        self.j.state[self.initial]
    }

    pub fn m0(&self) -> f64 {
        self.m.state[self.initial]
    }

    pub fn v0(&self) -> f64 {
        self.v.state[self.initial]
    }

    pub fn qtilde(&self) -> Result<&WeightedOccupancy> {
        self.qtilde
            .as_ref()
            .ok_or_else(|| Error::contract("weighted occupancy requires an undiscounted model"))
    }
}

pub fn evaluate(model: &MdpModel, policy: &SoftmaxPolicy, mu: f64) -> Result<ExactEvaluation> {
    let chain = PolicyChain::new(model, policy)?;
    let j = solve_j_on(&chain)?;
    let m = solve_m_on(&chain, &j)?;
    let v = StateValues {
        state: variance_from_moments(&j.state, &m.state)?,
        sa: variance_from_moments(&j.sa, &m.sa)?,
    };
    let q = occupancy_on(&chain)?;
    let qtilde = if model.gamma() == 1.0 {
        Some(weighted_occupancy_on(&chain, &q)?)
    } else {
        None
    };
    let x0 = model.initial();
    let eta = j.state[x0] - mu * v.state[x0];
    Ok(ExactEvaluation {
        mu,
        j,
        m,
        v,
        q,
        qtilde,
        eta,
        initial: x0,
    })
}
