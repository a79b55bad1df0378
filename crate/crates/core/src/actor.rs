//! Policy-gradient estimate from one trajectory and the ascent step.

use log::info;
use serde::{Deserialize, Serialize};

use crate::critic::{CriticFixedPoint, CriticState};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{compatible_features, FeatureMap};
use crate::mdp::{discounted_return, MdpModel, SoftmaxPolicy, Trajectory};
use crate::montecarlo::{mean_statistic, Estimate};
use crate::oracle::exact_gradient;

/// Default bound on `‖θ‖_∞`.
pub const DEFAULT_THETA_MAX: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    #[default]
    Power,
}

/// Power-law step sizes `α_i = c_α / (i + 1 + n_α)^{e_α}` for the critic and
/// `β_i = c_β / (i + 1 + n_β)^{e_β}` for the actor.
///
/// The offsets `n_α, n_β ≥ 0` only shift where the decay starts. A positive
/// `n_β` keeps the actor from taking large steps while the critic is still
/// far from its fixed point.
///
/// With `1/2 < e_α < e_β ≤ 1` both sequences sum to infinity, their squares
/// are summable, and `β_i / α_i → 0`, so the critic runs on the faster
/// timescale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub c_alpha: f64,
    pub c_beta: f64,
    pub e_alpha: f64,
    pub e_beta: f64,
    pub offset_alpha: f64,
    pub offset_beta: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule {
            kind: ScheduleKind::Power,
            c_alpha: 0.5,
            c_beta: 1.0,
            e_alpha: 0.6,
            e_beta: 1.0,
            offset_alpha: 0.0,
            offset_beta: 100.0,
        }
    }
}

impl StepSchedule {
    pub fn alpha(&self, i: u64) -> f64 {
        self.c_alpha / ((i + 1) as f64 + self.offset_alpha).powf(self.e_alpha)
    }

    pub fn beta(&self, i: u64) -> f64 {
        self.c_beta / ((i + 1) as f64 + self.offset_beta).powf(self.e_beta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_alpha > 0.0 && self.c_beta > 0.0) {
            return Err(Error::InvalidConfig("step-size constants must be positive".into()));
        }
        if !(self.offset_alpha >= 0.0 && self.offset_beta >= 0.0) {
            return Err(Error::InvalidConfig("step-size offsets must be nonnegative".into()));
        }
        if !(0.5 < self.e_alpha && self.e_alpha < self.e_beta && self.e_beta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "exponents must satisfy 0.5 < e_alpha < e_beta <= 1 (got {} and {})",
                self.e_alpha, self.e_beta
            )));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single-trajectory estimate of `∇η`:
///
/// `Σ_t ψ_t [ φ_Jᵀw_J − μ ( φ_Mᵀw_M + 2 C_t φ_Jᵀw̃_J − 2 J0 φ_Jᵀw_J ) ]`
///
/// with `C_t = Σ_{s<t} r(x_s)` and all features at `(x_t, u_t)`. At the
/// critic's fixed point and with compatible features its expectation is
/// exactly `∇η_J − μ ∇η_V`.
pub fn actor_gradient_estimate(
    traj: &Trajectory,
    critic: &CriticState,
    map_j: &FeatureMap,
    map_m: &FeatureMap,
    policy: &SoftmaxPolicy,
    mu: f64,
) -> Result<Vec<f64>> {
    if critic.w_j.len() != map_j.dim()
        || critic.w_tilde_j.len() != map_j.dim()
        || critic.w_m.len() != map_m.dim()
    {
        return Err(Error::contract("critic weights do not match the feature maps"));
    }
    let ret = discounted_return(traj, 1.0);
    let mut grad = vec![0.0; policy.dim()];
    for (t, step) in traj.steps().iter().enumerate() {
        let probs = policy.action_distribution(step.state)?;
        let psi = policy.score_from_probs(step.state, step.action, &probs);
        let phi_j = map_j.phi_from_probs(policy, step.state, step.action, &probs);
        let phi_m = map_m.phi_from_probs(policy, step.state, step.action, &probs);
        let j_hat = dot(&phi_j, &critic.w_j);
        let m_hat = dot(&phi_m, &critic.w_m);
        let jt_hat = dot(&phi_j, &critic.w_tilde_j);
        let coeff = j_hat - mu * (m_hat + 2.0 * ret.prefix[t] * jt_hat - 2.0 * critic.j0 * j_hat);
        for (g, s) in grad.iter_mut().zip(&psi) {
            *g += s * coeff;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub theta: Vec<f64>,
    /// At least one component hit the `‖θ‖_∞` bound.
    pub clamped: bool,
}

/// `θ + β ĝ`, optionally clamped componentwise to `[-theta_max, theta_max]`.
pub fn actor_step(
    theta: &[f64],
    grad_estimate: &[f64],
    beta: f64,
    theta_max: Option<f64>,
) -> Result<StepOutcome> {
    if !(beta > 0.0) {
        return Err(Error::contract(format!("actor step {beta} must be positive")));
    }
    if theta.len() != grad_estimate.len() {
        return Err(Error::contract("gradient and parameter dimensions differ"));
    }
    if grad_estimate.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(grad_estimate.to_vec()));
    }
    let mut clamped = false;
    let next = theta
        .iter()
        .zip(grad_estimate)
        .map(|(t, g)| {
            let v = t + beta * g;
            match theta_max {
                Some(b) if v.abs() > b => {
                    clamped = true;
                    b.copysign(v)
                }
                _ => v,
            }
        })
        .collect();
    if clamped {
        info!("theta clamped to the box of half-width {:?}", theta_max);
    }
    Ok(StepOutcome {
        theta: next,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub mu: f64,
    pub episodes: u64,
    pub mean: Vec<Estimate>,
    pub exact: Vec<f64>,
    pub z: Vec<f64>,
    pub pass: bool,
}

/// Averages the single-trajectory estimate over `n_episodes` fresh episodes
/// with the critic pinned at its exact fixed point and compares each
/// component with the oracle gradient. Passes when every `|z| < 3`.
pub fn unbiasedness_check(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    mu: f64,
    n_episodes: u64,
    seed: u64,
    exec: Execution,
    max_steps: usize,
) -> Result<UnbiasednessReport> {
    let map = compatible_features(policy);
    let critic = CriticFixedPoint::compute(model, policy, &map, &map)?.to_state();
    let exact = exact_gradient(model, policy, mu)?.grad_eta;
    let mean = mean_statistic(model, policy, n_episodes, seed, exec, max_steps, |traj| {
        actor_gradient_estimate(traj, &critic, &map, &map, policy, mu)
    })?;
    let z: Vec<f64> = mean.iter().zip(&exact).map(|(e, g)| e.z(*g)).collect();
    let pass = z.iter().all(|v| v.abs() < 3.0);
    Ok(UnbiasednessReport {
        mu,
        episodes: n_episodes,
        mean,
        exact,
        z,
        pass,
    })
}
