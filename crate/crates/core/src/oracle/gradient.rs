use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, SoftmaxPolicy};
use crate::features::FeatureMap;
use crate::oracle::{
    evaluate, project, projection_weights, solve_j, solve_m, ExactEvaluation, PolicyChain,
};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// The three score inner products the variance gradient is built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerProducts {
    /// `⟨ψ_j, M⟩_q`
    pub psi_m_q: Vec<f64>,
    /// `⟨ψ_j, J⟩_q̃`
    pub psi_j_qtilde: Vec<f64>,
    /// `⟨ψ_j, J⟩_q`
    pub psi_j_q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub mu: f64,
    pub grad_j: Vec<f64>,
    pub grad_v: Vec<f64>,
    pub grad_eta: Vec<f64>,
    pub decomposition: InnerProducts,
}

impl GradientReport {
    pub fn grad_eta_norm(&self) -> f64 {
        self.grad_eta.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Tables plugged into the gradient formula. Replacing `j_q`, `m_q` and
/// `j_qtilde` by their projections onto a compatible feature space must not
/// change the result.
#[derive(Debug, Clone)]
pub struct GradientInputs<'a> {
    /// State-action values paired with `q` in `⟨ψ, J⟩_q`.
    pub j_q: &'a [f64],
    /// State-action values paired with `q` in `⟨ψ, M⟩_q`.
    pub m_q: &'a [f64],
    /// State-action values paired with `q̃` in `⟨ψ, J⟩_q̃`.
    pub j_qtilde: &'a [f64],
    pub q: &'a [f64],
    pub qtilde: &'a [f64],
    /// `J(x₀)`.
    pub j0: f64,
}

/// `∇η_J = ⟨ψ, J⟩_q`, `∇η_V = ⟨ψ, M⟩_q + 2⟨ψ, J⟩_q̃ - 2 J(x₀) ⟨ψ, J⟩_q`
/// and `∇η = ∇η_J - μ ∇η_V`.
pub fn assemble_gradient(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    mu: f64,
    inputs: &GradientInputs,
) -> Result<GradientReport> {
    let chain = PolicyChain::new(model, policy)?;
    let na = model.n_actions();
    let size = model.n_states() * na;
    for t in [inputs.j_q, inputs.m_q, inputs.j_qtilde, inputs.q, inputs.qtilde] {
        if t.len() != size {
            return Err(Error::contract("gradient input table has the wrong size"));
        }
    }
    let n = policy.dim();
    let mut psi_m_q = vec![0.0; n];
    let mut psi_j_qtilde = vec![0.0; n];
    let mut psi_j_q = vec![0.0; n];
    for &x in &chain.nt {
        let probs = &chain.probs[x * na..(x + 1) * na];
        for u in 0..na {
            let i = x * na + u;
            let psi = policy.score_from_probs(x, u, probs);
            for (j, s) in psi.iter().enumerate() {
                psi_m_q[j] += inputs.q[i] * s * inputs.m_q[i];
                psi_j_qtilde[j] += inputs.qtilde[i] * s * inputs.j_qtilde[i];
                psi_j_q[j] += inputs.q[i] * s * inputs.j_q[i];
            }
        }
    }
    let grad_j = psi_j_q.clone();
    let grad_v: Vec<f64> = (0..n)
        .map(|j| psi_m_q[j] + 2.0 * psi_j_qtilde[j] - 2.0 * inputs.j0 * psi_j_q[j])
        .collect();
    let grad_eta = grad_j.iter().zip(&grad_v).map(|(gj, gv)| gj - mu * gv).collect();
    Ok(GradientReport {
        mu,
        grad_j,
        grad_v,
        grad_eta,
        decomposition: InnerProducts {
            psi_m_q,
            psi_j_qtilde,
            psi_j_q,
        },
    })
}

/// Analytic gradient of `η = J(x₀) - μ V(x₀)` from the oracle tables.
/// Undiscounted models only.
pub fn exact_gradient(model: &MdpModel, policy: &SoftmaxPolicy, mu: f64) -> Result<GradientReport> {
    let ev = evaluate(model, policy, mu)?;
    gradient_of(model, policy, &ev)
}

/// Same as [`exact_gradient`] for an evaluation already at hand.
pub fn gradient_of(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    ev: &ExactEvaluation,
) -> Result<GradientReport> {
    let qt = ev.qtilde()?;
    assemble_gradient(
        model,
        policy,
        ev.mu,
        &GradientInputs {
            j_q: &ev.j.sa,
            m_q: &ev.m.sa,
            j_qtilde: &ev.j.sa,
            q: &ev.q.sa,
            qtilde: &qt.sa,
            j0: ev.j0(),
        },
    )
}

/// Gradient assembled from the projections `Π_J J`, `Π_M M` (under `q`) and
/// `Π̃_J J` (under `q̃`) in place of the exact tables. With compatible
/// features the result equals the exact gradient.
pub fn projected_gradient(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    map_j: &FeatureMap,
    map_m: &FeatureMap,
    ev: &ExactEvaluation,
) -> Result<GradientReport> {
    let qt = ev.qtilde()?;
    let wj = projection_weights(model, policy, map_j, &ev.j.sa, &ev.q.sa)?;
    let wm = projection_weights(model, policy, map_m, &ev.m.sa, &ev.q.sa)?;
    let wt = projection_weights(model, policy, map_j, &ev.j.sa, &qt.sa)?;
    let j_q = project(model, policy, map_j, &wj)?;
    let m_q = project(model, policy, map_m, &wm)?;
    let j_qtilde = project(model, policy, map_j, &wt)?;
    assemble_gradient(
        model,
        policy,
        ev.mu,
        &GradientInputs {
            j_q: &j_q,
            m_q: &m_q,
            j_qtilde: &j_qtilde,
            q: &ev.q.sa,
            qtilde: &qt.sa,
            j0: ev.j0(),
        },
    )
}

/// `(J(x₀), V(x₀))` under `policy`.
pub fn objective(model: &MdpModel, policy: &SoftmaxPolicy) -> Result<(f64, f64)> {
    let j = solve_j(model, policy)?;
    let m = solve_m(model, policy, &j)?;
    let x0 = model.initial();
    let jv = j.state[x0];
    Ok((jv, m.state[x0] - jv * jv))
}

/// Central differences of `η_J` and `η_V` with step `h`.
pub fn finite_difference_components(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(h > 0.0) {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let theta = policy.theta();
    let n = theta.len();
    let mut gj = vec![0.0; n];
    let mut gv = vec![0.0; n];
    for k in 0..n {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[k] += h;
        minus[k] -= h;
        let (jp, vp) = objective(model, &policy.with_theta(plus)?)?;
        let (jm, vm) = objective(model, &policy.with_theta(minus)?)?;
        gj[k] = (jp - jm) / (2.0 * h);
        gv[k] = (vp - vm) / (2.0 * h);
    }
    Ok((gj, gv))
}

/// Central-difference gradient of `η` through the linear solves.
pub fn finite_difference_gradient(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    mu: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let (gj, gv) = finite_difference_components(model, policy, h)?;
    Ok(gj.iter().zip(&gv).map(|(a, b)| a - mu * b).collect())
}
