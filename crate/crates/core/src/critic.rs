//! Episodic Monte Carlo critic.
//!
//! After every episode the critic moves four estimates along the sampled
//! least-squares gradient:
//!
//! * `w_J`: fit of `φ_Jᵀ w_J` to the return-to-go `G_t` under visit counts,
//! * `w_M`: fit of `φ_Mᵀ w_M` to `G_t²` under visit counts,
//! * `w̃_J`: fit of `φ_Jᵀ w̃_J` to `G_t`, each step weighted by the reward
//!   collected before it (`C_t = Σ_{s<t} r(x_s)`),
//! * `J0`: running estimate of the expected return from the initial state.
//!
//! Residuals use the current weights. Returns are undiscounted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::{discounted_return, MdpModel, SoftmaxPolicy, Trajectory};
use crate::oracle::{evaluate, projection_weights, ExactEvaluation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticState {
    pub w_j: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_tilde_j: Vec<f64>,
    pub j0: f64,
    /// Number of updates applied so far.
    pub episode: u64,
}

/// Unscaled per-episode update direction (multiply by `α` to get the step).
#[derive(Debug, Clone, PartialEq)]
pub struct CriticIncrement {
    pub w_j: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_tilde_j: Vec<f64>,
    pub j0: f64,
}

impl CriticIncrement {
    /// `[w_j, w_m, w_tilde_j, j0]` concatenated.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w_j.len() + self.w_m.len() + self.w_tilde_j.len() + 1);
        v.extend_from_slice(&self.w_j);
        v.extend_from_slice(&self.w_m);
        v.extend_from_slice(&self.w_tilde_j);
        v.push(self.j0);
        v
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

impl CriticState {
    pub fn zeros(dim_j: usize, dim_m: usize) -> Self {
        CriticState {
            w_j: vec![0.0; dim_j],
            w_m: vec![0.0; dim_m],
            w_tilde_j: vec![0.0; dim_j],
            j0: 0.0,
            episode: 0,
        }
    }

    fn check_dims(&self, map_j: &FeatureMap, map_m: &FeatureMap) -> Result<()> {
        if self.w_j.len() != map_j.dim()
            || self.w_tilde_j.len() != map_j.dim()
            || self.w_m.len() != map_m.dim()
        {
            return Err(Error::contract(format!(
                "critic weights ({}, {}, {}) do not match feature dimensions ({}, {})",
                self.w_j.len(),
                self.w_m.len(),
                self.w_tilde_j.len(),
                map_j.dim(),
                map_m.dim()
            )));
        }
        Ok(())
    }

    /// Sampled update direction for one terminated trajectory.
    pub fn increment(
        &self,
        traj: &Trajectory,
        map_j: &FeatureMap,
        map_m: &FeatureMap,
        policy: &SoftmaxPolicy,
    ) -> Result<CriticIncrement> {
        self.check_dims(map_j, map_m)?;
        let ret = discounted_return(traj, 1.0);
        let mut inc = CriticIncrement {
            w_j: vec![0.0; self.w_j.len()],
            w_m: vec![0.0; self.w_m.len()],
            w_tilde_j: vec![0.0; self.w_tilde_j.len()],
            j0: ret.total - self.j0,
        };
        for (t, step) in traj.steps().iter().enumerate() {
            let probs = policy.action_distribution(step.state)?;
            let phi_j = map_j.phi_from_probs(policy, step.state, step.action, &probs);
            let phi_m = map_m.phi_from_probs(policy, step.state, step.action, &probs);
            let g = ret.suffix[t];
            axpy(&mut inc.w_j, g - dot(&self.w_j, &phi_j), &phi_j);
            axpy(&mut inc.w_m, g * g - dot(&self.w_m, &phi_m), &phi_m);
            // C_0 = 0, so the t = 0 term vanishes
            let c = ret.prefix[t];
            if c != 0.0 {
                axpy(&mut inc.w_tilde_j, c * (g - dot(&self.w_tilde_j, &phi_j)), &phi_j);
            }
        }
        Ok(inc)
    }

    /// One episodic update with step size `alpha`.
    pub fn update(
        &self,
        traj: &Trajectory,
        map_j: &FeatureMap,
        map_m: &FeatureMap,
        policy: &SoftmaxPolicy,
        alpha: f64,
    ) -> Result<CriticState> {
        if !(alpha > 0.0) {
            return Err(Error::contract(format!("critic step {alpha} must be positive")));
        }
        let inc = self.increment(traj, map_j, map_m, policy)?;
        let mut next = self.clone();
        axpy(&mut next.w_j, alpha, &inc.w_j);
        axpy(&mut next.w_m, alpha, &inc.w_m);
        axpy(&mut next.w_tilde_j, alpha, &inc.w_tilde_j);
        next.j0 += alpha * inc.j0;
        next.episode += 1;
        next.check_finite(alpha)?;
        Ok(next)
    }

    fn check_finite(&self, alpha: f64) -> Result<()> {
        let parts: [(&'static str, &[f64]); 4] = [
            ("w_J", &self.w_j),
            ("w_M", &self.w_m),
            ("w~_J", &self.w_tilde_j),
            ("J0", std::slice::from_ref(&self.j0)),
        ];
        for (what, v) in parts {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence {
                    episode: self.episode,
                    what,
                    step: alpha,
                });
            }
        }
        Ok(())
    }

    /// Max-norm distance to the critic's fixed point.
    pub fn fixed_point_gap(&self, fp: &CriticFixedPoint) -> f64 {
        let pairs = [
            (&self.w_j, &fp.w_j),
            (&self.w_m, &fp.w_m),
            (&self.w_tilde_j, &fp.w_tilde_j),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold((self.j0 - fp.j0).abs(), f64::max)
    }
}

/// Stable point of the critic for a frozen policy: the weighted projections
/// of `J` (under `q` and `q̃`) and `M` (under `q`) onto the feature spaces,
/// and `J(x₀)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticFixedPoint {
    pub w_j: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_tilde_j: Vec<f64>,
    pub j0: f64,
}

impl CriticFixedPoint {
    pub fn compute(
        model: &MdpModel,
        policy: &SoftmaxPolicy,
        map_j: &FeatureMap,
        map_m: &FeatureMap,
    ) -> Result<Self> {
        let ev = evaluate(model, policy, 0.0)?;
        Self::from_evaluation(model, policy, map_j, map_m, &ev)
    }

    pub fn from_evaluation(
        model: &MdpModel,
        policy: &SoftmaxPolicy,
        map_j: &FeatureMap,
        map_m: &FeatureMap,
        ev: &ExactEvaluation,
    ) -> Result<Self> {
        let qt = ev.qtilde()?;
        Ok(CriticFixedPoint {
            w_j: projection_weights(model, policy, map_j, &ev.j.sa, &ev.q.sa)?,
            w_m: projection_weights(model, policy, map_m, &ev.m.sa, &ev.q.sa)?,
            w_tilde_j: projection_weights(model, policy, map_j, &ev.j.sa, &qt.sa)?,
            j0: ev.j0(),
        })
    }

    pub fn to_state(&self) -> CriticState {
        CriticState {
            w_j: self.w_j.clone(),
            w_m: self.w_m.clone(),
            w_tilde_j: self.w_tilde_j.clone(),
            j0: self.j0,
            episode: 0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.w_j
            .iter()
            .chain(&self.w_m)
            .chain(&self.w_tilde_j)
            .fold(self.j0.abs(), |m, v| m.max(v.abs()))
    }
}

/// Expected per-episode increment at a frozen policy, computed exactly:
/// minus the gradient of the three weighted least-squares objectives and
/// `J(x₀) - J0`.
pub fn expected_increment(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    map_j: &FeatureMap,
    map_m: &FeatureMap,
    state: &CriticState,
) -> Result<CriticIncrement> {
    state.check_dims(map_j, map_m)?;
    let ev = evaluate(model, policy, 0.0)?;
    let qt = ev.qtilde()?;
    let na = model.n_actions();
    let mut inc = CriticIncrement {
        w_j: vec![0.0; map_j.dim()],
        w_m: vec![0.0; map_m.dim()],
        w_tilde_j: vec![0.0; map_j.dim()],
        j0: ev.j0() - state.j0,
    };
    for x in model.nonterminal_states() {
        for u in 0..na {
            let i = x * na + u;
            let phi_j = map_j.phi(policy, x, u)?;
            let phi_m = map_m.phi(policy, x, u)?;
            axpy(&mut inc.w_j, ev.q.sa[i] * (ev.j.sa[i] - dot(&state.w_j, &phi_j)), &phi_j);
            axpy(&mut inc.w_m, ev.q.sa[i] * (ev.m.sa[i] - dot(&state.w_m, &phi_m)), &phi_m);
            axpy(
                &mut inc.w_tilde_j,
                qt.sa[i] * (ev.j.sa[i] - dot(&state.w_tilde_j, &phi_j)),
                &phi_j,
            );
        }
    }
    Ok(inc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::compatible_features;
    use crate::models::{self, GEO_CONT, GEO_STOP};

    fn geo_setup() -> (MdpModel, SoftmaxPolicy, FeatureMap) {
        let m = models::geo(0.9);
        let pi = SoftmaxPolicy::zeros(&m);
        let map = compatible_features(&pi);
        (m, pi, map)
    }

    #[test]
    fn hand_computed_geo_update() {
        let (m, pi, map) = geo_setup();
        let traj = Trajectory::from_pairs(&m, &[(0, GEO_CONT), (0, GEO_STOP)]).unwrap();
        let next = CriticState::zeros(1, 1).update(&traj, &map, &map, &pi, 0.1).unwrap();
        // G = (2, 1), ψ = (0.5, -0.5), C_1 = 1:
        // w_J = 0.1 (2 * 0.5 + 1 * -0.5), w_M = 0.1 (4 * 0.5 + 1 * -0.5)
        assert!((next.w_j[0] - 0.05).abs() < 1e-15);
        assert!((next.w_m[0] - 0.15).abs() < 1e-15);
        assert!((next.w_tilde_j[0] + 0.05).abs() < 1e-15);
        assert!((next.j0 - 0.2).abs() < 1e-15);
        assert_eq!(next.episode, 1);
    }

    #[test]
    fn zero_rewards_leave_zero_state_unchanged() {
        let base = models::geo(0.9);
        let m = MdpModel::new(
            base.state_names().to_vec(),
            base.action_names().to_vec(),
            0,
            1,
            vec![0.0, 0.0],
            vec![vec![vec![0.9, 0.1], vec![0.0, 1.0]], vec![]],
            1.0,
        )
        .unwrap();
        let pi = SoftmaxPolicy::zeros(&m);
        let map = compatible_features(&pi);
        let traj = Trajectory::from_pairs(&m, &[(0, GEO_CONT), (0, GEO_CONT), (0, GEO_STOP)]).unwrap();
        let s0 = CriticState::zeros(1, 1);
        let s1 = s0.update(&traj, &map, &map, &pi, 0.5).unwrap();
        assert_eq!(s1.w_j, s0.w_j);
        assert_eq!(s1.w_m, s0.w_m);
        assert_eq!(s1.w_tilde_j, s0.w_tilde_j);
        assert_eq!(s1.j0, s0.j0);
    }

    #[test]
    fn terminal_step_contributes_nothing() {
        // φ(x*, u) = 0 and r(x*) = 0, so a t = τ term adds zero
        let (m, pi, map) = geo_setup();
        for u in 0..m.n_actions() {
            let phi = map.phi(&pi, m.terminal(), u).unwrap();
            assert!(phi.iter().all(|&v| v == 0.0));
        }
        assert_eq!(m.reward(m.terminal()), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (m, pi, map) = geo_setup();
        let traj = Trajectory::from_pairs(&m, &[(0, GEO_STOP)]).unwrap();
        let err = CriticState::zeros(2, 1).update(&traj, &map, &map, &pi, 0.1);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn divergence_detected() {
        let (m, pi, map) = geo_setup();
        let traj = Trajectory::from_pairs(&m, &[(0, GEO_STOP)]).unwrap();
        let mut s = CriticState::zeros(1, 1);
        s.w_m[0] = f64::MAX;
        let err = s.update(&traj, &map, &map, &pi, 1e300).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn geo_fixed_point_and_gap() {
        let (m, pi, map) = geo_setup();
        let fp = CriticFixedPoint::compute(&m, &pi, &map, &map).unwrap();
        assert!((fp.w_j[0] - 1.636363636363636).abs() < 1e-12);
        assert!((fp.j0 - 1.0 / 0.55).abs() < 1e-12);
        // single state: q̃ is proportional to q, so both projections of J agree
        assert!((fp.w_tilde_j[0] - fp.w_j[0]).abs() < 1e-12);
        assert_eq!(fp.to_state().fixed_point_gap(&fp), 0.0);
        assert_eq!(CriticState::zeros(1, 1).fixed_point_gap(&fp), fp.max_abs());
    }

    #[test]
    fn expected_increment_vanishes_at_fixed_point() {
        let m = models::random_proper(21, 5, 3);
        let pi = SoftmaxPolicy::new(&m, (0..10).map(|i| 0.2 * (i as f64).cos()).collect()).unwrap();
        let map = compatible_features(&pi);
        let fp = CriticFixedPoint::compute(&m, &pi, &map, &map).unwrap();
        let inc = expected_increment(&m, &pi, &map, &map, &fp.to_state()).unwrap();
        assert!(inc.to_vec().iter().all(|v| v.abs() < 1e-9), "{inc:?}");
    }
}
