//! Compatible linear features for the critic.
//!
//! The leading block of every feature vector is the policy score
//! `ψ_θ(x, u)`, so the span of the score is contained in the feature
//! subspace. The augmented variant appends fixed user features after it.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, SoftmaxPolicy};

/// Relative singular value cutoff for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Compatible,
    CompatibleAugmented,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kind: FeatureKind,
    score_dim: usize,
    n_actions: usize,
    // flattened [x][u] -> extra features, empty for the plain map
    extra: Vec<Vec<f64>>,
    extra_dim: usize,
}

/// `φ = ψ_θ`.
pub fn compatible_features(policy: &SoftmaxPolicy) -> FeatureMap {
    FeatureMap {
        kind: FeatureKind::Compatible,
        score_dim: policy.dim(),
        n_actions: policy.n_actions(),
        extra: Vec::new(),
        extra_dim: 0,
    }
}

/// `φ = [ψ_θ, extra(x, u)]`. `extra` is indexed `x * n_actions + u` and
/// must cover every state; rows for the terminal state are ignored.
pub fn augmented_features(
    policy: &SoftmaxPolicy,
    model: &MdpModel,
    extra: Vec<Vec<f64>>,
) -> Result<FeatureMap> {
    let expected = model.n_states() * model.n_actions();
    if extra.len() != expected {
        return Err(Error::contract(format!(
            "augmented features: expected {expected} rows, got {}",
            extra.len()
        )));
    }
    let extra_dim = extra
        .iter()
        .enumerate()
        .find(|(i, _)| i / model.n_actions() != model.terminal())
        .map_or(0, |(_, r)| r.len());
    for (i, row) in extra.iter().enumerate() {
        if i / model.n_actions() != model.terminal() && row.len() != extra_dim {
            return Err(Error::contract("augmented features: ragged rows"));
        }
    }
    Ok(FeatureMap {
        kind: FeatureKind::CompatibleAugmented,
        score_dim: policy.dim(),
        n_actions: model.n_actions(),
        extra,
        extra_dim,
    })
}

impl FeatureMap {
    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.score_dim + self.extra_dim
    }

    /// `φ_θ(x, u)`. Zero at the terminal state.
    pub fn phi(&self, policy: &SoftmaxPolicy, x: usize, u: usize) -> Result<Vec<f64>> {
        if policy.dim() != self.score_dim {
            return Err(Error::contract(format!(
                "feature map built for {} parameters, policy has {}",
                self.score_dim,
                policy.dim()
            )));
        }
        if policy.is_terminal(x) {
            return Ok(vec![0.0; self.dim()]);
        }
        let mut phi = policy.score(x, u)?;
        if self.kind == FeatureKind::CompatibleAugmented {
            phi.extend_from_slice(&self.extra[x * self.n_actions + u]);
        }
        Ok(phi)
    }

    /// Same as [`phi`](Self::phi) with the action distribution at `x`
    /// already computed.
    pub(crate) fn phi_from_probs(
        &self,
        policy: &SoftmaxPolicy,
        x: usize,
        u: usize,
        probs: &[f64],
    ) -> Vec<f64> {
        let mut phi = policy.score_from_probs(x, u, probs);
        if self.kind == FeatureKind::CompatibleAugmented {
            phi.extend_from_slice(&self.extra[x * self.n_actions + u]);
        }
        phi
    }

    /// Feature matrix with one row per (nonterminal state, action) pair, in
    /// state-major order.
    pub fn matrix(&self, policy: &SoftmaxPolicy, model: &MdpModel) -> Result<DMatrix<f64>> {
        let na = model.n_actions();
        let rows = model.n_nonterminal() * na;
        let mut mat = DMatrix::zeros(rows, self.dim());
        for (r, x) in model.nonterminal_states().enumerate() {
            for u in 0..na {
                let phi = self.phi(policy, x, u)?;
                for (c, v) in phi.into_iter().enumerate() {
                    mat[(r * na + u, c)] = v;
                }
            }
        }
        Ok(mat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    pub dim: usize,
    pub singular_values: Vec<f64>,
    pub deficient: bool,
}

/// Number of singular values above `RANK_TOL` times the largest one.
pub fn numerical_rank(mat: &DMatrix<f64>) -> (usize, Vec<f64>) {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return (0, Vec::new());
    }
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = if top > 0.0 {
        sv.iter().filter(|&&s| s > RANK_TOL * top).count()
    } else {
        0
    };
    (rank, sv)
}

/// Numerical rank of the feature matrix at the current `θ`.
pub fn check_rank(map: &FeatureMap, policy: &SoftmaxPolicy, model: &MdpModel) -> Result<RankReport> {
    let mat = map.matrix(policy, model)?;
    let (rank, singular_values) = numerical_rank(&mat);
    Ok(RankReport {
        rank,
        dim: map.dim(),
        singular_values,
        deficient: rank < map.dim() || map.dim() == 0,
    })
}
