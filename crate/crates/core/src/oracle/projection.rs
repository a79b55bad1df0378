use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::features::{numerical_rank, FeatureMap};
use crate::mdp::{MdpModel, SoftmaxPolicy};

/// `Σ_{x,u} w(x,u) a(x,u) b(x,u)` over nonterminal pairs.
pub fn weighted_inner(model: &MdpModel, a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    let na = model.n_actions();
    model
        .nonterminal_states()
        .flat_map(|x| (0..na).map(move |u| x * na + u))
        .map(|i| weights[i] * a[i] * b[i])
        .sum()
}

/// Weighted least-squares weights `w` minimizing
/// `Σ_{x,u} weights(x,u) (values(x,u) - φ(x,u)ᵀ w)²`, i.e. the solution of
/// `(Φᵀ D Φ) w = Φᵀ D v`.
///
/// Signed weights are accepted (the result is then a stationary point rather
/// than a minimizer); a singular normal matrix is an error.
pub fn projection_weights(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    map: &FeatureMap,
    values: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>> {
    let na = model.n_actions();
    let size = model.n_states() * na;
    if values.len() != size || weights.len() != size {
        return Err(Error::contract("projection tables have the wrong size"));
    }
    let phi = map.matrix(policy, model)?;
    let nt: Vec<usize> = model
        .nonterminal_states()
        .flat_map(|x| (0..na).map(move |u| x * na + u))
        .collect();
    let v: Vec<f64> = nt.iter().map(|&i| values[i]).collect();
    let w: Vec<f64> = nt.iter().map(|&i| weights[i]).collect();
    weighted_least_squares(&phi, &v, &w)
}

/// Solves `(Φᵀ D Φ) w = Φᵀ D v` for a feature matrix with one row per
/// sample.
pub fn weighted_least_squares(phi: &DMatrix<f64>, values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let d = phi.ncols();
    if values.len() != phi.nrows() || weights.len() != phi.nrows() {
        return Err(Error::contract("least-squares tables have the wrong size"));
    }
    let dw = DVector::from_column_slice(weights);
    let weighted = DMatrix::from_fn(phi.nrows(), d, |r, c| phi[(r, c)] * dw[r]);
    let normal = phi.transpose() * &weighted;
    let rhs = weighted.transpose() * DVector::from_column_slice(values);
    let (rank, _) = numerical_rank(&normal);
    if d == 0 || rank < d {
        return Err(Error::RankDeficient { dim: d });
    }
    normal
        .lu()
        .solve(&rhs)
        .map(|w| w.iter().copied().collect())
        .ok_or(Error::RankDeficient { dim: d })
}

/// `Φ w` as a state-action table.
pub fn project(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    map: &FeatureMap,
    w: &[f64],
) -> Result<Vec<f64>> {
    if w.len() != map.dim() {
        return Err(Error::contract("weight vector does not match the feature map"));
    }
    let na = model.n_actions();
    let mut out = vec![0.0; model.n_states() * na];
    for x in model.nonterminal_states() {
        for u in 0..na {
            let phi = map.phi(policy, x, u)?;
            out[x * na + u] = phi.iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}
