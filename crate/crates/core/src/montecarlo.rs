//! Seeded Monte Carlo estimates over independent episodes.
//!
//! Episode `i` of a run with seed `s` draws from ChaCha8 seeded with `s` on
//! stream `i`, so each episode is reproducible on its own and the estimate
//! does not depend on how episodes are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution};
use crate::mdp::{discounted_return, EpisodeSampler, MdpModel, SoftmaxPolicy, Trajectory};

/// Generator for episode `index` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: u64,
}

impl Estimate {
    /// `(mean - target) / std_err`. A zero standard error gives 0 when the
    /// mean matches the target to 1e-9 relative and infinity otherwise.
    pub fn z(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.std_err > 0.0 {
            diff / self.std_err
        } else if diff.abs() <= 1e-9 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z(target).abs() < n_se
    }
}

#[derive(Debug, Clone)]
struct Moments {
    n: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            n: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    fn push(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.sum.len() {
            return Err(Error::contract("statistic changed dimension between episodes"));
        }
        self.n += 1;
        for (k, x) in v.iter().enumerate() {
            self.sum[k] += x;
            self.sum_sq[k] += x * x;
        }
        Ok(())
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
    }

    fn estimates(&self) -> Vec<Estimate> {
        let n = self.n as f64;
        (0..self.sum.len())
            .map(|k| {
                let mean = self.sum[k] / n;
                let var = if self.n > 1 {
                    ((self.sum_sq[k] - n * mean * mean) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                Estimate {
                    mean,
                    std_err: (var / n).sqrt(),
                    n: self.n,
                }
            })
            .collect()
    }
}

/// Mean and standard error of a per-episode vector statistic over
/// `n_episodes` independent episodes.
pub fn mean_statistic<F>(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    n_episodes: u64,
    seed: u64,
    exec: Execution,
    max_steps: usize,
    stat: F,
) -> Result<Vec<Estimate>>
where
    F: Fn(&Trajectory) -> Result<Vec<f64>> + Sync + Send,
{
    if n_episodes == 0 {
        return Err(Error::contract("need at least one episode"));
    }
    let sampler = EpisodeSampler::new(model, policy, max_steps)?;
    let parts = map_chunks(exec, n_episodes, |range| -> Result<Option<Moments>> {
        let mut acc: Option<Moments> = None;
        for i in range {
            let traj = sampler.sample(&mut episode_rng(seed, i))?;
            let v = stat(&traj)?;
            acc.get_or_insert_with(|| Moments::new(v.len())).push(&v)?;
        }
        Ok(acc)
    });
    let mut total: Option<Moments> = None;
    for part in parts {
        if let Some(m) = part? {
            match total.as_mut() {
                Some(t) => {
                    if t.sum.len() != m.sum.len() {
                        return Err(Error::contract(
                            "statistic changed dimension between episodes",
                        ));
                    }
                    t.merge(&m)
                }
                None => total = Some(m),
            }
        }
    }
    Ok(total.expect("n_episodes > 0").estimates())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnMoments {
    /// `E[B]`
    pub first: Estimate,
    /// `E[B²]`
    pub second: Estimate,
    /// `E[τ]`
    pub length: Estimate,
}

/// Empirical first and second moments of the return from the initial state.
pub fn return_moments(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    n_episodes: u64,
    seed: u64,
    exec: Execution,
    max_steps: usize,
) -> Result<ReturnMoments> {
    let gamma = model.gamma();
    let est = mean_statistic(model, policy, n_episodes, seed, exec, max_steps, |traj| {
        let b = discounted_return(traj, gamma).total;
        Ok(vec![b, b * b, traj.tau() as f64])
    })?;
    Ok(ReturnMoments {
        first: est[0],
        second: est[1],
        length: est[2],
    })
}

/// Per state-action pair: expected visit count and the expected
/// prefix-reward-weighted visit count `Σ_{t≥1} 1{x_t = x, u_t = u} Σ_{s<t} r(x_s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisitStatistics {
    pub visits: Vec<Estimate>,
    pub weighted_visits: Vec<Estimate>,
}

pub fn visit_statistics(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    n_episodes: u64,
    seed: u64,
    exec: Execution,
    max_steps: usize,
) -> Result<VisitStatistics> {
    let na = model.n_actions();
    let size = model.n_states() * na;
    let est = mean_statistic(model, policy, n_episodes, seed, exec, max_steps, |traj| {
        let ret = discounted_return(traj, 1.0);
        let mut v = vec![0.0; 2 * size];
        for (t, step) in traj.steps().iter().enumerate() {
            let i = step.state * na + step.action;
            v[i] += 1.0;
            v[size + i] += ret.prefix[t];
        }
        Ok(v)
    })?;
    Ok(VisitStatistics {
        visits: est[..size].to_vec(),
        weighted_visits: est[size..].to_vec(),
    })
}
