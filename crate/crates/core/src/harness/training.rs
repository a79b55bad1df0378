use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::actor::{actor_gradient_estimate, actor_step};
use crate::critic::{CriticFixedPoint, CriticState};
use crate::error::{Error, Result};
use crate::features::{compatible_features, FeatureMap};
use crate::harness::config::Experiment;
use crate::mdp::{simulate_episode, MdpModel, SoftmaxPolicy};
use crate::oracle::{evaluate, exact_gradient};

/// Oracle diagnostics logged every `eval_every` episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    /// Episodes completed when the record was taken.
    pub episode: u64,
    pub eta: f64,
    pub j0_estimate: f64,
    pub j_oracle: f64,
    pub v_oracle: f64,
    pub grad_norm: f64,
    pub critic_gap: f64,
    /// Clamp events so far.
    pub clamped: u64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingHistory {
    pub records: Vec<Record>,
    pub final_critic: CriticState,
}

impl TrainingHistory {
    pub fn last(&self) -> &Record {
        self.records.last().expect("a history has at least one record")
    }

    pub fn final_theta(&self) -> &[f64] {
        &self.last().theta
    }
}

fn diagnostics(
    model: &MdpModel,
    policy: &SoftmaxPolicy,
    map: &FeatureMap,
    mu: f64,
    critic: &CriticState,
    clamped: u64,
) -> Result<Record> {
    let ev = evaluate(model, policy, mu)?;
    let grad = exact_gradient(model, policy, mu)?;
    let fp = CriticFixedPoint::from_evaluation(model, policy, map, map, &ev)?;
    Ok(Record {
        episode: critic.episode,
        eta: ev.eta,
        j0_estimate: critic.j0,
        j_oracle: ev.j0(),
        v_oracle: ev.v0(),
        grad_norm: grad.grad_eta_norm(),
        critic_gap: critic.fixed_point_gap(&fp),
        clamped,
        theta: policy.theta().to_vec(),
    })
}

/// Runs the two-timescale actor-critic for `config.episodes` episodes.
///
/// Each episode is sampled with the current policy; the actor's gradient
/// estimate uses the critic as it stood before the episode, then the critic
/// takes a step of size `α_i` and the actor one of size `β_i`. Oracle
/// diagnostics are computed out of band and never feed back into learning.
pub fn run_training(exp: &Experiment) -> Result<TrainingHistory> {
    let cfg = &exp.config;
    let model = &exp.model;
    if model.gamma() != 1.0 {
        return Err(Error::InvalidConfig(
            "training requires an undiscounted model (gamma = 1)".into(),
        ));
    }
    let mut policy = exp.initial_policy()?;
    let map = compatible_features(&policy);
    let mut critic = CriticState::zeros(map.dim(), map.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clamped = 0u64;
    let mut records = Vec::with_capacity(cfg.episodes.div_ceil(cfg.eval_every) as usize);

    for i in 0..cfg.episodes {
        let at = |source: Error| Error::Training {
            episode: i,
            source: Box::new(source),
        };
        let traj = simulate_episode(model, &policy, &mut rng, cfg.max_episode_steps).map_err(at)?;
        let grad = actor_gradient_estimate(&traj, &critic, &map, &map, &policy, cfg.mu).map_err(at)?;
        critic = critic
            .update(&traj, &map, &map, &policy, cfg.schedule.alpha(i))
            .map_err(at)?;
        let step = actor_step(policy.theta(), &grad, cfg.schedule.beta(i), cfg.theta_max).map_err(at)?;
        if step.clamped {
            clamped += 1;
        }
        policy = policy.with_theta(step.theta).map_err(at)?;

        let done = i + 1;
        if done % cfg.eval_every == 0 || done == cfg.episodes {
            let rec = diagnostics(model, &policy, &map, cfg.mu, &critic, clamped).map_err(at)?;
            debug!(
                "episode {}: eta {:.6} |grad| {:.3e} gap {:.3e}",
                rec.episode, rec.eta, rec.grad_norm, rec.critic_gap
            );
            records.push(rec);
        }
    }
    if clamped > 0 {
        info!("theta was clamped in {clamped} of {} episodes", cfg.episodes);
    }
    Ok(TrainingHistory {
        records,
        final_critic: critic,
    })
}
