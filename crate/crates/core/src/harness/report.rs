use serde::Serialize;

use crate::error::Result;
use crate::features::{check_rank, compatible_features, RankReport};
use crate::harness::config::Experiment;
use crate::oracle::{evaluate, gradient_of, GradientReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateRow {
    pub state: String,
    pub j: f64,
    pub m: f64,
    pub v: f64,
    pub q: f64,
    pub qtilde: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub state: String,
    pub action: String,
    pub pi: f64,
    pub j: f64,
    pub m: f64,
    pub v: f64,
    pub q: f64,
    pub qtilde: Option<f64>,
}

/// Feature rank and occupancy positivity at the evaluated policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionChecks {
    pub feature_rank: RankReport,
    pub q_positive: bool,
    pub q_min: f64,
    /// `None` for discounted models.
    pub qtilde_positive: Option<bool>,
    pub qtilde_min: Option<f64>,
}

/// Oracle summary for the initial policy of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mu: f64,
    pub gamma: f64,
    pub reward_baseline: f64,
    pub theta: Vec<f64>,
    pub j0: f64,
    pub m0: f64,
    pub v0: f64,
    pub eta: f64,
    pub states: Vec<StateRow>,
    pub pairs: Vec<PairRow>,
    /// `None` for discounted models.
    pub gradient: Option<GradientReport>,
    pub assumptions: AssumptionChecks,
}

pub fn eval_report(exp: &Experiment) -> Result<EvalReport> {
    let model = &exp.model;
    let policy = exp.initial_policy()?;
    let ev = evaluate(model, &policy, exp.config.mu)?;
    let na = model.n_actions();
    let qt = ev.qtilde.as_ref();
    let mut states = Vec::new();
    let mut pairs = Vec::new();
    let mut q_min = f64::INFINITY;
    for x in model.nonterminal_states() {
        let name = &model.state_names()[x];
        states.push(StateRow {
            state: name.clone(),
            j: ev.j.state[x],
            m: ev.m.state[x],
            v: ev.v.state[x],
            q: ev.q.state[x],
            qtilde: qt.map(|t| t.state[x]),
        });
        let probs = policy.action_distribution(x)?;
        for u in 0..na {
            let i = x * na + u;
            q_min = q_min.min(ev.q.sa[i]);
            pairs.push(PairRow {
                state: name.clone(),
                action: model.action_names()[u].clone(),
                pi: probs[u],
                j: ev.j.sa[i],
                m: ev.m.sa[i],
                v: ev.v.sa[i],
                q: ev.q.sa[i],
                qtilde: qt.map(|t| t.sa[i]),
            });
        }
    }
    let gradient = if qt.is_some() {
        Some(gradient_of(model, &policy, &ev)?)
    } else {
        None
    };
    let map = compatible_features(&policy);
    Ok(EvalReport {
        mu: ev.mu,
        gamma: model.gamma(),
        reward_baseline: exp.config.reward_baseline,
        theta: policy.theta().to_vec(),
        j0: ev.j0(),
        m0: ev.m0(),
        v0: ev.v0(),
        eta: ev.eta,
        states,
        pairs,
        gradient,
        assumptions: AssumptionChecks {
            feature_rank: check_rank(&map, &policy, model)?,
            q_positive: q_min > 0.0,
            q_min,
            qtilde_positive: qt.map(|t| t.positive),
            qtilde_min: qt.map(|t| t.min),
        },
    })
}
