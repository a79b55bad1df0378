//! Small models used by the test battery, the benches and the CLI examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp::MdpModel;

pub const GEO_CONT: usize = 0;
pub const GEO_STOP: usize = 1;

/// `s1 -> s2 -> end`, one action, rewards (1, 2, 0).
pub fn chain3() -> MdpModel {
    MdpModel::new(
        vec!["s1".into(), "s2".into(), "end".into()],
        vec!["go".into()],
        0,
        2,
        vec![1.0, 2.0, 0.0],
        vec![
            vec![vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 1.0]],
            vec![],
        ],
        1.0,
    )
    .expect("chain3 is well formed")
}

/// One nonterminal state `s` with reward 1. `cont` stays in `s` with
/// probability `stay` and terminates otherwise; `stop` always terminates.
/// The return is the number of visits to `s`, a geometric variable.
pub fn geo(stay: f64) -> MdpModel {
    MdpModel::new(
        vec!["s".into(), "end".into()],
        vec!["cont".into(), "stop".into()],
        0,
        1,
        vec![1.0, 0.0],
        vec![vec![vec![stay, 1.0 - stay], vec![0.0, 1.0]], vec![]],
        1.0,
    )
    .expect("geo is well formed")
}

/// Random dense model with `n_states` nonterminal states plus a terminal
/// one. Every (x, u) terminates with probability at least 0.15 and reaches
/// every state with positive probability, so every softmax policy is proper
/// and visits every state-action pair. Rewards are drawn from [0.1, 1].
pub fn random_proper(seed: u64, n_states: usize, n_actions: usize) -> MdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ns = n_states + 1;
    let mut names: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
    names.push("end".into());
    let actions = (0..n_actions).map(|u| format!("a{u}")).collect();

    let mut table = Vec::with_capacity(ns);
    for _ in 0..n_states {
        let mut rows = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            let w: Vec<f64> = (0..ns).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = w.iter().sum();
            let mut row: Vec<f64> = w.iter().map(|v| 0.85 * v / z).collect();
            row[n_states] += 0.15;
            // exact normalization keeps row sums within a few ulps of 1
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= z);
            rows.push(row);
        }
        table.push(rows);
    }
    table.push(vec![]);

    let mut rewards: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.1..1.0)).collect();
    rewards.push(0.0);

    MdpModel::new(names, actions, 0, n_states, rewards, table, 1.0)
        .expect("random model is well formed")
}

/// CHAIN3, GEO at stay 0.9 and 20 random 5-state/3-action models.
pub fn battery() -> Vec<(String, MdpModel)> {
    let mut out = vec![
        ("chain3".to_string(), chain3()),
        ("geo".to_string(), geo(0.9)),
    ];
    for seed in 0..20 {
        out.push((format!("random{seed}"), random_proper(1000 + seed, 5, 3)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{validate_model, ROW_SUM_TOL};

    #[test]
    fn battery_models_validate() {
        for (name, m) in battery() {
            let report = validate_model(&m);
            assert!(report.is_valid(), "{name}: {report}");
        }
    }

    #[test]
    fn random_rows_are_tight() {
        let m = random_proper(7, 5, 3);
        for x in m.nonterminal_states() {
            for u in 0..3 {
                let s: f64 = m.transition_row(x, u).iter().sum();
                assert!((s - 1.0).abs() <= ROW_SUM_TOL);
                assert!(m.prob(x, u, m.terminal()) >= 0.15 - 1e-12);
            }
        }
    }
}
