use std::collections::{HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on transition row sums used by [`validate_model`].
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Finite episodic MDP with a single absorbing terminal state.
///
/// Rewards depend on the state only. Transition rows of the terminal state
/// are stored as zeros and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpModel {
    state_names: Vec<String>,
    action_names: Vec<String>,
    initial: usize,
    terminal: usize,
    rewards: Vec<f64>,
    // Flattened [x][u][y].
    transitions: Vec<f64>,
    gamma: f64,
}

impl MdpModel {
    /// Builds a model from dense tables. `transitions[x][u][y]` is
    /// `P(y | x, u)`; the terminal state's rows may be empty.
    ///
    /// Only structural problems are rejected here. Semantic checks (row
    /// stochasticity, zero terminal reward, reachability) are reported by
    /// [`validate_model`].
    pub fn new(
        state_names: Vec<String>,
        action_names: Vec<String>,
        initial: usize,
        terminal: usize,
        rewards: Vec<f64>,
        transitions: Vec<Vec<Vec<f64>>>,
        gamma: f64,
    ) -> Result<Self> {
        let ns = state_names.len();
        let na = action_names.len();
        if ns < 2 {
            return Err(Error::InvalidModel(
                "need at least one nonterminal state and the terminal state".into(),
            ));
        }
        if na == 0 {
            return Err(Error::InvalidModel("no actions".into()));
        }
        check_unique(&state_names, "state")?;
        check_unique(&action_names, "action")?;
        if initial >= ns || terminal >= ns {
            return Err(Error::InvalidModel("initial/terminal index out of range".into()));
        }
        if initial == terminal {
            return Err(Error::InvalidModel("initial state is the terminal state".into()));
        }
        if rewards.len() != ns {
            return Err(Error::InvalidModel(format!(
                "expected {ns} rewards, got {}",
                rewards.len()
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidModel(format!("discount {gamma} not in (0, 1]")));
        }
        if transitions.len() != ns {
            return Err(Error::InvalidModel(format!(
                "expected transition rows for {ns} states, got {}",
                transitions.len()
            )));
        }
        let mut flat = vec![0.0; ns * na * ns];
        for (x, rows) in transitions.iter().enumerate() {
            if x == terminal {
                continue;
            }
            if rows.len() != na {
                return Err(Error::InvalidModel(format!(
                    "state {}: expected {na} action rows, got {}",
                    state_names[x],
                    rows.len()
                )));
            }
            for (u, row) in rows.iter().enumerate() {
                if row.len() != ns {
                    return Err(Error::InvalidModel(format!(
                        "({}, {}): expected {ns} probabilities, got {}",
                        state_names[x],
                        action_names[u],
                        row.len()
                    )));
                }
                let base = (x * na + u) * ns;
                flat[base..base + ns].copy_from_slice(row);
            }
        }
        Ok(MdpModel {
            state_names,
            action_names,
            initial,
            terminal,
            rewards,
            transitions: flat,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn terminal(&self) -> usize {
        self.terminal
    }

    pub fn is_terminal(&self, x: usize) -> bool {
        x == self.terminal
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward(&self, x: usize) -> f64 {
        self.rewards[x]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn prob(&self, x: usize, u: usize, y: usize) -> f64 {
        self.transitions[(x * self.n_actions() + u) * self.n_states() + y]
    }

    /// `P(· | x, u)` as a slice over all states.
    pub fn transition_row(&self, x: usize, u: usize) -> &[f64] {
        let ns = self.n_states();
        let base = (x * self.n_actions() + u) * ns;
        &self.transitions[base..base + ns]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|s| s == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_names.iter().position(|a| a == name)
    }

    /// Nonterminal states in index order.
    pub fn nonterminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(move |&x| x != self.terminal)
    }

    pub fn n_nonterminal(&self) -> usize {
        self.n_states() - 1
    }

    /// Same model with `baseline` added to every nonterminal reward.
    ///
    /// This changes the objective being optimized: returns grow by
    /// `baseline * tau`, which is policy dependent.
    pub fn with_reward_baseline(&self, baseline: f64) -> MdpModel {
        let mut m = self.clone();
        for x in 0..m.n_states() {
            if x != m.terminal {
                m.rewards[x] += baseline;
            }
        }
        m
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<MdpModel> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidModel(format!("discount {gamma} not in (0, 1]")));
        }
        let mut m = self.clone();
        m.gamma = gamma;
        Ok(m)
    }
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidModel(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(())
}

/// Outcome of [`validate_model`]. An empty violation list means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidModel(self.violations.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks row stochasticity, zero terminal reward, and reachability under
/// the uniform policy: every nonterminal state reachable from the initial
/// state, and the terminal state reachable from every state. Since softmax
/// policies put positive mass on every action, passing the reachability
/// check means every softmax policy is proper and visits every state-action
/// pair.
pub fn validate_model(model: &MdpModel) -> ValidationReport {
    let mut violations = Vec::new();
    let ns = model.n_states();
    let na = model.n_actions();

    for x in model.nonterminal_states() {
        for u in 0..na {
            let row = model.transition_row(x, u);
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                violations.push(format!(
                    "negative or non-finite probability at ({}, {})",
                    model.state_names[x], model.action_names[u]
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                violations.push(format!(
                    "row not stochastic at ({}, {}): sums to {sum}",
                    model.state_names[x], model.action_names[u]
                ));
            }
        }
    }

    let rt = model.reward(model.terminal);
    if rt != 0.0 {
        violations.push(format!("nonzero reward {rt} at the terminal state"));
    }
    for x in 0..ns {
        if !model.reward(x).is_finite() {
            violations.push(format!("non-finite reward at {}", model.state_names[x]));
        }
    }

    let edge = |x: usize, y: usize| x != model.terminal && (0..na).any(|u| model.prob(x, u, y) > 0.0);

    // forward reachability from the initial state
    let mut seen = vec![false; ns];
    let mut queue = VecDeque::from([model.initial]);
    seen[model.initial] = true;
    while let Some(x) = queue.pop_front() {
        for y in 0..ns {
            if !seen[y] && edge(x, y) {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    for x in model.nonterminal_states() {
        if !seen[x] {
            violations.push(format!(
                "state {} unreachable from {}",
                model.state_names[x], model.state_names[model.initial]
            ));
        }
    }

    // backward reachability to the terminal state
    let mut reaches = vec![false; ns];
    reaches[model.terminal] = true;
    let mut queue = VecDeque::from([model.terminal]);
    while let Some(y) = queue.pop_front() {
        for x in 0..ns {
            if !reaches[x] && edge(x, y) {
                reaches[x] = true;
                queue.push_back(x);
            }
        }
    }
    for x in model.nonterminal_states() {
        if !reaches[x] {
            violations.push(format!(
                "terminal state unreachable from {}",
                model.state_names[x]
            ));
        }
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn chain3_is_valid() {
        assert!(validate_model(&models::chain3()).is_valid());
    }

    #[test]
    fn geo_is_valid() {
        // stop always reaches x*, so the uniform-policy check passes even
        // though the always-continue policy would be improper at stay = 1
        assert!(validate_model(&models::geo(1.0)).is_valid());
        assert!(validate_model(&models::geo(0.9)).is_valid());
    }

    #[test]
    fn substochastic_row_reported() {
        let m = MdpModel::new(
            vec!["s".into(), "end".into()],
            vec!["a".into()],
            0,
            1,
            vec![1.0, 0.0],
            vec![vec![vec![0.0, 0.9]], vec![]],
            1.0,
        )
        .unwrap();
        let report = validate_model(&m);
        assert!(!report.is_valid());
        assert!(report.violations[0].contains("row not stochastic at (s, a)"));
    }

    #[test]
    fn terminal_reward_reported() {
        let m = MdpModel::new(
            vec!["s".into(), "end".into()],
            vec!["a".into()],
            0,
            1,
            vec![1.0, 2.0],
            vec![vec![vec![0.0, 1.0]], vec![]],
            1.0,
        )
        .unwrap();
        let report = validate_model(&m);
        assert_eq!(report.violations.len(), 1);
        assert!(report.violations[0].contains("terminal"));
    }

    #[test]
    fn trapped_state_reported() {
        // b loops on itself forever
        let m = MdpModel::new(
            vec!["a".into(), "b".into(), "end".into()],
            vec!["go".into()],
            0,
            2,
            vec![1.0, 1.0, 0.0],
            vec![
                vec![vec![0.0, 0.5, 0.5]],
                vec![vec![0.0, 1.0, 0.0]],
                vec![],
            ],
            1.0,
        )
        .unwrap();
        let report = validate_model(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("terminal state unreachable from b")));
    }

    #[test]
    fn structural_errors() {
        let bad_gamma = MdpModel::new(
            vec!["s".into(), "end".into()],
            vec!["a".into()],
            0,
            1,
            vec![1.0, 0.0],
            vec![vec![vec![0.0, 1.0]], vec![]],
            0.0,
        );
        assert!(matches!(bad_gamma, Err(Error::InvalidModel(_))));

        let dup = MdpModel::new(
            vec!["s".into(), "s".into()],
            vec!["a".into()],
            0,
            1,
            vec![1.0, 0.0],
            vec![vec![vec![0.0, 1.0]], vec![]],
            1.0,
        );
        assert!(matches!(dup, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn baseline_shifts_nonterminal_rewards_only() {
        let m = models::chain3().with_reward_baseline(0.5);
        assert_eq!(m.rewards(), &[1.5, 2.5, 0.0]);
    }
}
