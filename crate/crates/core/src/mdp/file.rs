//! JSON model files.
//!
//! ```json
//! {
//!   "states": ["s", "end"],
//!   "initial": "s",
//!   "actions": ["cont", "stop"],
//!   "rewards": {"s": 1.0},
//!   "transitions": [
//!     {"from": "s", "action": "cont", "to": "s", "prob": 0.9},
//!     {"from": "s", "action": "cont", "to": "end", "prob": 0.1},
//!     {"from": "s", "action": "stop", "to": "end", "prob": 1.0}
//!   ],
//!   "gamma": 1.0
//! }
//! ```
//!
//! The terminal state is the last listed state unless an entry is written as
//! `{"name": ..., "terminal": true}`. Missing rewards default to zero;
//! missing transitions have probability zero.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::MdpModel;

/// Row-sum tolerance applied when loading a model file.
pub const FILE_ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateEntry {
    Name(String),
    Flagged {
        name: String,
        #[serde(default)]
        terminal: bool,
    },
}

impl StateEntry {
    fn name(&self) -> &str {
        match self {
            StateEntry::Name(n) | StateEntry::Flagged { name: n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<StateEntry>,
    pub initial: String,
    pub actions: Vec<String>,
    #[serde(default)]
    pub rewards: BTreeMap<String, f64>,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    1.0
}

impl ModelFile {
    pub fn into_model(self) -> Result<MdpModel> {
        let names: Vec<String> = self.states.iter().map(|s| s.name().to_string()).collect();
        let flagged: Vec<usize> = self
            .states
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, StateEntry::Flagged { terminal: true, .. }))
            .map(|(i, _)| i)
            .collect();
        let terminal = match flagged.as_slice() {
            [] => names.len().checked_sub(1).ok_or_else(|| {
                Error::InvalidModel("no states".into())
            })?,
            [t] => *t,
            _ => return Err(Error::InvalidModel("more than one terminal state flagged".into())),
        };
        let lookup = |n: &str, what: &str| -> Result<usize> {
            names
                .iter()
                .position(|s| s == n)
                .ok_or_else(|| Error::InvalidModel(format!("unknown {what} {n:?}")))
        };
        let initial = lookup(&self.initial, "initial state")?;
        let ns = names.len();
        let na = self.actions.len();

        let mut rewards = vec![0.0; ns];
        for (name, r) in &self.rewards {
            rewards[lookup(name, "state in rewards")?] = *r;
        }

        let mut table = vec![vec![vec![0.0; ns]; na]; ns];
        for t in &self.transitions {
            let x = lookup(&t.from, "state")?;
            let y = lookup(&t.to, "state")?;
            let u = self
                .actions
                .iter()
                .position(|a| *a == t.action)
                .ok_or_else(|| Error::InvalidModel(format!("unknown action {:?}", t.action)))?;
            if x == terminal {
                return Err(Error::InvalidModel(format!(
                    "transition out of terminal state {:?}",
                    t.from
                )));
            }
            if !(t.prob >= 0.0 && t.prob <= 1.0) {
                return Err(Error::InvalidModel(format!(
                    "probability {} out of [0, 1] at ({}, {}, {})",
                    t.prob, t.from, t.action, t.to
                )));
            }
            table[x][u][y] += t.prob;
        }
        for x in (0..ns).filter(|&x| x != terminal) {
            for u in 0..na {
                let sum: f64 = table[x][u].iter().sum();
                if (sum - 1.0).abs() > FILE_ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "row not stochastic at ({}, {}): sums to {sum}",
                        names[x], self.actions[u]
                    )));
                }
            }
        }
        table[terminal].clear();
        MdpModel::new(names, self.actions, initial, terminal, rewards, table, self.gamma)
    }

    pub fn from_model(model: &MdpModel) -> ModelFile {
        let names = model.state_names();
        let terminal_last = model.terminal() == names.len() - 1;
        let states = names
            .iter()
            .enumerate()
            .map(|(x, n)| {
                if !terminal_last && x == model.terminal() {
                    StateEntry::Flagged {
                        name: n.clone(),
                        terminal: true,
                    }
                } else {
                    StateEntry::Name(n.clone())
                }
            })
            .collect();
        let mut transitions = Vec::new();
        for x in model.nonterminal_states() {
            for u in 0..model.n_actions() {
                for y in 0..model.n_states() {
                    let p = model.prob(x, u, y);
                    if p > 0.0 {
                        transitions.push(TransitionEntry {
                            from: names[x].clone(),
                            action: model.action_names()[u].clone(),
                            to: names[y].clone(),
                            prob: p,
                        });
                    }
                }
            }
        }
        ModelFile {
            states,
            initial: names[model.initial()].clone(),
            actions: model.action_names().to_vec(),
            rewards: model
                .nonterminal_states()
                .map(|x| (names[x].clone(), model.reward(x)))
                .collect(),
            transitions,
            gamma: model.gamma(),
        }
    }
}

pub fn parse_model(text: &str) -> Result<MdpModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.into_model()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MdpModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    file.into_model()
}
