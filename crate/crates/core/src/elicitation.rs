//! Choosing which example entities to show the user, and deciding when a
//! word's meaning is settled.
//!
//! Two strategies are available. `diverse` walks the top-level branches of
//! the graph round-robin, taking the smallest entity id from each. `infogain`
//! greedily builds the candidate list that minimizes the expected posterior
//! entropy after the user answers, under a simple cooperative user model:
//! given the true meaning `h`, the user picks uniformly among the offered
//! candidates that fall under `h`, or answers "none of these" when no
//! candidate does. Equal expected entropies are broken in favour of the
//! candidate most likely to fall under the true meaning, then by entity id.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::inference::{entropy_bits, Posterior};
use crate::ontology::{NodeIx, Ontology};

/// Gains closer than this count as ties and fall back to id order.
const GAIN_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Diverse,
    #[default]
    Infogain,
}

impl FromStr for Strategy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diverse" => Ok(Strategy::Diverse),
            "infogain" => Ok(Strategy::Infogain),
            other => Err(ConfigError::Strategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Diverse => "diverse",
            Strategy::Infogain => "infogain",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElicitationConfig {
    /// Number of candidates offered per prompt.
    pub k: usize,
    pub strategy: Strategy,
    /// MAP probability at which a meaning is committed.
    pub threshold: f64,
    /// Reserved for randomized tie-breaking; both built-in strategies break
    /// ties deterministically and ignore it.
    pub seed: u64,
}

impl Default for ElicitationConfig {
    fn default() -> Self {
        ElicitationConfig {
            k: 3,
            strategy: Strategy::Infogain,
            threshold: 0.9,
            seed: 0,
        }
    }
}

impl ElicitationConfig {
    pub fn validate(&self, ontology: &Ontology) -> Result<(), ConfigError> {
        let max = ontology.entity_count();
        if self.k < 1 || self.k > max {
            return Err(ConfigError::CandidateCount { k: self.k, max });
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(ConfigError::Threshold(self.threshold));
        }
        Ok(())
    }
}

/// Outcome of checking a posterior against the commit threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    KeepLearning,
    Commit { node: String, probability: f64 },
}

impl Decision {
    pub fn is_commit(&self) -> bool {
        matches!(self, Decision::Commit { .. })
    }
}

pub fn commit_decision(p: &Posterior, cfg: &ElicitationConfig) -> Decision {
    let (h, prob) = p.map();
    if prob >= cfg.threshold {
        Decision::Commit {
            node: h.node.clone(),
            probability: prob,
        }
    } else {
        Decision::KeepLearning
    }
}

/// Picks up to `cfg.k` distinct entity ids to offer the user.
pub fn select_candidates(o: &Ontology, p: &Posterior, cfg: &ElicitationConfig) -> Vec<String> {
    let all = o.entities();
    let picked: Vec<NodeIx> = if cfg.k >= all.len() {
        all.to_vec()
    } else {
        match cfg.strategy {
            Strategy::Diverse => diverse(o, cfg.k),
            Strategy::Infogain => infogain(o, p, cfg.k),
        }
    };
    picked.into_iter().map(|e| o.id(e).to_string()).collect()
}

fn diverse(o: &Ontology, k: usize) -> Vec<NodeIx> {
    let (branches, direct) = o.entities_by_branch();
    let mut queues: Vec<Vec<NodeIx>> = branches.into_values().filter(|b| !b.is_empty()).collect();
    if !direct.is_empty() {
        queues.push(direct);
    }
    let mut out = Vec::with_capacity(k);
    let mut round = 0;
    while out.len() < k {
        let before = out.len();
        for q in &queues {
            if out.len() == k {
                break;
            }
            if let Some(&e) = q.get(round) {
                out.push(e);
            }
        }
        if out.len() == before {
            break;
        }
        round += 1;
    }
    out
}

fn infogain(o: &Ontology, p: &Posterior, k: usize) -> Vec<NodeIx> {
    let mut chosen: Vec<NodeIx> = Vec::with_capacity(k);
    while chosen.len() < k {
        // (entity, expected entropy, coverage)
        let mut best: Option<(NodeIx, f64, f64)> = None;
        for &e in o.entities() {
            if chosen.contains(&e) {
                continue;
            }
            chosen.push(e);
            let score = expected_entropy_ix(o, p, &chosen);
            chosen.pop();
            let cov = coverage(o, p, e);
            let better = match best {
                None => true,
                Some((_, s, c)) => {
                    score < s - GAIN_EPSILON
                        || ((score - s).abs() <= GAIN_EPSILON && cov > c + GAIN_EPSILON)
                }
            };
            if better {
                best = Some((e, score, cov));
            }
        }
        match best {
            Some((e, _, _)) => chosen.push(e),
            None => break,
        }
    }
    chosen
}

/// Posterior probability that the word's meaning covers entity `e`.
fn coverage(o: &Ontology, p: &Posterior, e: NodeIx) -> f64 {
    p.iter()
        .filter(|(h, m)| *m > 0.0 && o.covers_ix(h.ix, e))
        .map(|(_, m)| m)
        .sum()
}

/// Expected posterior entropy (bits) after the user answers a prompt
/// offering `candidates`. Unknown ids are ignored.
pub fn expected_entropy_after<S: AsRef<str>>(o: &Ontology, p: &Posterior, candidates: &[S]) -> f64 {
    let ixs: Vec<NodeIx> = candidates
        .iter()
        .filter_map(|c| o.entity(c.as_ref()).ok())
        .collect();
    expected_entropy_ix(o, p, &ixs)
}

fn expected_entropy_ix(o: &Ontology, p: &Posterior, candidates: &[NodeIx]) -> f64 {
    let hyps = p.space().hypotheses();
    let masses = p.masses();
    // joint[outcome][hypothesis]; the last outcome is "none of these".
    let none = candidates.len();
    let mut joint = vec![vec![0.0; hyps.len()]; candidates.len() + 1];
    let mut hits = Vec::with_capacity(candidates.len());
    for (i, (h, &m)) in hyps.iter().zip(masses).enumerate() {
        if m == 0.0 {
            continue;
        }
        hits.clear();
        hits.extend(
            candidates
                .iter()
                .enumerate()
                .filter(|(_, &c)| o.covers_ix(h.ix, c))
                .map(|(j, _)| j),
        );
        if hits.is_empty() {
            joint[none][i] = m;
        } else {
            let share = m / hits.len() as f64;
            for &j in &hits {
                joint[j][i] = share;
            }
        }
    }
    joint
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            let cond: Vec<f64> = row.iter().map(|x| x / total).collect();
            total * entropy_bits(&cond)
        })
        .sum()
}
