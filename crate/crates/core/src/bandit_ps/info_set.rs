use serde::{Deserialize, Serialize};

use crate::model::OfflinePrefDataset;

/// Membership rule for the information set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InfoSetRule {
    /// Arms preferred at least once, plus arms absent from the data. This is
    /// the set the informativeness constants `f1`, `f2` are stated for.
    #[default]
    WonAtLeastOnce,
    /// Arms that appear and never lose, plus arms absent from the data. May be
    /// empty when the comparisons contain a cycle.
    NeverLost,
}

impl InfoSetRule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "won" | "won-at-least-once" => Some(Self::WonAtLeastOnce),
            "never-lost" => Some(Self::NeverLost),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoSet {
    members: Vec<bool>,
}

impl InfoSet {
    pub fn contains(&self, arm: usize) -> bool {
        self.members.get(arm).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.members[i]).collect()
    }
}

pub fn build_info_set(d0: &OfflinePrefDataset, k: usize) -> InfoSet {
    build_info_set_with(d0, k, InfoSetRule::WonAtLeastOnce)
}

pub fn build_info_set_with(d0: &OfflinePrefDataset, k: usize, rule: InfoSetRule) -> InfoSet {
    let mut seen = vec![false; k];
    let mut won = vec![false; k];
    let mut lost = vec![false; k];
    for e in &d0.entries {
        seen[e.idx0] = true;
        seen[e.idx1] = true;
        won[e.winner()] = true;
        if e.idx0 != e.idx1 {
            lost[e.loser()] = true;
        }
    }
    let members = (0..k)
        .map(|i| {
            !seen[i]
                || match rule {
                    InfoSetRule::WonAtLeastOnce => won[i],
                    InfoSetRule::NeverLost => !lost[i],
                }
        })
        .collect();
    InfoSet { members }
}
