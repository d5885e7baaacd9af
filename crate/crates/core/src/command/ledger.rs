use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::Verdict;
use crate::incident::Timestamp;
use crate::library::{Action, InterventionPlan};
use crate::math::pow;

pub const DEFAULT_REJECTION_PENALTY: f64 = 0.8;
pub const DEFAULT_PENALTY_FLOOR: f64 = 0.2;

/// Change made by a modify verdict at one action slot. `None` means the slot
/// did not exist on that side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ActionChange {
    pub index: usize,
    pub before: Option<Action>,
    pub after: Option<Action>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlanDelta {
    pub actions: Vec<ActionChange>,
    /// `after - before` for effectiveness, cost efficiency and response speed.
    pub score_change: [f64; 3],
}

impl PlanDelta {
    pub fn between(before: &InterventionPlan, after: &InterventionPlan) -> Self {
        let n = before.actions.len().max(after.actions.len());
        let actions = (0..n)
            .filter_map(|i| {
                let b = before.actions.get(i);
                let a = after.actions.get(i);
                (b != a).then(|| ActionChange {
                    index: i,
                    before: b.cloned(),
                    after: a.cloned(),
                })
            })
            .collect();
        Self {
            actions,
            score_change: [
                after.effectiveness - before.effectiveness,
                after.cost_efficiency - before.cost_efficiency,
                after.response_speed - before.response_speed,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LedgerEntry {
    pub scenario_id: String,
    pub plan_id: String,
    pub verdict: Verdict,
    pub timestamp: Timestamp,
    pub delta: Option<PlanDelta>,
}

/// Expert overrides, used to demote plans that were turned down before.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OverrideLedger {
    entries: Vec<LedgerEntry>,
    rejection_penalty: f64,
    floor: f64,
}

impl Default for OverrideLedger {
    fn default() -> Self {
        Self::new(DEFAULT_REJECTION_PENALTY, DEFAULT_PENALTY_FLOOR)
    }
}

impl OverrideLedger {
    /// `rejection_penalty` and `floor` are clamped into (0, 1].
    pub fn new(rejection_penalty: f64, floor: f64) -> Self {
        let unit = |x: f64| if x > 0.0 && x <= 1.0 { x } else { 1.0 };
        Self {
            entries: Vec::new(),
            rejection_penalty: unit(rejection_penalty),
            floor: unit(floor),
        }
    }

    pub fn record(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn rejections(&self, scenario_id: &str, plan_id: &str) -> usize {
        self.entries
            .iter()
            .filter(|e| e.verdict == Verdict::Reject && e.scenario_id == scenario_id && e.plan_id == plan_id)
            .count()
    }

    /// `max(penalty^rejections, floor)`, always in (0, 1].
    pub fn penalty(&self, scenario_id: &str, plan_id: &str) -> f64 {
        let n = self.rejections(scenario_id, plan_id);
        if n == 0 {
            return 1.0;
        }
        pow(self.rejection_penalty, n as f64).max(self.floor)
    }
}
