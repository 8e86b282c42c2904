//! Many-objective controller: one Q-table per requirement, acting each step
//! from the table of the uncovered objective with the highest reward at the
//! previous step.

use super::actions::ActionId;
use super::qtable::{q_select, q_update, QTable};
use super::{StateKey, Transition};
use crate::monitors::{Requirement, RequirementSet, REQUIREMENT_COUNT};
use rand::RngCore;

#[derive(Debug, Clone)]
pub struct MorlotState {
    tables: [QTable; REQUIREMENT_COUNT],
    uncovered: Vec<Requirement>,
    /// Per-requirement reward observed on the previous step; all zeros at
    /// campaign start so the first selection falls to requirement order.
    pub last_reward: [f64; REQUIREMENT_COUNT],
}

impl Default for MorlotState {
    fn default() -> Self {
        Self::new()
    }
}

impl MorlotState {
    pub fn new() -> Self {
        MorlotState {
            tables: Default::default(),
            uncovered: Requirement::ALL.to_vec(),
            last_reward: [0.0; REQUIREMENT_COUNT],
        }
    }

    pub fn uncovered(&self) -> &[Requirement] {
        &self.uncovered
    }

    pub fn is_covered(&self, req: Requirement) -> bool {
        !self.uncovered.contains(&req)
    }

    pub fn table(&self, req: Requirement) -> &QTable {
        &self.tables[req.index()]
    }

    /// Remove newly covered objectives from the uncovered list.
    pub fn mark_covered(&mut self, covered: RequirementSet) {
        self.uncovered.retain(|r| !covered.contains(*r));
    }

    /// The uncovered objective closest to being covered: highest reward at
    /// the previous step, ties resolved by requirement order.
    pub fn closest_objective(&self) -> Option<Requirement> {
        let mut best: Option<Requirement> = None;
        for &req in &self.uncovered {
            match best {
                None => best = Some(req),
                Some(b) if self.last_reward[req.index()] > self.last_reward[b.index()] => {
                    best = Some(req)
                }
                _ => {}
            }
        }
        best
    }
}

/// Pick the requirement whose table drives this step, then epsilon-greedy
/// select from that table. Returns `None` once every objective is covered;
/// the campaign then keeps logging without learned guidance.
pub fn morlot_select<R: RngCore>(
    m: &mut MorlotState,
    key: &StateKey,
    epsilon: f64,
    rng: &mut R,
) -> Option<(ActionId, Requirement)> {
    let req = m.closest_objective()?;
    let action = q_select(&mut m.tables[req.index()], key, epsilon, rng);
    Some((action, req))
}

/// Update every uncovered objective's table with its own reward component,
/// refresh the previous-step rewards, and retire objectives whose violation
/// latched this step (after their final update).
pub fn morlot_update(
    m: &mut MorlotState,
    t: &Transition,
    newly_covered: RequirementSet,
    alpha: f64,
    gamma: f64,
) {
    for &req in &m.uncovered {
        q_update(
            &mut m.tables[req.index()],
            &t.state_key,
            t.action,
            t.reward[req.index()],
            &t.next_state_key,
            alpha,
            gamma,
        );
    }
    m.last_reward = t.reward;
    m.uncovered.retain(|r| !newly_covered.contains(*r));
}
