//! Dynamic Q-table over text state keys.
//!
//! The table starts empty and grows a zero-initialized row the first time a
//! state is encountered, either by a greedy lookup or by an update. With
//! full-precision keys over continuous state variables, rows virtually never
//! repeat, which is exactly the degeneracy this testbed measures.

use super::actions::{random_select, ActionId, ACTION_COUNT};
use super::StateKey;
use rand::RngCore;
use std::collections::HashMap;
use std::io::Write;

#[derive(Debug, Clone, Default)]
pub struct QTable {
    rows: HashMap<String, [f64; ACTION_COUNT]>,
    /// Number of state encounters (row lookups by select or update).
    pub visits: u64,
}

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct states seen so far (the table's row count).
    pub fn distinct_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, key: &StateKey) -> Option<&[f64; ACTION_COUNT]> {
        self.rows.get(key.as_str())
    }

    fn ensure_row(&mut self, key: &StateKey) -> &mut [f64; ACTION_COUNT] {
        self.visits += 1;
        self.rows
            .entry(key.as_str().to_owned())
            .or_insert([0.0; ACTION_COUNT])
    }

    /// CSV dump: state key plus the 17 action values, sorted by key for
    /// reproducible output.
    pub fn export_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "state_key")?;
        for a in ActionId::all() {
            write!(w, ",{}", a.label())?;
        }
        writeln!(w)?;
        let mut keys: Vec<&String> = self.rows.keys().collect();
        keys.sort();
        for k in keys {
            write!(w, "{k}")?;
            for v in &self.rows[k] {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Greedy argmax with ties broken by the lowest action id.
pub fn argmax(row: &[f64; ACTION_COUNT]) -> ActionId {
    let mut best = 0usize;
    for i in 1..ACTION_COUNT {
        if row[i] > row[best] {
            best = i;
        }
    }
    ActionId(best as u8)
}

/// Epsilon-greedy selection. A fully exploring agent (`epsilon >= 1`)
/// consumes exactly the one generator word of [`random_select`], so its
/// action stream matches the random baseline's under a shared seed.
pub fn q_select<R: RngCore>(
    table: &mut QTable,
    key: &StateKey,
    epsilon: f64,
    rng: &mut R,
) -> ActionId {
    if epsilon >= 1.0 {
        return random_select(rng);
    }
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    if u < epsilon {
        random_select(rng)
    } else {
        argmax(table.ensure_row(key))
    }
}

/// One-step Q-learning update; returns the new cell value. Encountering an
/// unseen next state materializes its zero row (and grows the table), then
/// bootstraps from it.
pub fn q_update(
    table: &mut QTable,
    key: &StateKey,
    action: ActionId,
    reward: f64,
    next_key: &StateKey,
    alpha: f64,
    gamma: f64,
) -> f64 {
    let next_row = table
        .rows
        .entry(next_key.as_str().to_owned())
        .or_insert([0.0; ACTION_COUNT]);
    let max_next = next_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cell = &mut table.ensure_row(key)[action.index()];
    *cell += alpha * (reward + gamma * max_next - *cell);
    *cell
}
