use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::abstraction::AbstractState;
use crate::environment::Action;
use crate::error::{Error, Result};

/// How the TD step size evolves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSchedule {
    Constant,
    /// `alpha / (1 + visits / scale)`, counted per state-action pair.
    VisitDecay { scale: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of training episodes over which epsilon anneals linearly.
    pub eps_decay_fraction: f64,
    pub seed: u64,
    pub alpha_schedule: AlphaSchedule,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.1,
            gamma: 0.95,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.8,
            seed: 0,
            alpha_schedule: AlphaSchedule::Constant,
        }
    }
}

impl Hyperparams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        // gamma = 1 is allowed for the undiscounted variant
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma must be in [0, 1], got {}", self.gamma)));
        }
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return Err(Error::config(format!(
                "need 0 <= eps_end <= eps_start <= 1, got {} and {}",
                self.eps_end, self.eps_start
            )));
        }
        if !(0.0..=1.0).contains(&self.eps_decay_fraction) {
            return Err(Error::config(format!(
                "eps decay fraction must be in [0, 1], got {}",
                self.eps_decay_fraction
            )));
        }
        if let AlphaSchedule::VisitDecay { scale } = self.alpha_schedule {
            if scale.is_nan() || scale <= 0.0 {
                return Err(Error::config("visit decay scale must be positive"));
            }
        }
        Ok(())
    }

    /// Exploration rate for a 0-based training episode.
    pub fn epsilon_at(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = self.eps_decay_fraction * episodes as f64;
        let progress = if horizon <= 0.0 {
            1.0
        } else {
            (episode as f64 / horizon).min(1.0)
        };
        self.eps_start + (self.eps_end - self.eps_start) * progress
    }
}

type Row = [f64; Action::COUNT];

/// Tabular action values keyed by abstract state. Unseen pairs read as
/// `default_value`.
#[derive(Clone, Debug)]
pub struct QTable {
    rows: HashMap<AbstractState, Row>,
    visits: HashMap<AbstractState, [u32; Action::COUNT]>,
    default_value: f64,
}

impl Default for QTable {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for QTable {
    fn eq(&self, other: &Self) -> bool {
        self.default_value.to_bits() == other.default_value.to_bits()
            && self.rows.len() == other.rows.len()
            && self.rows.iter().all(|(s, row)| {
                other.rows.get(s).is_some_and(|o| {
                    row.iter().zip(o).all(|(a, b)| a.to_bits() == b.to_bits())
                })
            })
    }
}

impl QTable {
    pub fn new() -> Self {
        Self::with_default(0.0)
    }

    pub fn with_default(default_value: f64) -> Self {
        QTable {
            rows: HashMap::new(),
            visits: HashMap::new(),
            default_value,
        }
    }

    pub fn default_value(&self) -> f64 {
        self.default_value
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, s: &AbstractState, a: Action) -> f64 {
        self.rows
            .get(s)
            .map_or(self.default_value, |row| row[a.index()])
    }

    pub fn row(&self, s: &AbstractState) -> Row {
        self.rows
            .get(s)
            .copied()
            .unwrap_or([self.default_value; Action::COUNT])
    }

    pub fn set(&mut self, s: &AbstractState, a: Action, value: f64) {
        let default = self.default_value;
        self.rows
            .entry(s.clone())
            .or_insert([default; Action::COUNT])[a.index()] = value;
    }

    pub fn contains(&self, s: &AbstractState) -> bool {
        self.rows.contains_key(s)
    }

    pub fn states(&self) -> impl Iterator<Item = &AbstractState> {
        self.rows.keys()
    }

    pub fn visits(&self, s: &AbstractState, a: Action) -> u32 {
        self.visits.get(s).map_or(0, |v| v[a.index()])
    }

    pub fn max_value(&self, s: &AbstractState) -> f64 {
        self.row(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action, ties going to the lowest action index.
    pub fn greedy(&self, s: &AbstractState) -> Action {
        argmax(&self.row(s))
    }

    /// Epsilon-greedy choice.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        s: &AbstractState,
        epsilon: f64,
        rng: &mut R,
    ) -> Action {
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            Action::ALL[rng.gen_range(0..Action::COUNT)]
        } else {
            self.greedy(s)
        }
    }

    /// One-step Q-learning update. A terminal transition does not bootstrap
    /// and never touches `s_next`. Returns the new value of `(s, a)`.
    pub fn td_update(
        &mut self,
        s: &AbstractState,
        a: Action,
        reward: f64,
        s_next: &AbstractState,
        terminal: bool,
        h: &Hyperparams,
    ) -> f64 {
        let bootstrap = if terminal {
            0.0
        } else {
            h.gamma * self.max_value(s_next)
        };
        let alpha = match h.alpha_schedule {
            AlphaSchedule::Constant => h.alpha,
            AlphaSchedule::VisitDecay { scale } => {
                let counts = self.visits.entry(s.clone()).or_insert([0; Action::COUNT]);
                let n = counts[a.index()];
                counts[a.index()] = n.saturating_add(1);
                h.alpha / (1.0 + f64::from(n) / scale)
            }
        };
        let old = self.get(s, a);
        let new = old + alpha * (reward + bootstrap - old);
        if new.to_bits() != old.to_bits() {
            self.set(s, a, new);
        }
        new
    }

    /// Entries sorted by their serialized state, then by action.
    pub fn sorted_rows(&self) -> Vec<(String, &AbstractState, &Row)> {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .map(|(s, row)| (s.to_string(), s, row))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows
    }

    /// Order-independent digest of the stored values.
    pub fn digest(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.default_value.to_bits().hash(&mut hasher);
        for (key, _, row) in self.sorted_rows() {
            key.hash(&mut hasher);
            for v in row {
                v.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }

    /// Multiplies every value of one row, used to probe argmax invariance.
    pub fn scale_row(&mut self, s: &AbstractState, factor: f64) {
        if let Some(row) = self.rows.get_mut(s) {
            row.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> Action {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    Action::ALL[best]
}
