//! Discrete policy tables, the auxiliary action-value table and the
//! percentile-to-reward mapping shared by both learners.

use rand::Rng;

/// Row-stochastic table of action probabilities, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    states: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    /// Equiprobable table.
    pub fn uniform(states: usize, actions: usize) -> Self {
        assert!(states > 0 && actions > 0);
        Self { states, actions, probs: vec![1.0 / actions as f64; states * actions] }
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.actions..(state + 1) * self.actions]
    }

    fn row_mut(&mut self, state: usize) -> &mut [f64] {
        &mut self.probs[state * self.actions..(state + 1) * self.actions]
    }

    /// Overwrites one row; the caller guarantees it is a distribution.
    pub fn set_row(&mut self, state: usize, row: &[f64]) {
        assert_eq!(row.len(), self.actions);
        self.row_mut(state).copy_from_slice(row);
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.actions + action]
    }

    /// Samples an action from row `state`. Consumes exactly one `f64` draw.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> usize {
        sample_row(self.row(state), rng)
    }

    /// Applies the direct-policy-search update `|reward|` times.
    ///
    /// A positive reward pulls `action` toward 1 and every other entry toward
    /// 0 at rate `beta`. A negative reward pushes `action` toward 0 and hands
    /// the freed mass to the remaining actions in proportion to their current
    /// weight (uniformly if they are all zero).
    pub fn update(&mut self, state: usize, action: usize, reward: i32, beta: f64) {
        debug_assert!(beta > 0.0 && beta < 1.0, "learning rate out of range: {beta}");
        let row = self.row_mut(state);
        for _ in 0..reward.unsigned_abs() {
            if reward > 0 {
                for (a, p) in row.iter_mut().enumerate() {
                    if a == action {
                        *p += beta * (1.0 - *p);
                    } else {
                        *p += beta * (0.0 - *p);
                    }
                }
            } else {
                let taken = row[action];
                let freed = beta * taken;
                let rest = 1.0 - taken;
                row[action] = taken - freed;
                let others = row.len() - 1;
                for (a, p) in row.iter_mut().enumerate() {
                    if a == action {
                        continue;
                    }
                    if rest > 0.0 {
                        *p += freed * (*p / rest);
                    } else {
                        *p += freed / others as f64;
                    }
                }
            }
            renormalize(row);
        }
        debug_assert!(row_is_distribution(row), "policy row left the simplex: {row:?}");
    }

    /// Whether every row is a distribution to within `1e-9`.
    pub fn is_stochastic(&self) -> bool {
        (0..self.states).all(|s| row_is_distribution(self.row(s)))
    }

    /// Whether every entry equals `1 / action_count` exactly.
    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.actions as f64;
        self.probs.iter().all(|&p| p == u)
    }
}

fn renormalize(row: &mut [f64]) {
    for p in row.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let sum: f64 = row.iter().sum();
    if sum > 0.0 && sum != 1.0 {
        row.iter_mut().for_each(|p| *p /= sum);
    }
}

fn row_is_distribution(row: &[f64]) -> bool {
    row.iter().all(|&p| (0.0..=1.0).contains(&p)) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

/// Inverse-CDF sampling over a probability row with one uniform draw.
pub fn sample_row<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (a, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = a;
            if u < acc {
                return a;
            }
        }
    }
    // u landed in the rounding gap above the accumulated sum
    last_positive
}

/// Running-mean payoff per (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionValueTable {
    actions: usize,
    values: Vec<f64>,
    counts: Vec<u32>,
}

impl ActionValueTable {
    pub fn new(states: usize, actions: usize) -> Self {
        Self { actions, values: vec![0.0; states * actions], counts: vec![0; states * actions] }
    }

    pub fn value(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.actions + action]
    }

    pub fn count(&self, state: usize, action: usize) -> u32 {
        self.counts[state * self.actions + action]
    }

    /// Folds `payoff` into the running mean of cell `(state, action)`.
    pub fn update(&mut self, state: usize, action: usize, payoff: f64) {
        let i = state * self.actions + action;
        self.counts[i] += 1;
        self.values[i] += (payoff - self.values[i]) / f64::from(self.counts[i]);
    }

    /// Largest value in row `state`.
    pub fn row_max(&self, state: usize) -> f64 {
        self.values[state * self.actions..(state + 1) * self.actions].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Maps a percentile to the discrete reward set `{4, 2, 1, -1, -2, -4}`,
/// lowest percentiles earning the largest reward.
pub fn reward_for_percentile(p: f64) -> i32 {
    match p {
        p if p < 0.05 => 4,
        p if p < 0.25 => 2,
        p if p < 0.50 => 1,
        p if p < 0.75 => -1,
        p if p < 0.95 => -2,
        _ => -4,
    }
}
