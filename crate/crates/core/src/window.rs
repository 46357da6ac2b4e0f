//! Fixed-capacity rolling windows that stay sorted for percentile lookups.

use std::collections::VecDeque;

use crate::error::SimError;

/// Largest block before it is split in two.
const MAX_BLOCK: usize = 128;

/// Rolling multiset of the last `capacity` observations, kept sorted.
///
/// The sorted entries are stored as a list of sorted blocks so that inserts
/// and evictions move at most one block's worth of data. Block maxima and
/// lengths sit in their own arrays so that locating a block stays in cache.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingPercentileWindow {
    capacity: usize,
    blocks: Vec<Vec<f64>>,
    maxima: Vec<f64>,
    lengths: Vec<u32>,
    arrivals: VecDeque<f64>,
}

impl RollingPercentileWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            capacity,
            blocks: Vec::new(),
            maxima: Vec::new(),
            lengths: Vec::new(),
            arrivals: VecDeque::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Entries in ascending order.
    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flatten().copied()
    }

    /// Entries in arrival order, oldest first.
    pub fn arrivals(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrivals.iter().copied()
    }

    /// Inserts `x`, evicting the oldest observation when full.
    pub fn insert(&mut self, x: f64) {
        assert!(!x.is_nan(), "NaN inserted into percentile window");
        if self.arrivals.len() == self.capacity {
            let old = self.arrivals.pop_front().expect("non-empty at capacity");
            self.remove(old);
        }
        self.arrivals.push_back(x);
        if self.blocks.is_empty() {
            let mut block = Vec::with_capacity(MAX_BLOCK + 1);
            block.push(x);
            self.blocks.push(block);
            self.maxima.push(x);
            self.lengths.push(1);
            return;
        }
        let k = self.maxima.partition_point(|&m| m <= x).min(self.blocks.len() - 1);
        let block = &mut self.blocks[k];
        let at = block.partition_point(|&v| v <= x);
        block.insert(at, x);
        if block.len() > MAX_BLOCK {
            let mut upper = Vec::with_capacity(MAX_BLOCK + 1);
            upper.extend(block.drain(MAX_BLOCK / 2..));
            self.maxima[k] = block[block.len() - 1];
            self.lengths[k] = block.len() as u32;
            self.maxima.insert(k + 1, upper[upper.len() - 1]);
            self.lengths.insert(k + 1, upper.len() as u32);
            self.blocks.insert(k + 1, upper);
        } else {
            self.maxima[k] = self.maxima[k].max(x);
            self.lengths[k] += 1;
        }
    }

    fn remove(&mut self, x: f64) {
        let k = self.maxima.partition_point(|&m| m < x);
        let block = &mut self.blocks[k];
        let at = block.partition_point(|&v| v < x);
        debug_assert!(block[at] == x);
        block.remove(at);
        if block.is_empty() {
            self.blocks.remove(k);
            self.maxima.remove(k);
            self.lengths.remove(k);
        } else {
            self.maxima[k] = block[block.len() - 1];
            self.lengths[k] -= 1;
        }
    }

    /// Fraction of entries strictly below `x`.
    pub fn percentile_of(&self, x: f64) -> Result<f64, SimError> {
        if self.is_empty() {
            return Err(SimError::EmptyWindow);
        }
        let k = self.maxima.partition_point(|&m| m < x);
        let mut below: usize = self.lengths[..k].iter().map(|&n| n as usize).sum();
        if let Some(block) = self.blocks.get(k) {
            below += block.partition_point(|&v| v < x);
        }
        Ok(below as f64 / self.len() as f64)
    }

    /// Inserts `x` and returns its percentile among the updated entries.
    pub fn insert_and_rank(&mut self, x: f64) -> f64 {
        self.insert(x);
        self.percentile_of(x).expect("window holds x")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filled(cap: usize, xs: &[f64]) -> RollingPercentileWindow {
        let mut w = RollingPercentileWindow::new(cap);
        xs.iter().for_each(|&x| w.insert(x));
        w
    }

    #[test]
    fn evicts_oldest_by_arrival() {
        let w = filled(3, &[5.0, 1.0, 9.0, 4.0]);
        assert_eq!(w.entries().collect::<Vec<_>>(), vec![1.0, 4.0, 9.0]);
        assert_eq!(w.arrivals().collect::<Vec<_>>(), vec![1.0, 9.0, 4.0]);
    }

    #[test]
    fn single_insert_and_unit_capacity() {
        assert_eq!(filled(4, &[7.0]).entries().collect::<Vec<_>>(), vec![7.0]);
        assert_eq!(filled(1, &[2.0, 3.0]).entries().collect::<Vec<_>>(), vec![3.0]);
    }

    #[test]
    fn strict_rank_percentile() {
        let w = filled(10, &(1..=10).map(f64::from).collect::<Vec<_>>());
        assert!((w.percentile_of(3.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(filled(3, &[5.0]).percentile_of(5.0).unwrap(), 0.0);
        assert_eq!(filled(3, &[1.0, 1.0, 1.0]).percentile_of(2.0).unwrap(), 1.0);
    }

    #[test]
    fn empty_window_has_no_history() {
        let w = RollingPercentileWindow::new(3);
        assert!(matches!(w.percentile_of(1.0), Err(SimError::EmptyWindow)));
    }

    proptest! {
        #[test]
        fn stays_sorted_and_bounded(
            cap in 1usize..1200,
            xs in prop::collection::vec(-100i32..100, 0..2000),
        ) {
            let mut w = RollingPercentileWindow::new(cap);
            for &x in &xs {
                w.insert(f64::from(x));
                prop_assert!(w.len() <= cap);
                let sorted: Vec<f64> = w.entries().collect();
                prop_assert!(sorted.windows(2).all(|p| p[0] <= p[1]));
            }
            let mut by_arrival: Vec<f64> = w.arrivals().collect();
            by_arrival.sort_by(f64::total_cmp);
            prop_assert_eq!(by_arrival, w.entries().collect::<Vec<_>>());
            let tail: Vec<f64> = xs.iter().rev().take(cap).rev().map(|&x| f64::from(x)).collect();
            prop_assert_eq!(w.arrivals().collect::<Vec<_>>(), tail);
        }

        #[test]
        fn rank_matches_linear_count(
            cap in 1usize..700,
            xs in prop::collection::vec(-30i32..30, 1..1500),
            probe in -35i32..35,
        ) {
            let w = filled(cap, &xs.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
            let below = w.arrivals().filter(|&v| v < f64::from(probe)).count();
            prop_assert_eq!(w.percentile_of(f64::from(probe)).unwrap(), below as f64 / w.len() as f64);
        }

        #[test]
        fn percentile_monotone_in_x(
            xs in prop::collection::vec(-50i32..50, 1..60),
            a in -60i32..60,
            b in -60i32..60,
        ) {
            let w = filled(32, &xs.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
            let (lo, hi) = (a.min(b) as f64, a.max(b) as f64);
            prop_assert!(w.percentile_of(lo).unwrap() <= w.percentile_of(hi).unwrap());
        }
    }
}
