//! Append-only price history with prefix sums for O(1) window statistics.

/// Prices of one stock indexed by step, with running sums of `P` and `P²`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriceHistory {
    prices: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl PriceHistory {
    pub fn new() -> Self {
        Self { prices: Vec::new(), sum: vec![0.0], sum_sq: vec![0.0] }
    }

    pub fn from_prices(prices: &[f64]) -> Self {
        let mut h = Self::new();
        prices.iter().for_each(|&p| h.push(p));
        h
    }

    pub fn push(&mut self, p: f64) {
        self.prices.push(p);
        self.sum.push(self.sum.last().unwrap() + p);
        self.sum_sq.push(self.sum_sq.last().unwrap() + p * p);
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn at(&self, t: usize) -> f64 {
        self.prices[t]
    }

    /// Mean over the inclusive step range `[from, to]`.
    pub fn mean(&self, from: usize, to: usize) -> f64 {
        debug_assert!(from <= to && to < self.prices.len());
        (self.sum[to + 1] - self.sum[from]) / (to + 1 - from) as f64
    }

    /// Population variance over the inclusive step range `[from, to]`.
    pub fn variance(&self, from: usize, to: usize) -> f64 {
        let n = (to + 1 - from) as f64;
        let mean = self.mean(from, to);
        let sq = (self.sum_sq[to + 1] - self.sum_sq[from]) / n;
        // cancellation can leave a tiny negative residue
        let v = sq - mean * mean;
        if v <= 1e-12 * mean * mean {
            // fall back to the two-pass formula near zero
            self.prices[from..=to].iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_statistics_match_direct_formulas() {
        let p = [100.0, 102.0, 101.0, 105.0, 99.0, 100.0];
        let h = PriceHistory::from_prices(&p);
        assert!((h.mean(1, 3) - 308.0 / 3.0).abs() < 1e-12);
        let m = p.iter().sum::<f64>() / 6.0;
        let var = p.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 6.0;
        assert!((h.variance(0, 5) - var).abs() < 1e-9);
        let flat = PriceHistory::from_prices(&[100.0; 50]);
        assert_eq!(flat.variance(3, 40), 0.0);
    }
}
