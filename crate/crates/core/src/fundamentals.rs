//! Fundamental values: a multiplicative jump process per stock, and each
//! agent's persistently biased view of it.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::config::DAYS_PER_YEAR;

/// Amplitude at which the default jump statistics hold; other amplitudes
/// scale jump sizes linearly.
pub const REFERENCE_AMPLITUDE: f64 = 0.5;
/// Mean number of jumps per trading year.
pub const ANNUAL_JUMP_RATE: f64 = 12.70;
/// Mean relative jump size at the reference amplitude.
pub const MEAN_JUMP_SIZE: f64 = 0.059;
/// Standard deviation of the relative jump size at the reference amplitude.
pub const JUMP_SIZE_SD: f64 = 0.0184;
/// Persistence of the relative valuation error.
pub const VIEW_PERSISTENCE: f64 = 0.97;
/// Stationary mean absolute relative error of an agent's view.
pub const VIEW_MEAN_ABS_ERROR: f64 = 0.0237;

const MIN_LEVEL: f64 = 1e-6;
const MIN_VIEW_FACTOR: f64 = 0.05;

/// True fundamental value of one stock over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSeries {
    pub values: Vec<f64>,
    /// Steps at which the level changed (value at `t` differs from `t - 1`).
    pub jump_times: Vec<usize>,
    pub amplitude: f64,
}

/// Draws a fundamental series of `len` steps.
///
/// Jumps arrive independently each step with probability
/// `ANNUAL_JUMP_RATE / 252`; each multiplies the level by `1 ± A`, the sign
/// fair and `A` a normal truncated to positive values whose mean and spread
/// scale with `amplitude / REFERENCE_AMPLITUDE`. The starting level is
/// uniform on `[80, 120]`.
pub fn generate_fundamental<R: Rng + ?Sized>(len: usize, amplitude: f64, rng: &mut R) -> FundamentalSeries {
    let scale = amplitude / REFERENCE_AMPLITUDE;
    let p_jump = ANNUAL_JUMP_RATE / DAYS_PER_YEAR as f64;
    let mut level = rng.random_range(80.0..=120.0);
    let mut values = Vec::with_capacity(len);
    let mut jump_times = Vec::new();
    for t in 0..len {
        if t > 0 {
            let arrives = rng.random::<f64>() < p_jump;
            let up = rng.random::<bool>();
            let size = positive_normal(MEAN_JUMP_SIZE * scale, JUMP_SIZE_SD * scale, rng);
            if arrives && size > 0.0 {
                let next = if up { level * (1.0 + size) } else { level * (1.0 - size) };
                let next = next.max(MIN_LEVEL);
                if next != level {
                    level = next;
                    jump_times.push(t);
                }
            }
        }
        values.push(level);
    }
    FundamentalSeries { values, jump_times, amplitude }
}

fn positive_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd <= 0.0 {
        return mean.max(0.0);
    }
    let dist = Normal::new(mean, sd).expect("finite normal parameters");
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// Summary of a fundamental series' jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpStatistics {
    pub annual_jump_count: f64,
    /// Mean of `|Δv / v_prev|` over jumps, 0 when there are none.
    pub mean_amplitude: f64,
}

pub fn jump_statistics(values: &[f64]) -> JumpStatistics {
    let mut jumps = 0usize;
    let mut total = 0.0;
    for w in values.windows(2) {
        if w[1] != w[0] {
            jumps += 1;
            total += ((w[1] - w[0]) / w[0]).abs();
        }
    }
    let years = values.len() as f64 / DAYS_PER_YEAR as f64;
    JumpStatistics {
        annual_jump_count: if years > 0.0 { jumps as f64 / years } else { 0.0 },
        mean_amplitude: if jumps > 0 { total / jumps as f64 } else { 0.0 },
    }
}

/// Parameters of one agent's error process on one stock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewParams {
    pub persistence: f64,
    /// Target stationary mean of the absolute relative error.
    pub noise_scale: f64,
}

impl Default for ViewParams {
    fn default() -> Self {
        Self { persistence: VIEW_PERSISTENCE, noise_scale: VIEW_MEAN_ABS_ERROR }
    }
}

impl ViewParams {
    /// Stationary standard deviation of the relative error.
    fn stationary_sd(&self) -> f64 {
        self.noise_scale * (std::f64::consts::PI / 2.0).sqrt()
    }

    fn innovation_sd(&self) -> f64 {
        self.stationary_sd() * (1.0 - self.persistence * self.persistence).sqrt()
    }
}

/// AR(1) relative valuation error, stepped once per trading day.
#[derive(Debug, Clone)]
pub struct BiasProcess {
    params: ViewParams,
    error: f64,
}

impl BiasProcess {
    /// Starts from a draw of the stationary distribution.
    pub fn new<R: Rng + ?Sized>(params: ViewParams, rng: &mut R) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        Self { params, error: z * params.stationary_sd() }
    }

    pub fn error(&self) -> f64 {
        self.error
    }

    /// The agent's view of `true_value` under the current error.
    pub fn view(&self, true_value: f64) -> f64 {
        true_value * (1.0 + self.error).max(MIN_VIEW_FACTOR)
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let z: f64 = StandardNormal.sample(rng);
        self.error = self.params.persistence * self.error + self.params.innovation_sd() * z;
    }
}

/// One agent's biased view of a fundamental series.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalView {
    pub values: Vec<f64>,
    pub params: ViewParams,
}

pub fn approximate_fundamental<R: Rng + ?Sized>(
    series: &FundamentalSeries,
    params: ViewParams,
    rng: &mut R,
) -> FundamentalView {
    let mut bias = BiasProcess::new(params, rng);
    let mut values = Vec::with_capacity(series.values.len());
    for (t, &v) in series.values.iter().enumerate() {
        if t > 0 {
            bias.advance(rng);
        }
        values.push(bias.view(v));
    }
    FundamentalView { values, params }
}

/// Mean of `|true - view| / true` over a run.
pub fn mean_relative_bias(truth: &[f64], view: &[f64]) -> f64 {
    let n = truth.len().min(view.len());
    if n == 0 {
        return 0.0;
    }
    truth.iter().zip(view).map(|(t, b)| ((t - b) / t).abs()).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    #[test]
    fn zero_amplitude_is_flat() {
        let mut rng = stream(9, Purpose::Fundamental, 0, 0);
        let f = generate_fundamental(2875, 0.0, &mut rng);
        assert!(f.jump_times.is_empty());
        assert!(f.values.iter().all(|&v| v == f.values[0]));
        assert!((80.0..=120.0).contains(&f.values[0]));
    }

    #[test]
    fn piecewise_constant_between_jumps() {
        let mut rng = stream(10, Purpose::Fundamental, 0, 0);
        let f = generate_fundamental(2875, 1.5, &mut rng);
        for t in 1..f.values.len() {
            let jumped = f.jump_times.binary_search(&t).is_ok();
            assert_eq!(jumped, f.values[t] != f.values[t - 1]);
        }
        assert!(f.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn statistics_of_constructed_series() {
        let flat = vec![100.0; 252];
        let s = jump_statistics(&flat);
        assert_eq!((s.annual_jump_count, s.mean_amplitude), (0.0, 0.0));

        let mut v = vec![100.0; 252];
        v[50..].iter_mut().for_each(|x| *x = 110.0);
        v[150..].iter_mut().for_each(|x| *x = 121.0);
        let s = jump_statistics(&v);
        assert!((s.annual_jump_count - 2.0).abs() < 1e-12);
        assert!((s.mean_amplitude - 0.10).abs() < 1e-12);
    }

    #[test]
    fn generator_round_trips_through_statistics() {
        let (mut count, mut amp) = (0.0, 0.0);
        for seed in 0..40 {
            let mut rng = stream(seed, Purpose::Fundamental, 0, 0);
            let s = jump_statistics(&generate_fundamental(2875, REFERENCE_AMPLITUDE, &mut rng).values);
            count += s.annual_jump_count / 40.0;
            amp += s.mean_amplitude / 40.0;
        }
        assert!((count - ANNUAL_JUMP_RATE).abs() < 0.5, "{count}");
        assert!((amp - MEAN_JUMP_SIZE).abs() < 0.003, "{amp}");
    }

    #[test]
    fn amplitude_scales_linearly() {
        let mean_amp = |nu: f64| {
            (0..20)
                .map(|seed| {
                    let mut rng = stream(seed, Purpose::Fundamental, 0, 0);
                    jump_statistics(&generate_fundamental(2875, nu, &mut rng).values).mean_amplitude
                })
                .sum::<f64>()
                / 20.0
        };
        let ratio = mean_amp(1.0) / mean_amp(0.5);
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn zero_noise_view_is_exact() {
        let mut rng = stream(11, Purpose::Fundamental, 0, 0);
        let f = generate_fundamental(600, 0.5, &mut rng);
        let params = ViewParams { noise_scale: 0.0, ..ViewParams::default() };
        let v = approximate_fundamental(&f, params, &mut stream(11, Purpose::FundamentalView, 0, 0));
        assert_eq!(v.values, f.values);
    }

    #[test]
    fn different_agents_see_different_views() {
        let f = generate_fundamental(600, 0.5, &mut stream(12, Purpose::Fundamental, 0, 0));
        let a = approximate_fundamental(&f, ViewParams::default(), &mut stream(12, Purpose::FundamentalView, 0, 0));
        let b = approximate_fundamental(&f, ViewParams::default(), &mut stream(12, Purpose::FundamentalView, 1, 0));
        assert_ne!(a.values, b.values);
    }

    #[test]
    fn view_tracks_truth_with_target_bias() {
        let mut total = 0.0;
        for seed in 0..20 {
            let f = generate_fundamental(2875, 0.5, &mut stream(seed, Purpose::Fundamental, 0, 0));
            let v =
                approximate_fundamental(&f, ViewParams::default(), &mut stream(seed, Purpose::FundamentalView, 0, 0));
            total += mean_relative_bias(&f.values, &v.values) / 20.0;
        }
        assert!((total - VIEW_MEAN_ABS_ERROR).abs() < 0.006, "{total}");
    }

    #[test]
    fn view_positive_over_long_horizon() {
        let params = ViewParams { noise_scale: 0.5, ..ViewParams::default() };
        let mut rng = stream(13, Purpose::FundamentalView, 0, 0);
        let mut bias = BiasProcess::new(params, &mut rng);
        for _ in 0..1_000_000 {
            bias.advance(&mut rng);
            assert!(bias.view(1.0) > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fundamentals_positive(seed in any::<u64>(), nu in 0.0f64..3.0) {
            let f = generate_fundamental(1000, nu, &mut stream(seed, Purpose::Fundamental, 0, 0));
            prop_assert!(f.values.iter().all(|&v| v > 0.0));
        }
    }
}
