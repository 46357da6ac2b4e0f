//! Market-microstructure statistics shared by simulated and real data.
//!
//! Every metric is computed from daily prices and volumes only, so the same
//! code serves a [`RunResult`] and an ingested CSV.

use crate::config::{DAYS_PER_MONTH, DAYS_PER_WEEK, DAYS_PER_YEAR};
use crate::engine::RunResult;
use crate::error::{Result, SimError};

/// `log(P(t)/P(t-1))` for every consecutive pair.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some(index) = prices.iter().position(|&p| p <= 0.0 || !p.is_finite()) {
        return Err(SimError::NonPositivePrice { index, price: prices[index] });
    }
    if prices.len() < 2 {
        return Err(SimError::SeriesTooShort { needed: 2, got: prices.len() });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Pearson correlation, or `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    debug_assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // relative guard: rounding noise in a constant window is not variance
    let scale = |m: f64| 1e-24 * (m * m).max(1e-300) * a.len() as f64;
    if saa <= scale(ma) || sbb <= scale(mb) {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// `σ/P(t)` of the prices over `[t-Δ, t]`, for every `t ≥ Δ`.
pub fn volatility_series(prices: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag < 2 {
        return Err(SimError::InvalidParameter(format!("volatility lag must be at least 2, got {lag}")));
    }
    if prices.len() <= lag {
        return Err(SimError::SeriesTooShort { needed: lag + 1, got: prices.len() });
    }
    Ok((lag..prices.len()).map(|t| variance(&prices[t - lag..=t]).sqrt() / prices[t]).collect())
}

/// Correlations with the number of windows skipped for zero variance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correlations {
    pub values: Vec<f64>,
    pub skipped: usize,
}

impl Correlations {
    pub fn mean(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| mean(&self.values))
    }
}

/// Correlation of `[t-L, t]` against `[t-L-δ, t-δ]` at each admissible `t`.
pub fn blended_autocorr(series: &[f64], len: usize, shift: usize) -> Result<Correlations> {
    if shift < 1 || len < 1 {
        return Err(SimError::InvalidParameter(format!("window {len} and shift {shift} must be positive")));
    }
    if series.len() < len + shift + 1 {
        return Err(SimError::SeriesTooShort { needed: len + shift + 1, got: series.len() });
    }
    let mut out = Correlations::default();
    for t in len + shift..series.len() {
        match pearson(&series[t - len..=t], &series[t - len - shift..=t - shift]) {
            Some(r) => out.values.push(r),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Correlation of `[t-Δ, t]` against the preceding `[t-2Δ, t-Δ]`.
pub fn adjacent_autocorr(series: &[f64], lag: usize) -> Result<Correlations> {
    blended_autocorr(series, lag, lag)
}

/// Mean blended autocorrelation for each shift.
pub fn mean_blended_autocorr(series: &[f64], len: usize, shifts: &[usize]) -> Result<Vec<Option<f64>>> {
    shifts.iter().map(|&d| Ok(blended_autocorr(series, len, d)?.mean())).collect()
}

/// Signed lengths of maximal strictly rising (+) and falling (−) runs.
/// Unchanged days end a run and belong to none.
pub fn run_lengths(prices: &[f64]) -> Vec<i64> {
    let mut runs = Vec::new();
    let mut current: i64 = 0;
    for w in prices.windows(2) {
        let dir = if w[1] > w[0] {
            1
        } else if w[1] < w[0] {
            -1
        } else {
            0
        };
        if dir == 0 || (current != 0 && current.signum() != dir) {
            if current != 0 {
                runs.push(current);
            }
            current = dir;
        } else {
            current += dir;
        }
    }
    if current != 0 {
        runs.push(current);
    }
    runs
}

/// Excess kurtosis (population moments); zero for a degenerate sample.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let v = variance(xs);
    if v <= 0.0 {
        return 0.0;
    }
    xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / xs.len() as f64 / (v * v) - 3.0
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Bin edges and counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

const MAX_BINS: usize = 500;

/// Freedman–Diaconis bin edges covering `sample`.
pub fn fd_edges(sample: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = sample.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return vec![-0.5, 0.5];
    }
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    if hi <= lo {
        return vec![lo - 0.5, lo + 0.5];
    }
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let width = 2.0 * iqr / (s.len() as f64).cbrt();
    let bins = if width > 0.0 { ((hi - lo) / width).ceil() as usize } else { 1 }.clamp(1, MAX_BINS);
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|k| lo + step * k as f64).collect();
    edges.push(hi);
    edges
}

/// Counts per bin; the last bin is closed, values outside the edges are dropped.
pub fn histogram(sample: &[f64], edges: &[f64]) -> Histogram {
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    let (lo, hi) = (edges[0], edges[bins]);
    for &x in sample {
        if !(x >= lo && x <= hi) {
            continue;
        }
        let k = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges: edges.to_vec(), counts }
}

/// The nine metric families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    LogReturns,
    Volatility,
    ReturnAutocorr,
    VolatilityAutocorr,
    VolumeAutocorr,
    BlendedAutocorr,
    BlendedMeansWeek,
    BlendedMeansFortnight,
    RunLengths,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::LogReturns,
        Family::Volatility,
        Family::ReturnAutocorr,
        Family::VolatilityAutocorr,
        Family::VolumeAutocorr,
        Family::BlendedAutocorr,
        Family::BlendedMeansWeek,
        Family::BlendedMeansFortnight,
        Family::RunLengths,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LogReturns => "log_returns",
            Family::Volatility => "volatility",
            Family::ReturnAutocorr => "return_autocorr",
            Family::VolatilityAutocorr => "volatility_autocorr",
            Family::VolumeAutocorr => "volume_autocorr",
            Family::BlendedAutocorr => "blended_autocorr",
            Family::BlendedMeansWeek => "blended_means_week",
            Family::BlendedMeansFortnight => "blended_means_fortnight",
            Family::RunLengths => "run_lengths",
        }
    }

    pub fn from_name(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Lags or shifts evaluated for the family; `0` when it has none.
    pub fn params(self) -> &'static [usize] {
        const LAGS: [usize; 3] = [2 * DAYS_PER_WEEK, 3 * DAYS_PER_MONTH, DAYS_PER_YEAR];
        match self {
            Family::LogReturns | Family::RunLengths => &[0],
            Family::Volatility | Family::ReturnAutocorr | Family::VolumeAutocorr => &LAGS,
            Family::VolatilityAutocorr => &[2 * DAYS_PER_WEEK],
            Family::BlendedAutocorr | Family::BlendedMeansWeek => &[1, 2, 3, 4, 5],
            Family::BlendedMeansFortnight => &[2, 4, 6, 8, 10],
        }
    }
}

/// Pooled sample of one metric at one lag or shift.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricDistribution {
    pub family: Family,
    pub param: usize,
    pub values: Vec<f64>,
    /// Windows dropped for zero variance, or series too short for the lag.
    pub skipped: usize,
}

impl MetricDistribution {
    pub fn histogram(&self) -> Histogram {
        histogram(&self.values, &fd_edges(&self.values))
    }
}

/// Daily prices and volumes of one stock.
#[derive(Debug, Clone, Copy)]
pub struct DailySeries<'a> {
    pub prices: &'a [f64],
    pub volumes: &'a [f64],
}

/// All metric distributions, pooled over the given series, in family order.
pub fn compute_metrics(series: &[DailySeries<'_>]) -> Result<Vec<MetricDistribution>> {
    let mut out = Vec::new();
    for family in Family::ALL {
        for &param in family.params() {
            let mut dist = MetricDistribution { family, param, values: Vec::new(), skipped: 0 };
            for s in series {
                collect_metric(&mut dist, s)?;
            }
            out.push(dist);
        }
    }
    Ok(out)
}

fn extend(dist: &mut MetricDistribution, result: Result<Correlations>) -> Result<()> {
    match result {
        Ok(c) => {
            dist.values.extend(c.values);
            dist.skipped += c.skipped;
            Ok(())
        }
        Err(SimError::SeriesTooShort { .. }) => {
            dist.skipped += 1;
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn collect_metric(dist: &mut MetricDistribution, s: &DailySeries<'_>) -> Result<()> {
    let p = dist.param;
    let week = DAYS_PER_WEEK;
    match dist.family {
        Family::LogReturns => dist.values.extend(log_returns(s.prices)?),
        Family::Volatility => match volatility_series(s.prices, p) {
            Ok(v) => dist.values.extend(v),
            Err(SimError::SeriesTooShort { .. }) => dist.skipped += 1,
            Err(e) => return Err(e),
        },
        Family::ReturnAutocorr => extend(dist, adjacent_autocorr(&log_returns(s.prices)?, p))?,
        Family::VolatilityAutocorr => match volatility_series(s.prices, p) {
            Ok(v) => extend(dist, adjacent_autocorr(&v, p))?,
            Err(SimError::SeriesTooShort { .. }) => dist.skipped += 1,
            Err(e) => return Err(e),
        },
        Family::VolumeAutocorr => extend(dist, adjacent_autocorr(s.volumes, p))?,
        Family::BlendedAutocorr => extend(dist, blended_autocorr(&log_returns(s.prices)?, week, p))?,
        Family::BlendedMeansWeek | Family::BlendedMeansFortnight => {
            let len = if dist.family == Family::BlendedMeansWeek { week } else { 2 * week };
            match blended_autocorr(&log_returns(s.prices)?, len, p) {
                Ok(c) => match c.mean() {
                    Some(m) => dist.values.push(m),
                    None => dist.skipped += 1,
                },
                Err(SimError::SeriesTooShort { .. }) => dist.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Family::RunLengths => dist.values.extend(run_lengths(s.prices).into_iter().map(|r| r as f64)),
    }
    Ok(())
}

/// Daily series of every stock of every run.
pub fn run_series(results: &[RunResult]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut prices = Vec::new();
    let mut volumes = Vec::new();
    for r in results {
        for j in 0..r.prices.len() {
            prices.push(r.prices[j].clone());
            volumes.push(r.volumes[j].iter().map(|&v| v as f64).collect());
        }
    }
    (prices, volumes)
}

/// Metrics pooled over a batch of runs.
pub fn batch_metrics(results: &[RunResult]) -> Result<Vec<MetricDistribution>> {
    let (prices, volumes) = run_series(results);
    let series: Vec<DailySeries<'_>> =
        prices.iter().zip(&volumes).map(|(p, v)| DailySeries { prices: p, volumes: v }).collect();
    compute_metrics(&series)
}

/// Distance between a simulated and a reference distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub family: Family,
    pub param: usize,
    pub ks: f64,
    pub mean_diff: f64,
    pub variance_diff: f64,
    pub sim_count: usize,
    pub real_count: usize,
}

/// Compares two samples of the same metric.
pub fn compare(sim: &MetricDistribution, real: &MetricDistribution) -> Result<Comparison> {
    if sim.values.is_empty() || real.values.is_empty() {
        return Err(SimError::InvalidParameter(format!(
            "cannot compare {} at {}: empty sample",
            sim.family.name(),
            sim.param
        )));
    }
    Ok(Comparison {
        family: sim.family,
        param: sim.param,
        ks: ks_statistic(&sim.values, &real.values),
        mean_diff: mean(&sim.values) - mean(&real.values),
        variance_diff: variance(&sim.values) - variance(&real.values),
        sim_count: sim.values.len(),
        real_count: real.values.len(),
    })
}

/// Compares matching distributions; pairs with an empty side are omitted.
pub fn compare_all(sim: &[MetricDistribution], real: &[MetricDistribution]) -> Vec<Comparison> {
    sim.iter()
        .filter_map(|s| {
            let r = real.iter().find(|r| r.family == s.family && r.param == s.param)?;
            compare(s, r).ok()
        })
        .collect()
}

/// Mean KS per family, then the mean over families.
/// A family with no comparable sample scores 1, the worst KS value.
pub fn family_scores(comparisons: &[Comparison]) -> Vec<(Family, f64)> {
    Family::ALL
        .iter()
        .map(|&f| {
            let ks: Vec<f64> = comparisons.iter().filter(|c| c.family == f).map(|c| c.ks).collect();
            (f, if ks.is_empty() { 1.0 } else { mean(&ks) })
        })
        .collect()
}

/// Shared edges for plotting a simulated and a real sample together.
pub fn shared_histograms(sim: &[f64], real: &[f64]) -> (Histogram, Histogram) {
    let pooled: Vec<f64> = sim.iter().chain(real).copied().collect();
    let edges = fd_edges(&pooled);
    (histogram(sim, &edges), histogram(real, &edges))
}

/// `NAV(t)/NAV(t-T_y) - 1` at each year boundary `t = T_y, 2T_y, ...`.
pub fn annual_returns(nav: &[f64]) -> Vec<f64> {
    (DAYS_PER_YEAR..nav.len()).step_by(DAYS_PER_YEAR).map(|t| ratio_return(nav[t], nav[t - DAYS_PER_YEAR])).collect()
}

fn ratio_return(now: f64, base: f64) -> f64 {
    if base > 0.0 {
        now / base - 1.0
    } else {
        0.0
    }
}

/// Return since the last year boundary at or before `t`.
pub fn ytd_return(nav: &[f64], t: usize) -> f64 {
    ratio_return(nav[t], nav[t - t % DAYS_PER_YEAR])
}

/// Indices of the best tenth of agents by NAV at `t` (at least one).
pub fn top_decile(nav: &[Vec<f64>], t: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..nav.len()).collect();
    order.sort_by(|&a, &b| nav[b][t].total_cmp(&nav[a][t]).then(a.cmp(&b)));
    order.truncate((nav.len() / 10).max(1));
    order
}

/// Averaged top-decile curves of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurves {
    /// First day of the evaluation window.
    pub start: usize,
    /// Mean YTD return per day of `[start, T)`.
    pub ytd: Vec<f64>,
    /// Element-wise mean of each run's sorted top-decile annual returns.
    pub sorted_annual: Vec<f64>,
}

impl LearningCurves {
    /// Mean YTD return over the evaluation window.
    pub fn mean_ytd(&self) -> f64 {
        if self.ytd.is_empty() {
            0.0
        } else {
            mean(&self.ytd)
        }
    }
}

/// Top-decile learning curves over the final tenth of the run.
pub fn learning_curves(results: &[RunResult]) -> Result<LearningCurves> {
    let navs: Vec<&[Vec<f64>]> = results.iter().map(|r| r.nav.as_slice()).collect();
    learning_curves_from_nav(&navs)
}

/// [`learning_curves`] over `nav[agent][t]` matrices, one per run.
pub fn learning_curves_from_nav(runs: &[&[Vec<f64>]]) -> Result<LearningCurves> {
    let Some(first) = runs.first() else {
        return Err(SimError::InvalidParameter("learning curves need at least one run".into()));
    };
    let len = first.first().map_or(0, Vec::len);
    if len == 0 || runs.iter().any(|r| r.len() != first.len() || r.iter().any(|n| n.len() != len)) {
        return Err(SimError::InvalidParameter("runs differ in shape".into()));
    }
    let start = ((len as f64 * 0.9) as usize).min(len - 1);
    let mut ytd = vec![0.0; len - start];
    let mut sorted_annual: Vec<f64> = Vec::new();
    for nav in runs {
        let best = top_decile(nav, start);
        for (k, slot) in ytd.iter_mut().enumerate() {
            *slot += best.iter().map(|&i| ytd_return(&nav[i], start + k)).sum::<f64>() / best.len() as f64;
        }
        let mut annual: Vec<f64> = best.iter().flat_map(|&i| annual_returns(&nav[i])).collect();
        annual.sort_by(f64::total_cmp);
        if sorted_annual.is_empty() {
            sorted_annual = vec![0.0; annual.len()];
        }
        for (acc, a) in sorted_annual.iter_mut().zip(&annual) {
            *acc += a;
        }
    }
    let n = runs.len() as f64;
    ytd.iter_mut().for_each(|v| *v /= n);
    sorted_annual.iter_mut().for_each(|v| *v /= n);
    Ok(LearningCurves { start, ytd, sorted_annual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn log_return_fixtures() {
        assert_eq!(log_returns(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert!((log_returns(&[50.0, 100.0]).unwrap()[0] - std::f64::consts::LN_2).abs() < 1e-10);
        assert!(matches!(log_returns(&[1.0, 0.0, 2.0]), Err(SimError::NonPositivePrice { index: 1, .. })));
        assert!(matches!(log_returns(&[1.0]), Err(SimError::SeriesTooShort { .. })));
    }

    #[test]
    fn volatility_on_alternating_prices() {
        let p: Vec<f64> = (0..9).map(|k| if k % 2 == 0 { 100.0 } else { 102.0 }).collect();
        let v = volatility_series(&p, 4).unwrap();
        // window of five: three 100s and two 102s, mean 100.8
        let sd = ((3.0 * 0.8f64.powi(2) + 2.0 * 1.2f64.powi(2)) / 5.0).sqrt();
        assert!((v[0] - sd / 100.0).abs() < 1e-12);
        assert!(volatility_series(&p, 1).is_err());
        assert!(volatility_series(&[3.0; 10], 4).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn autocorr_fixtures() {
        let periodic: Vec<f64> = (0..60).map(|k| ((k % 6) as f64).sin()).collect();
        let c = adjacent_autocorr(&periodic, 6).unwrap();
        assert!(c.values.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        let trend: Vec<f64> = (0..40).map(f64::from).collect();
        for d in 1..5 {
            assert!(blended_autocorr(&trend, 5, d).unwrap().values.iter().all(|&r| (r - 1.0).abs() < 1e-12));
        }
        let c = adjacent_autocorr(&[1.0; 30], 5).unwrap();
        assert!(c.values.is_empty() && c.skipped == 20);
        assert!(blended_autocorr(&trend, 5, 0).is_err());
        assert!(adjacent_autocorr(&trend[..10], 5).is_err());
    }

    #[test]
    fn anti_correlated_windows() {
        // x, -x pattern: window [t-Δ, t] mirrors the previous one
        let base = [1.0, 3.0, -2.0, 0.5];
        let mut s = Vec::new();
        for k in 0..12 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s.extend(base.iter().map(|x| sign * x));
        }
        let r = pearson(&s[0..4], &s[4..8]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_autocorr_mean_near_zero() {
        let x = noise(10_000, 11);
        let c = adjacent_autocorr(&x, 10).unwrap();
        // windows overlap heavily, so the effective sample is far below N
        assert!(c.mean().unwrap().abs() < 3.0 / (x.len() as f64 / 20.0).sqrt());
    }

    #[test]
    fn run_length_fixtures() {
        assert_eq!(run_lengths(&[100.0, 101.0, 102.0, 101.0, 100.0]), vec![2, -2]);
        assert_eq!(run_lengths(&[1.0, 2.0, 3.0, 4.0]), vec![3]);
        assert_eq!(run_lengths(&[4.0, 3.0, 2.0]), vec![-2]);
        assert!(run_lengths(&[7.0; 5]).is_empty());
        assert_eq!(run_lengths(&[1.0, 2.0, 2.0, 3.0, 1.0]), vec![1, 1, -1]);
    }

    #[test]
    fn ks_fixtures() {
        let a = noise(500, 1);
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        let (x, y) = (noise(10_000, 2), noise(10_000, 3));
        assert!(ks_statistic(&x, &y) < 0.03);
        // brute-force sup over all sample points
        let (p, q) = (noise(40, 4), noise(25, 5));
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
        let brute = p.iter().chain(&q).map(|&t| (ecdf(&p, t) - ecdf(&q, t)).abs()).fold(0.0, f64::max);
        assert!((ks_statistic(&p, &q) - brute).abs() < 1e-15);
    }

    #[test]
    fn kurtosis_of_known_samples() {
        assert!(excess_kurtosis(&noise(200_000, 9)).abs() < 0.05);
        // two-point symmetric distribution has excess kurtosis -2
        assert!((excess_kurtosis(&[1.0, -1.0, 1.0, -1.0]) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_everything() {
        let x = noise(1000, 6);
        let h = histogram(&x, &fd_edges(&x));
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        assert!(h.edges.windows(2).all(|w| w[0] < w[1]));
        let h = histogram(&[2.0; 5], &fd_edges(&[2.0; 5]));
        assert_eq!(h.counts, vec![5]);
    }

    #[test]
    fn annual_and_ytd_returns() {
        let nav: Vec<f64> = (0..600).map(|t| 100.0 + t as f64).collect();
        let annual = annual_returns(&nav);
        assert_eq!(annual.len(), 2);
        assert!((annual[0] - (352.0 / 100.0 - 1.0)).abs() < 1e-12);
        assert!((ytd_return(&nav, 300) - (400.0 / 352.0 - 1.0)).abs() < 1e-12);
        assert_eq!(ytd_return(&nav, 504), 0.0);
    }

    #[test]
    fn decile_selection() {
        let nav: Vec<Vec<f64>> = (0..500).map(|i| vec![i as f64]).collect();
        let best = top_decile(&nav, 0);
        assert_eq!(best.len(), 50);
        assert_eq!(best[0], 499);
        assert_eq!(top_decile(&nav[..7], 0), vec![6]);
    }

    #[test]
    fn metric_families_cover_all_params() {
        let p: Vec<f64> = (0..800).map(|t| 100.0 + (t as f64 * 0.37).sin() * 3.0 + t as f64 * 0.01).collect();
        let v: Vec<f64> = (0..800).map(|t| ((t * 7919) % 113) as f64).collect();
        let m = compute_metrics(&[DailySeries { prices: &p, volumes: &v }]).unwrap();
        let expected: usize = Family::ALL.iter().map(|f| f.params().len()).sum();
        assert_eq!(m.len(), expected);
        for d in &m {
            assert!(!d.values.is_empty(), "{} {}", d.family.name(), d.param);
        }
        let cmp = compare_all(&m, &m);
        assert!(cmp.iter().all(|c| c.ks == 0.0));
        assert!(family_scores(&cmp).iter().all(|&(_, s)| s == 0.0));
    }

    proptest! {
        #[test]
        fn correlations_bounded(xs in prop::collection::vec(-1e3f64..1e3, 30..120), d in 1usize..6) {
            let c = blended_autocorr(&xs, 5, d).unwrap();
            prop_assert!(c.values.iter().all(|r| (-1.0..=1.0).contains(r)));
        }

        #[test]
        fn log_returns_invert_cumsum(rs in prop::collection::vec(-0.2f64..0.2, 1..200)) {
            let mut p = vec![100.0];
            for r in &rs {
                let last = *p.last().unwrap();
                p.push(last * r.exp());
            }
            let back = log_returns(&p).unwrap();
            for (a, b) in back.iter().zip(&rs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn volatility_scale_invariant(xs in prop::collection::vec(1.0f64..200.0, 12..60), c in 0.1f64..10.0) {
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let a = volatility_series(&xs, 5).unwrap();
            let b = volatility_series(&scaled, 5).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn run_lengths_sum_to_moves(xs in prop::collection::vec(0i32..5, 2..100)) {
            let p: Vec<f64> = xs.iter().map(|&x| f64::from(x) + 1.0).collect();
            let moves = p.windows(2).filter(|w| w[0] != w[1]).count() as i64;
            prop_assert_eq!(run_lengths(&p).iter().map(|r| r.abs()).sum::<i64>(), moves);
        }
    }
}
