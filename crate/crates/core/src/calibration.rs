//! Hyperparameter grid, scoring against reference data, and resumable sweeps.
//!
//! The score of a point is the mean, over the nine metric families, of the
//! family's mean Kolmogorov–Smirnov distance between the simulated batch and
//! the reference sample. Lower is better.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::analytics::{batch_metrics, compare_all, family_scores, Family, MetricDistribution};
use crate::config::SimConfig;
use crate::engine::run_batch;
use crate::error::{Result, SimError};
use crate::rng::{stream, Purpose};

/// Agent counts on the grid.
pub const AGENT_AXIS: [usize; 10] = [500, 1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000];
/// Gesture scalars, in tenths.
const GESTURE_TENTHS: [u32; 5] = [10, 15, 20, 25, 30];
/// Fundamental amplitudes, in tenths.
const AMPLITUDE_TENTHS: [u32; 8] = [1, 3, 5, 7, 9, 11, 13, 15];
/// Drawdown thresholds in percentage points.
pub const DRAWDOWN_AXIS: [i32; 9] = [-50, -40, -30, -20, -10, 0, 10, 20, 30];

/// One hyperparameter combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub agents: usize,
    pub gesture: f64,
    pub amplitude: f64,
    pub drawdown: i32,
}

impl GridPoint {
    /// `base` with this point's hyperparameters.
    pub fn apply(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            agent_count: self.agents,
            gesture_scalar: self.gesture,
            fundamental_amplitude: self.amplitude,
            drawdown_threshold: f64::from(self.drawdown),
            ..base.clone()
        }
    }

    /// The point a configuration already sits at.
    pub fn of(cfg: &SimConfig) -> Self {
        Self {
            agents: cfg.agent_count,
            gesture: cfg.gesture_scalar,
            amplitude: cfg.fundamental_amplitude,
            drawdown: cfg.drawdown_threshold.round() as i32,
        }
    }
}

/// The full Cartesian grid, agent count varying slowest.
pub fn enumerate_grid() -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(3600);
    for &agents in &AGENT_AXIS {
        for &g in &GESTURE_TENTHS {
            for &a in &AMPLITUDE_TENTHS {
                for &drawdown in &DRAWDOWN_AXIS {
                    out.push(GridPoint {
                        agents,
                        gesture: f64::from(g) / 10.0,
                        amplitude: f64::from(a) / 10.0,
                        drawdown,
                    });
                }
            }
        }
    }
    out
}

/// A point with its distances to the reference data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPoint {
    /// Position of the point in the swept list.
    pub index: usize,
    pub point: GridPoint,
    /// Mean KS per family, in [`Family::ALL`] order.
    pub distances: Vec<(Family, f64)>,
    pub score: f64,
    /// Score against the held-out half, when one was supplied.
    pub test_score: Option<f64>,
    /// Why the score is infinite, if it is.
    pub failure: Option<String>,
}

impl ScoredPoint {
    fn failed(index: usize, point: GridPoint, reason: String) -> Self {
        Self { index, point, distances: Vec::new(), score: f64::INFINITY, test_score: None, failure: Some(reason) }
    }
}

/// Score of simulated metrics against a reference: per-family mean KS and
/// their mean.
pub fn score_metrics(sim: &[MetricDistribution], reference: &[MetricDistribution]) -> (Vec<(Family, f64)>, f64) {
    let families = family_scores(&compare_all(sim, reference));
    let score = families.iter().map(|(_, d)| d).sum::<f64>() / families.len() as f64;
    (families, score)
}

/// Runs the batch at `point` and scores it; run failures give `+∞`.
pub fn score_point(
    index: usize,
    point: GridPoint,
    base: &SimConfig,
    train: &[MetricDistribution],
    test: Option<&[MetricDistribution]>,
    seeds: &[u64],
) -> ScoredPoint {
    let cfg = point.apply(base);
    let mut results = Vec::with_capacity(seeds.len());
    for r in run_batch(&cfg, seeds) {
        match r {
            Ok(r) => results.push(r),
            Err(e) => return ScoredPoint::failed(index, point, e.to_string()),
        }
    }
    let sim = match batch_metrics(&results) {
        Ok(m) => m,
        Err(e) => return ScoredPoint::failed(index, point, e.to_string()),
    };
    let (distances, score) = score_metrics(&sim, train);
    let test_score = test.map(|t| score_metrics(&sim, t).1);
    ScoredPoint { index, point, distances, score, test_score, failure: None }
}

/// Deterministic random half-split of ticker names into (train, test).
pub fn split_tickers(tickers: &[String], seed: u64) -> (Vec<String>, Vec<String>) {
    let mut shuffled: Vec<String> = tickers.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut stream(seed, Purpose::Calibration, 0, 0));
    let test = shuffled.split_off(shuffled.len().div_ceil(2));
    (shuffled, test)
}

/// Sorts by score, then by grid position.
pub fn rank(points: &mut [ScoredPoint]) {
    points.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
}

const CHECKPOINT_HEADER: &str = "# marketsim sweep checkpoint v1";

fn checkpoint_columns() -> String {
    let mut cols = vec!["index", "agents", "gesture", "amplitude", "drawdown", "score", "test_score"];
    cols.extend(Family::ALL.iter().map(|f| f.name()));
    cols.push("failure");
    cols.join(",")
}

fn fmt_score(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.17e}")
    } else {
        "inf".into()
    }
}

fn checkpoint_line(p: &ScoredPoint) -> String {
    let mut fields = vec![
        p.index.to_string(),
        p.point.agents.to_string(),
        p.point.gesture.to_string(),
        p.point.amplitude.to_string(),
        p.point.drawdown.to_string(),
        fmt_score(p.score),
        p.test_score.map(fmt_score).unwrap_or_default(),
    ];
    for f in Family::ALL {
        let d = p.distances.iter().find(|(g, _)| *g == f).map(|&(_, d)| fmt_score(d)).unwrap_or_default();
        fields.push(d);
    }
    fields.push(p.failure.as_deref().unwrap_or("").replace([',', '\n'], ";"));
    fields.join(",")
}

fn parse_checkpoint_line(line: &str) -> Option<ScoredPoint> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 7 + Family::ALL.len() + 1 {
        return None;
    }
    let num = |s: &str| -> Option<f64> {
        if s == "inf" {
            Some(f64::INFINITY)
        } else {
            s.parse().ok()
        }
    };
    let point = GridPoint {
        agents: f[1].parse().ok()?,
        gesture: f[2].parse().ok()?,
        amplitude: f[3].parse().ok()?,
        drawdown: f[4].parse().ok()?,
    };
    let mut distances = Vec::new();
    for (k, fam) in Family::ALL.iter().enumerate() {
        let s = f[7 + k];
        if !s.is_empty() {
            distances.push((*fam, num(s)?));
        }
    }
    let failure = f[7 + Family::ALL.len()];
    Some(ScoredPoint {
        index: f[0].parse().ok()?,
        point,
        distances,
        score: num(f[5])?,
        test_score: if f[6].is_empty() { None } else { Some(num(f[6])?) },
        failure: (!failure.is_empty()).then(|| failure.to_string()),
    })
}

/// Finished points recorded in a checkpoint; unreadable lines are ignored so
/// that their points are recomputed.
pub fn read_checkpoint(path: &Path) -> Result<BTreeMap<usize, ScoredPoint>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(SimError::io(path, e)),
    };
    let mut done = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| SimError::io(path, e))?;
        if line.starts_with('#') || line.starts_with("index,") || line.trim().is_empty() {
            continue;
        }
        if let Some(p) = parse_checkpoint_line(&line) {
            done.insert(p.index, p);
        }
    }
    Ok(done)
}

/// Inputs of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPlan<'a> {
    pub points: &'a [GridPoint],
    pub base: &'a SimConfig,
    pub train: &'a [MetricDistribution],
    pub test: Option<&'a [MetricDistribution]>,
    pub seeds: &'a [u64],
}

/// Scores every point not already in the checkpoint, appending each result
/// as it finishes, and returns all points ranked.
pub fn sweep(plan: &SweepPlan<'_>, checkpoint: Option<&Path>) -> Result<Vec<ScoredPoint>> {
    let mut done = match checkpoint {
        Some(path) => read_checkpoint(path)?,
        None => BTreeMap::new(),
    };
    done.retain(|&i, p| plan.points.get(i) == Some(&p.point));
    let writer = match checkpoint {
        Some(path) => {
            let fresh = !path.exists() || std::fs::metadata(path).map_err(|e| SimError::io(path, e))?.len() == 0;
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| SimError::io(path, e))?;
            if fresh {
                writeln!(f, "{CHECKPOINT_HEADER}\n{}", checkpoint_columns()).map_err(|e| SimError::io(path, e))?;
            }
            Some((path, Mutex::new(f)))
        }
        None => None,
    };
    let todo: Vec<usize> = (0..plan.points.len()).filter(|i| !done.contains_key(i)).collect();
    let fresh: Vec<Result<ScoredPoint>> = todo
        .par_iter()
        .map(|&i| {
            let p = score_point(i, plan.points[i], plan.base, plan.train, plan.test, plan.seeds);
            if let Some((path, w)) = &writer {
                let mut f = w.lock().expect("checkpoint writer poisoned");
                writeln!(f, "{}", checkpoint_line(&p)).and_then(|_| f.flush()).map_err(|e| SimError::io(*path, e))?;
            }
            Ok(p)
        })
        .collect();
    let mut all: Vec<ScoredPoint> = done.into_values().collect();
    for p in fresh {
        all.push(p?);
    }
    rank(&mut all);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape_and_bounds() {
        let g = enumerate_grid();
        assert_eq!(g.len(), 10 * 5 * 8 * 9);
        assert_eq!(g[0], GridPoint { agents: 500, gesture: 1.0, amplitude: 0.1, drawdown: -50 });
        assert_eq!(g[g.len() - 1], GridPoint { agents: 5000, gesture: 3.0, amplitude: 1.5, drawdown: 30 });
        let mut amps: Vec<f64> = g.iter().map(|p| p.amplitude).collect();
        amps.sort_by(f64::total_cmp);
        amps.dedup();
        assert_eq!(amps, vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5]);
        let mut gestures: Vec<f64> = g.iter().map(|p| p.gesture).collect();
        gestures.sort_by(f64::total_cmp);
        gestures.dedup();
        assert_eq!(gestures, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn split_is_deterministic_half() {
        let t: Vec<String> = (0..11).map(|k| format!("T{k}")).collect();
        let (a, b) = split_tickers(&t, 4);
        assert_eq!((a.len(), b.len()), (6, 5));
        assert_eq!(split_tickers(&t, 4), (a.clone(), b.clone()));
        let mut all: Vec<String> = a.into_iter().chain(b).collect();
        all.sort();
        let mut sorted = t.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn checkpoint_line_round_trip() {
        let p = ScoredPoint {
            index: 17,
            point: GridPoint { agents: 1500, gesture: 2.5, amplitude: 0.7, drawdown: -20 },
            distances: Family::ALL.iter().enumerate().map(|(k, &f)| (f, 0.1 * k as f64 + 1e-9)).collect(),
            score: 0.123_456_789,
            test_score: Some(0.2),
            failure: None,
        };
        assert_eq!(parse_checkpoint_line(&checkpoint_line(&p)), Some(p.clone()));
        let failed = ScoredPoint::failed(3, p.point, "bad, config".into());
        let back = parse_checkpoint_line(&checkpoint_line(&failed)).unwrap();
        assert!(back.score.is_infinite());
        assert_eq!(back.failure.as_deref(), Some("bad; config"));
        assert!(parse_checkpoint_line("3,1500,2.5").is_none());
    }

    #[test]
    fn ranking_is_total() {
        let pt = GridPoint { agents: 500, gesture: 1.0, amplitude: 0.1, drawdown: 0 };
        let mk =
            |index, score| ScoredPoint { index, point: pt, distances: vec![], score, test_score: None, failure: None };
        let mut v = vec![mk(2, 0.5), mk(0, f64::INFINITY), mk(1, 0.5), mk(3, 0.1)];
        rank(&mut v);
        assert_eq!(v.iter().map(|p| p.index).collect::<Vec<_>>(), vec![3, 1, 2, 0]);
    }
}
