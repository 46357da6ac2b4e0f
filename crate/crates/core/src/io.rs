//! Config files, real-data ingestion and CSV output.
//!
//! Every emitted CSV starts with a `# marketsim <kind> v<N>` comment line
//! naming its schema, followed by a header row. Readers skip `#` lines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::analytics::{self, DailySeries, Histogram, LearningCurves, MetricDistribution};
use crate::calibration::ScoredPoint;
use crate::config::SimConfig;
use crate::engine::RunResult;
use crate::error::{Result, SimError};
use crate::fundamentals::{
    approximate_fundamental, generate_fundamental, jump_statistics, mean_relative_bias, ViewParams,
};
use crate::rng::{stream, Purpose};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.csv";

// ---------------------------------------------------------------- config

/// Field names accepted in config files; short symbols first.
const CONFIG_KEYS: [(&str, &str); 32] = [
    ("I", "agent_count"),
    ("agents", "agent_count"),
    ("J", "stock_count"),
    ("stocks", "stock_count"),
    ("T", "step_count"),
    ("steps", "step_count"),
    ("S", "run_count"),
    ("runs", "run_count"),
    ("b", "broker_fee"),
    ("broker_fee", "broker_fee"),
    ("R", "annual_risk_free"),
    ("risk_free", "annual_risk_free"),
    ("D", "annual_dividend"),
    ("dividend", "annual_dividend"),
    ("zeta", "gesture_scalar"),
    ("gesture_scalar", "gesture_scalar"),
    ("nu", "fundamental_amplitude"),
    ("fundamental_amplitude", "fundamental_amplitude"),
    ("L", "drawdown_threshold"),
    ("drawdown_threshold", "drawdown_threshold"),
    ("seed", "master_seed"),
    ("master_seed", "master_seed"),
    ("noise", "noise_agent_mode"),
    ("noise_agent_mode", "noise_agent_mode"),
    ("literal_trade_reward", "literal_trade_reward"),
    ("fill_aware_hindsight", "fill_aware_hindsight"),
    ("agent_count", "agent_count"),
    ("stock_count", "stock_count"),
    ("step_count", "step_count"),
    ("run_count", "run_count"),
    ("annual_risk_free", "annual_risk_free"),
    ("annual_dividend", "annual_dividend"),
];

fn canonical_key(key: &str) -> Option<&'static str> {
    CONFIG_KEYS.iter().find(|(k, _)| *k == key).map(|&(_, field)| field)
}

pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_config_str(&text, path)
}

/// Parses flat `key = value` lines; `#` starts a comment.
pub fn parse_config_str(text: &str, path: &Path) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut lines: HashMap<&'static str, usize> = HashMap::new();
    let err = |line: usize, message: String| SimError::Parse { path: path.to_path_buf(), line, message };
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(line, format!("expected `key = value`, found `{content}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        let field = canonical_key(key).ok_or_else(|| err(line, format!("unknown key `{key}`")))?;
        if let Some(first) = lines.insert(field, line) {
            return Err(err(line, format!("`{key}` already set on line {first}")));
        }
        let count = |v: &str| -> Result<usize> {
            let n: i128 = v.parse().map_err(|_| err(line, format!("`{key}` expects an integer, found `{v}`")))?;
            usize::try_from(n).map_err(|_| err(line, format!("`{key} = {v}` is out of range: must be ≥ 0")))
        };
        let real = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, format!("`{key}` expects a finite number, found `{v}`")))
        };
        let flag = |v: &str| -> Result<bool> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(err(line, format!("`{key}` expects true or false, found `{v}`"))),
            }
        };
        match field {
            "agent_count" => cfg.agent_count = count(value)?,
            "stock_count" => cfg.stock_count = count(value)?,
            "step_count" => cfg.step_count = count(value)?,
            "run_count" => cfg.run_count = count(value)?,
            "broker_fee" => cfg.broker_fee = real(value)?,
            "annual_risk_free" => cfg.annual_risk_free = real(value)?,
            "annual_dividend" => cfg.annual_dividend = real(value)?,
            "gesture_scalar" => cfg.gesture_scalar = real(value)?,
            "fundamental_amplitude" => cfg.fundamental_amplitude = real(value)?,
            "drawdown_threshold" => cfg.drawdown_threshold = real(value)?,
            "master_seed" => {
                cfg.master_seed = value
                    .parse()
                    .map_err(|_| err(line, format!("`{key}` expects an unsigned integer, found `{value}`")))?
            }
            "noise_agent_mode" => cfg.noise_agent_mode = flag(value)?,
            "literal_trade_reward" => cfg.literal_trade_reward = flag(value)?,
            "fill_aware_hindsight" => cfg.fill_aware_hindsight = flag(value)?,
            _ => unreachable!("every canonical key is handled"),
        }
    }
    match cfg.validate() {
        Ok(cfg) => Ok(cfg),
        Err(violations) => {
            // report the earliest offending line; defaults cannot be blamed on a line
            let located = violations.iter().filter_map(|v| lines.get(v.field).map(|&l| (l, v))).min_by_key(|(l, _)| *l);
            match located {
                Some((line, v)) => Err(err(line, format!("out of range: {}", v.message))),
                None => Err(SimError::InvalidConfig(violations)),
            }
        }
    }
}

/// The config as parseable `key = value` text.
pub fn format_config(cfg: &SimConfig) -> String {
    format!(
        "I = {}\nJ = {}\nT = {}\nS = {}\nb = {}\nR = {}\nD = {}\nzeta = {}\nnu = {}\nL = {}\nseed = {}\nnoise = {}\nliteral_trade_reward = {}\nfill_aware_hindsight = {}\n",
        cfg.agent_count,
        cfg.stock_count,
        cfg.step_count,
        cfg.run_count,
        cfg.broker_fee,
        cfg.annual_risk_free,
        cfg.annual_dividend,
        cfg.gesture_scalar,
        cfg.fundamental_amplitude,
        cfg.drawdown_threshold,
        cfg.master_seed,
        cfg.noise_agent_mode,
        cfg.literal_trade_reward,
        cfg.fill_aware_hindsight,
    )
}

// ------------------------------------------------------------ real data

/// Daily closes and volumes of one ticker, in date order.
#[derive(Debug, Clone, PartialEq)]
pub struct TickerSeries {
    pub ticker: String,
    pub dates: Vec<String>,
    pub close: Vec<f64>,
    pub volume: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Close-to-close drop ratio treated as a split candidate.
    pub split_factor: f64,
    /// A split also needs volume at least this multiple of its recent mean.
    pub volume_spike: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { split_factor: 1.9, volume_spike: 1.5 }
    }
}

/// What ingestion kept and why the rest was dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub rows: usize,
    /// `(line, reason)` for every rejected row.
    pub rejected: Vec<(usize, String)>,
    pub tickers_seen: usize,
    pub retained: usize,
    /// Tickers missing at least one trading date.
    pub dropped: Vec<String>,
    pub splits_adjusted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealData {
    pub series: Vec<TickerSeries>,
    pub report: IngestReport,
}

impl RealData {
    pub fn tickers(&self) -> Vec<String> {
        self.series.iter().map(|s| s.ticker.clone()).collect()
    }

    pub fn subset(&self, tickers: &[String]) -> Vec<TickerSeries> {
        let keep: BTreeSet<&String> = tickers.iter().collect();
        self.series.iter().filter(|s| keep.contains(&s.ticker)).cloned().collect()
    }
}

pub fn ingest_real(path: &Path, opts: IngestOptions) -> Result<RealData> {
    let file = fs::File::open(path).map_err(|e| SimError::io(path, e))?;
    ingest_real_reader(file, path, opts)
}

/// Reads `date,ticker,close,volume` rows, keeps continuously traded tickers
/// and back-adjusts detected splits.
pub fn ingest_real_reader<R: Read>(reader: R, path: &Path, opts: IngestOptions) -> Result<RealData> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| SimError::csv(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h.eq_ignore_ascii_case(name)).ok_or_else(|| SimError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (c_date, c_ticker, c_close, c_volume) = (col("date")?, col("ticker")?, col("close")?, col("volume")?);

    let mut report = IngestReport::default();
    let mut rows: BTreeMap<String, BTreeMap<String, (f64, f64)>> = BTreeMap::new();
    let mut calendar: BTreeSet<String> = BTreeSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| SimError::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        report.rows += 1;
        let field = |i: usize| record.get(i).unwrap_or("");
        let (date, ticker) = (field(c_date), field(c_ticker));
        if date.is_empty() || ticker.is_empty() {
            report.rejected.push((line, "missing date or ticker".into()));
            continue;
        }
        let close = match field(c_close).parse::<f64>() {
            Ok(c) if c > 0.0 && c.is_finite() => c,
            Ok(c) => {
                report.rejected.push((line, format!("non-positive close {c}")));
                continue;
            }
            Err(_) => {
                report.rejected.push((line, format!("unparseable close `{}`", field(c_close))));
                continue;
            }
        };
        let volume = match field(c_volume).parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => v,
            _ => {
                report.rejected.push((line, format!("bad volume `{}`", field(c_volume))));
                continue;
            }
        };
        calendar.insert(date.to_string());
        let days = rows.entry(ticker.to_string()).or_default();
        if days.insert(date.to_string(), (close, volume)).is_some() {
            report.rejected.push((line, format!("duplicate row for {ticker} on {date}")));
        }
    }
    report.tickers_seen = rows.len();

    let mut series = Vec::new();
    for (ticker, days) in rows {
        if days.len() != calendar.len() {
            report.dropped.push(ticker);
            continue;
        }
        let mut s = TickerSeries { ticker, dates: Vec::new(), close: Vec::new(), volume: Vec::new() };
        for (date, (c, v)) in days {
            s.dates.push(date);
            s.close.push(c);
            s.volume.push(v);
        }
        report.splits_adjusted += adjust_splits(&mut s, opts);
        series.push(s);
    }
    report.retained = series.len();
    Ok(RealData { series, report })
}

const SPLIT_VOLUME_LOOKBACK: usize = 20;

/// Back-adjusts every detected split; returns how many were found.
pub fn adjust_splits(s: &mut TickerSeries, opts: IngestOptions) -> usize {
    let mut found = 0;
    for t in 1..s.close.len() {
        let ratio = s.close[t - 1] / s.close[t];
        if ratio < opts.split_factor {
            continue;
        }
        let prior = &s.volume[t.saturating_sub(SPLIT_VOLUME_LOOKBACK)..t];
        let avg = prior.iter().sum::<f64>() / prior.len() as f64;
        if !(avg > 0.0 && s.volume[t] >= opts.volume_spike * avg) {
            continue;
        }
        let factor = ratio.round().max(2.0);
        for k in 0..t {
            s.close[k] /= factor;
            s.volume[k] *= factor;
        }
        found += 1;
    }
    found
}

/// Metric distributions pooled over tickers.
pub fn real_metrics(series: &[TickerSeries]) -> Result<Vec<MetricDistribution>> {
    let daily: Vec<DailySeries<'_>> =
        series.iter().map(|s| DailySeries { prices: &s.close, volumes: &s.volume }).collect();
    analytics::compute_metrics(&daily)
}

// -------------------------------------------------------------- output

/// One written file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, excluding comment and header lines.
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn get(&self, name: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Creates `dir` if needed; refuses a directory that already has a manifest
/// unless `overwrite` is set.
pub fn prepare_output_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.join(MANIFEST_FILE).exists() && !overwrite {
        return Err(SimError::OutputExists { path: dir.to_path_buf() });
    }
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

/// CSV text under construction: schema comment, header, rows.
struct Table {
    text: String,
    rows: usize,
}

impl Table {
    fn new(kind: &str, header: &[&str]) -> Self {
        let mut text = format!("# marketsim {kind} v{SCHEMA_VERSION}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text, rows: 0 }
    }

    fn row(&mut self, fields: std::fmt::Arguments<'_>) {
        self.text.write_fmt(fields).expect("writing to a String cannot fail");
        self.text.push('\n');
        self.rows += 1;
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes output files and the manifest that lists them.
struct OutputWriter<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl<'a> OutputWriter<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, manifest: Manifest::default() }
    }

    fn table(&mut self, name: &str, table: Table) -> Result<()> {
        self.raw(name, table.text.as_bytes(), table.rows)
    }

    fn raw(&mut self, name: &str, bytes: &[u8], rows: usize) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| SimError::io(&path, e))?;
        self.manifest.files.push(FileEntry { name: name.to_string(), rows, sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn finish(self) -> Result<Manifest> {
        let mut t = Table::new("manifest", &["file", "rows", "sha256"]);
        for f in &self.manifest.files {
            t.row(format_args!("{},{},{}", f.name, f.rows, f.sha256));
        }
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, &t.text).map_err(|e| SimError::io(&path, e))?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let mut files = Vec::new();
    for rec in read_table(&path)? {
        let (line, f) = rec;
        let rows = f.get(1).and_then(|r| r.parse().ok()).ok_or_else(|| parse_err(&path, line, "bad row count"))?;
        files.push(FileEntry { name: f[0].clone(), rows, sha256: f.get(2).cloned().unwrap_or_default() });
    }
    Ok(Manifest { files })
}

/// Which optional run tables to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutput {
    pub nav: bool,
}

impl Default for RunOutput {
    fn default() -> Self {
        Self { nav: true }
    }
}

/// Writes one run's tables into `dir`.
///
/// * `prices.csv`: `t,stock,price,volume,spread`
/// * `fundamentals.csv`: `t,stock,true_value`
/// * `agents.csv`: parameters and outcome per agent
/// * `nav.csv`: `t,agent,nav` (optional)
/// * `annual_returns.csv`: `agent,year,annual_return`
/// * `bankruptcies.csv`: `agent,t`
/// * `config.txt`: the run's configuration with its seed
pub fn write_run(result: &RunResult, dir: &Path, overwrite: bool, what: RunOutput) -> Result<Manifest> {
    prepare_output_dir(dir, overwrite)?;
    let mut out = OutputWriter::new(dir);

    let mut t = Table::new("prices", &["t", "stock", "price", "volume", "spread"]);
    let len = result.prices.first().map_or(0, Vec::len);
    for day in 0..len {
        for j in 0..result.prices.len() {
            t.row(format_args!(
                "{day},{j},{},{},{}",
                result.prices[j][day], result.volumes[j][day], result.spreads[j][day]
            ));
        }
    }
    out.table("prices.csv", t)?;

    let mut t = Table::new("fundamentals", &["t", "stock", "true_value"]);
    for day in 0..len {
        for (j, f) in result.fundamentals.iter().enumerate() {
            t.row(format_args!("{day},{j},{}", f[day]));
        }
    }
    out.table("fundamentals.csv", t)?;

    let mut t = Table::new(
        "agents",
        &[
            "agent",
            "drawdown_limit",
            "reflexivity",
            "horizon",
            "trading_window",
            "memory",
            "gesture",
            "learning_rate",
            "initial_nav",
            "final_nav",
            "bankrupt",
        ],
    );
    for a in &result.agents {
        let p = &a.params;
        t.row(format_args!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            a.id,
            p.drawdown_limit,
            p.reflexivity,
            p.horizon,
            p.trading_window,
            p.memory,
            p.gesture,
            p.learning_rate,
            a.initial_nav,
            a.final_nav,
            a.bankrupt
        ));
    }
    out.table("agents.csv", t)?;

    if what.nav {
        let mut t = Table::new("nav", &["t", "agent", "nav"]);
        for day in 0..len {
            for (i, nav) in result.nav.iter().enumerate() {
                t.row(format_args!("{day},{i},{}", nav[day]));
            }
        }
        out.table("nav.csv", t)?;
    }

    let mut t = Table::new("annual_returns", &["agent", "year", "annual_return"]);
    for (i, nav) in result.nav.iter().enumerate() {
        for (y, r) in analytics::annual_returns(nav).into_iter().enumerate() {
            t.row(format_args!("{i},{},{r}", y + 1));
        }
    }
    out.table("annual_returns.csv", t)?;

    let mut t = Table::new("bankruptcies", &["agent", "t"]);
    for &(i, day) in &result.bankruptcies {
        t.row(format_args!("{i},{day}"));
    }
    out.table("bankruptcies.csv", t)?;

    let cfg = SimConfig { master_seed: result.seed, ..result.config.clone() };
    let text = format_config(&cfg);
    out.raw("config.txt", text.as_bytes(), text.lines().count())?;
    out.finish()
}

/// Market series read back from a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub prices: Vec<Vec<f64>>,
    pub volumes: Vec<Vec<f64>>,
    /// `nav[agent][t]`, when `nav.csv` exists.
    pub nav: Option<Vec<Vec<f64>>>,
}

impl RunSeries {
    pub fn from_result(r: &RunResult) -> Self {
        Self {
            prices: r.prices.clone(),
            volumes: r.volumes.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect(),
            nav: Some(r.nav.clone()),
        }
    }

    pub fn daily(&self) -> Vec<DailySeries<'_>> {
        self.prices.iter().zip(&self.volumes).map(|(p, v)| DailySeries { prices: p, volumes: v }).collect()
    }
}

fn parse_err(path: &Path, line: usize, message: &str) -> SimError {
    SimError::Parse { path: path.to_path_buf(), line, message: message.to_string() }
}

/// Rows of a headed CSV as strings, with their line numbers.
fn read_table(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(|e| SimError::csv(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| SimError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, row: &[String], k: usize) -> Result<T> {
    row.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, line, &format!("bad value in column {}", k + 1)))
}

/// Reads `prices.csv` and, if present, `nav.csv` of a run directory.
pub fn read_run(dir: &Path) -> Result<RunSeries> {
    let path = dir.join("prices.csv");
    let mut prices: Vec<Vec<f64>> = Vec::new();
    let mut volumes: Vec<Vec<f64>> = Vec::new();
    for (line, row) in read_table(&path)? {
        let t: usize = field(&path, line, &row, 0)?;
        let j: usize = field(&path, line, &row, 1)?;
        if j >= prices.len() {
            prices.resize_with(j + 1, Vec::new);
            volumes.resize_with(j + 1, Vec::new);
        }
        if prices[j].len() != t {
            return Err(parse_err(&path, line, "rows out of order"));
        }
        prices[j].push(field(&path, line, &row, 2)?);
        volumes[j].push(field(&path, line, &row, 3)?);
    }
    let nav_path = dir.join("nav.csv");
    let nav = if nav_path.exists() {
        let mut nav: Vec<Vec<f64>> = Vec::new();
        for (line, row) in read_table(&nav_path)? {
            let i: usize = field(&nav_path, line, &row, 1)?;
            if i >= nav.len() {
                nav.resize_with(i + 1, Vec::new);
            }
            nav[i].push(field(&nav_path, line, &row, 2)?);
        }
        Some(nav)
    } else {
        None
    };
    Ok(RunSeries { prices, volumes, nav })
}

/// Run directories below `dir`: itself if it holds `prices.csv`, otherwise
/// its immediate subdirectories that do, in name order.
pub fn find_runs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join("prices.csv").exists() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| SimError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("prices.csv").exists())
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(SimError::InvalidParameter(format!("no run output found in {}", dir.display())));
    }
    Ok(runs)
}

fn metric_tables(metrics: &[MetricDistribution]) -> (Table, Table) {
    let mut m = Table::new("metrics", &["family", "param", "count", "skipped", "mean", "variance", "min", "max"]);
    let mut h = Table::new("histograms", &["family", "param", "bin", "lower", "upper", "count"]);
    for d in metrics {
        let n = d.values.len();
        if n == 0 {
            m.row(format_args!("{},{},0,{},,,,", d.family.name(), d.param, d.skipped));
            continue;
        }
        let mean = d.values.iter().sum::<f64>() / n as f64;
        let var = d.values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let min = d.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m.row(format_args!("{},{},{n},{},{mean},{var},{min},{max}", d.family.name(), d.param, d.skipped));
        push_histogram(&mut h, &format!("{},{}", d.family.name(), d.param), &d.histogram());
    }
    (m, h)
}

fn push_histogram(t: &mut Table, prefix: &str, h: &Histogram) {
    for (k, c) in h.counts.iter().enumerate() {
        t.row(format_args!("{prefix},{k},{},{},{c}", h.edges[k], h.edges[k + 1]));
    }
}

fn curve_tables(curves: &LearningCurves) -> (Table, Table) {
    let mut y = Table::new("learning_curve", &["t", "mean_ytd_return"]);
    for (k, v) in curves.ytd.iter().enumerate() {
        y.row(format_args!("{},{v}", curves.start + k));
    }
    let mut a = Table::new("sorted_annual_returns", &["rank", "mean_annual_return"]);
    for (k, v) in curves.sorted_annual.iter().enumerate() {
        a.row(format_args!("{k},{v}"));
    }
    (y, a)
}

/// Writes `metrics.csv`, `histograms.csv` and, when given, the learning
/// curve tables.
pub fn write_analysis(
    dir: &Path,
    overwrite: bool,
    metrics: &[MetricDistribution],
    curves: Option<&LearningCurves>,
) -> Result<Manifest> {
    prepare_output_dir(dir, overwrite)?;
    let mut out = OutputWriter::new(dir);
    let (m, h) = metric_tables(metrics);
    out.table("metrics.csv", m)?;
    out.table("histograms.csv", h)?;
    if let Some(c) = curves {
        let (y, a) = curve_tables(c);
        out.table("learning_curve.csv", y)?;
        out.table("sorted_annual_returns.csv", a)?;
    }
    out.finish()
}

/// Writes a batch: one subdirectory per run plus pooled analysis.
pub fn write_batch(results: &[RunResult], dir: &Path, overwrite: bool, what: RunOutput) -> Result<Manifest> {
    prepare_output_dir(dir, overwrite)?;
    let mut out = OutputWriter::new(dir);
    for r in results {
        let name = format!("run_{:04}", r.seed);
        let m = write_run(r, &dir.join(&name), overwrite, what)?;
        for f in m.files {
            out.manifest.files.push(FileEntry { name: format!("{name}/{}", f.name), ..f });
        }
    }
    let metrics = analytics::batch_metrics(results)?;
    let curves = analytics::learning_curves(results)?;
    let (m, h) = metric_tables(&metrics);
    out.table("metrics.csv", m)?;
    out.table("histograms.csv", h)?;
    let (y, a) = curve_tables(&curves);
    out.table("learning_curve.csv", y)?;
    out.table("sorted_annual_returns.csv", a)?;
    out.finish()
}

/// Writes `comparison.csv` and shared-edge `histograms.csv` for a simulated
/// against a real metric set, plus the ingestion report.
pub fn write_comparison(
    dir: &Path,
    overwrite: bool,
    sim: &[MetricDistribution],
    real: &[MetricDistribution],
    report: &IngestReport,
) -> Result<Manifest> {
    prepare_output_dir(dir, overwrite)?;
    let mut out = OutputWriter::new(dir);
    let mut c =
        Table::new("comparison", &["family", "param", "ks", "mean_diff", "variance_diff", "sim_count", "real_count"]);
    for x in analytics::compare_all(sim, real) {
        c.row(format_args!(
            "{},{},{},{},{},{},{}",
            x.family.name(),
            x.param,
            x.ks,
            x.mean_diff,
            x.variance_diff,
            x.sim_count,
            x.real_count
        ));
    }
    out.table("comparison.csv", c)?;
    let mut h = Table::new("histograms", &["family", "param", "source", "bin", "lower", "upper", "count"]);
    for s in sim {
        let Some(r) = real.iter().find(|r| r.family == s.family && r.param == s.param) else { continue };
        let (hs, hr) = analytics::shared_histograms(&s.values, &r.values);
        push_histogram(&mut h, &format!("{},{},sim", s.family.name(), s.param), &hs);
        push_histogram(&mut h, &format!("{},{},real", s.family.name(), s.param), &hr);
    }
    out.table("histograms.csv", h)?;
    out.table("ingest_report.csv", report_table(report))?;
    out.finish()
}

fn report_table(report: &IngestReport) -> Table {
    let mut t = Table::new("ingest_report", &["item", "value"]);
    t.row(format_args!("rows,{}", report.rows));
    t.row(format_args!("tickers_seen,{}", report.tickers_seen));
    t.row(format_args!("retained,{}", report.retained));
    t.row(format_args!("dropped,{}", report.dropped.len()));
    t.row(format_args!("splits_adjusted,{}", report.splits_adjusted));
    t.row(format_args!("rejected_rows,{}", report.rejected.len()));
    for ticker in &report.dropped {
        t.row(format_args!("dropped_ticker,{ticker}"));
    }
    for (line, why) in &report.rejected {
        t.row(format_args!("rejected_line_{line},{}", why.replace(',', ";")));
    }
    t
}

/// Writes curated real data in the ingestion format.
pub fn write_real(path: &Path, series: &[TickerSeries]) -> Result<FileEntry> {
    let mut t = Table::new("real_data", &["date", "ticker", "close", "volume"]);
    for s in series {
        for k in 0..s.close.len() {
            t.row(format_args!("{},{},{},{}", s.dates[k], s.ticker, s.close[k], s.volume[k]));
        }
    }
    fs::write(path, &t.text).map_err(|e| SimError::io(path, e))?;
    Ok(FileEntry {
        name: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        rows: t.rows,
        sha256: sha256_hex(t.text.as_bytes()),
    })
}

/// Writes a ranked sweep report.
pub fn write_sweep_report(dir: &Path, overwrite: bool, ranked: &[ScoredPoint]) -> Result<Manifest> {
    prepare_output_dir(dir, overwrite)?;
    let mut out = OutputWriter::new(dir);
    let mut header = vec!["rank", "index", "agents", "gesture", "amplitude", "drawdown"];
    header.extend(analytics::Family::ALL.iter().map(|f| f.name()));
    header.extend(["score", "test_score", "failure"]);
    let mut t = Table::new("sweep_report", &header);
    for (rank, p) in ranked.iter().enumerate() {
        let mut line = format!(
            "{},{},{},{},{},{}",
            rank + 1,
            p.index,
            p.point.agents,
            p.point.gesture,
            p.point.amplitude,
            p.point.drawdown
        );
        for f in analytics::Family::ALL {
            match p.distances.iter().find(|(g, _)| *g == f) {
                Some((_, d)) => write!(line, ",{d}").expect("string write"),
                None => line.push(','),
            }
        }
        let test = p.test_score.map(|s| s.to_string()).unwrap_or_default();
        let failure = p.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        write!(line, ",{},{test},{failure}", p.score).expect("string write");
        t.row(format_args!("{line}"));
    }
    out.table("sweep_report.csv", t)?;
    out.finish()
}

/// Generates the fundamental series of a configuration together with the
/// biased views of the first `views` agents, exactly as a run would see them.
///
/// Writes `fundamentals.csv` (`t,stock,true_value,agent_id,biased_value`) and
/// `fundamentals_summary.csv` with per-stock jump and bias statistics.
pub fn write_fundamentals(cfg: &SimConfig, seed: u64, views: usize, dir: &Path, overwrite: bool) -> Result<Manifest> {
    prepare_output_dir(dir, overwrite)?;
    let mut out = OutputWriter::new(dir);
    let mut t = Table::new("fundamentals", &["t", "stock", "true_value", "agent_id", "biased_value"]);
    let mut s = Table::new(
        "fundamentals_summary",
        &["stock", "annual_jump_count", "mean_jump_amplitude", "mean_relative_bias"],
    );
    let views = views.min(cfg.agent_count);
    for j in 0..cfg.stock_count {
        let series = generate_fundamental(
            cfg.step_count,
            cfg.fundamental_amplitude,
            &mut stream(seed, Purpose::Fundamental, 0, j),
        );
        let agent_views: Vec<Vec<f64>> = (0..views)
            .map(|i| {
                approximate_fundamental(
                    &series,
                    ViewParams::default(),
                    &mut stream(seed, Purpose::FundamentalView, i, j),
                )
                .values
            })
            .collect();
        for (day, &truth) in series.values.iter().enumerate() {
            if agent_views.is_empty() {
                t.row(format_args!("{day},{j},{truth},,"));
            }
            for (i, v) in agent_views.iter().enumerate() {
                t.row(format_args!("{day},{j},{truth},{i},{}", v[day]));
            }
        }
        let stats = jump_statistics(&series.values);
        let bias = if agent_views.is_empty() {
            String::new()
        } else {
            let b = agent_views.iter().map(|v| mean_relative_bias(&series.values, v)).sum::<f64>() / views as f64;
            b.to_string()
        };
        s.row(format_args!("{j},{},{},{bias}", stats.annual_jump_count, stats.mean_amplitude));
    }
    out.table("fundamentals.csv", t)?;
    out.table("fundamentals_summary.csv", s)?;
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PathBuf {
        PathBuf::from("test.cfg")
    }

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config_str("", &p()).unwrap(), SimConfig::default());
        assert_eq!(parse_config_str("# only a comment\n\n", &p()).unwrap(), SimConfig::default());
    }

    #[test]
    fn headline_config() {
        let cfg = parse_config_str("I = 500\nJ = 1\nT = 2875\nS = 20 # batch size\nnu=0.5\nL = -10\n", &p()).unwrap();
        assert_eq!((cfg.agent_count, cfg.stock_count, cfg.step_count, cfg.run_count), (500, 1, 2875, 20));
        assert_eq!(cfg.drawdown_threshold, -10.0);
    }

    #[test]
    fn full_field_names_work_too() {
        let text = "agent_count = 60\nstock_count = 2\nstep_count = 400\nrun_count = 3\nannual_risk_free = 0.02\nannual_dividend = 0.01\n";
        let cfg = parse_config_str(text, &p()).unwrap();
        let expected = SimConfig {
            agent_count: 60,
            stock_count: 2,
            step_count: 400,
            run_count: 3,
            annual_risk_free: 0.02,
            annual_dividend: 0.01,
            ..SimConfig::default()
        };
        assert_eq!(cfg, expected);
        assert!(parse_config_str("T = 400\nstep_count = 500\n", &p()).is_err());
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let line_of = |text: &str| match parse_config_str(text, &p()) {
            Err(SimError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line_of("J = 1\nI = -3\n"), 2);
        assert_eq!(line_of("I = 0\n"), 1);
        assert_eq!(line_of("\n\nbogus = 4\n"), 3);
        assert_eq!(line_of("I 500\n"), 1);
        assert_eq!(line_of("I = 5\nagents = 6\n"), 2);
        assert_eq!(line_of("noise = maybe\n"), 1);
        assert_eq!(line_of("T = 100\n"), 1);
    }

    #[test]
    fn format_config_round_trips() {
        let cfg = SimConfig {
            agent_count: 37,
            gesture_scalar: 1.5,
            noise_agent_mode: true,
            master_seed: 99,
            fill_aware_hindsight: true,
            ..SimConfig::default()
        };
        assert_eq!(parse_config_str(&format_config(&cfg), &p()).unwrap(), cfg);
    }

    fn ingest(text: &str) -> RealData {
        ingest_real_reader(text.as_bytes(), &p(), IngestOptions::default()).unwrap()
    }

    #[test]
    fn continuity_filter_and_rejections() {
        let text = "date,ticker,close,volume\n\
                    d1,AAA,10,100\nd2,AAA,11,100\nd3,AAA,12,100\n\
                    d1,BBB,5,10\nd3,BBB,6,10\n\
                    d1,CCC,7,1\nd2,CCC,-1,1\nd3,CCC,7,1\n";
        let d = ingest(text);
        assert_eq!(d.tickers(), vec!["AAA".to_string()]);
        assert_eq!(d.report.dropped, vec!["BBB".to_string(), "CCC".to_string()]);
        assert_eq!(d.report.rejected.len(), 1);
        assert_eq!(d.report.rejected[0].0, 8);
        assert_eq!((d.report.tickers_seen, d.report.retained), (3, 1));
    }

    #[test]
    fn split_is_back_adjusted() {
        let mut text = String::from("date,ticker,close,volume\n");
        for d in 0..30 {
            let (c, v) =
                if d < 20 { (100.0 + d as f64 * 0.1, 1000.0) } else { (51.0 + (d - 20) as f64 * 0.05, 2100.0) };
            text.push_str(&format!("{d:03},XYZ,{c},{v}\n"));
        }
        let d = ingest(&text);
        assert_eq!(d.report.splits_adjusted, 1);
        let s = &d.series[0];
        let ratio = s.close[19] / s.close[20];
        assert!((0.9..1.1).contains(&ratio), "ratio {ratio}");
        assert_eq!(s.volume[0], 2000.0);
    }

    #[test]
    fn ingestion_is_idempotent() {
        let mut text = String::from("date,ticker,close,volume\n");
        for d in 0..30 {
            let c = if d < 15 { 80.0 } else { 39.0 };
            let v = if d == 15 { 500.0 } else { 100.0 };
            text.push_str(&format!("{d:03},QQ,{c},{v}\n{d:03},RR,{},{}\n", 10.0 + d as f64, 7));
        }
        let first = ingest(&text);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curated.csv");
        write_real(&path, &first.series).unwrap();
        let second = ingest_real(&path, IngestOptions::default()).unwrap();
        assert_eq!(second.series, first.series);
        assert_eq!(second.report.splits_adjusted, 0);
    }

    #[test]
    fn missing_column_is_an_error() {
        let r = ingest_real_reader("date,ticker,close\n".as_bytes(), &p(), IngestOptions::default());
        assert!(matches!(r, Err(SimError::Parse { line: 1, .. })));
    }

    #[test]
    fn refuses_to_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "x").unwrap();
        assert!(matches!(prepare_output_dir(dir.path(), false), Err(SimError::OutputExists { .. })));
        prepare_output_dir(dir.path(), true).unwrap();
        prepare_output_dir(&dir.path().join("new/nested"), false).unwrap();
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
