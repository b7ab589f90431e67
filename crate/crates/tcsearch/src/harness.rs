//! Batch experiments: paired trials over a grid of PoI and robot counts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tcsearch_core::estimator::{Estimator, FittedParams, LikelihoodMap};
use tcsearch_core::planner::PlannerConfig;
use tcsearch_core::scenario::{generate_scenario, GenerativeParams, ScenarioError};
use tcsearch_core::simulator::{
    replay_check, run_mission_with_clock, Clock, MissionConfig, MissionTrace, PlannerKind, SimError,
};
use thiserror::Error;

use crate::formats::{read_external_likelihoods, read_fitted_params, write_file, FormatError};

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct StdClock(Instant);

impl Default for StdClock {
    fn default() -> Self {
        StdClock(Instant::now())
    }
}

impl Clock for StdClock {
    fn now_seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorChoice {
    #[default]
    Oracle,
    Fitted(PathBuf),
    External(PathBuf),
}

impl FromStr for EstimatorChoice {
    type Err = String;

    /// `oracle`, `fitted:<params.json>` or `external:<likelihoods.jsonl>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(EstimatorChoice::Oracle),
            Some(("fitted", path)) if !path.is_empty() => Ok(EstimatorChoice::Fitted(path.into())),
            Some(("external", path)) if !path.is_empty() => Ok(EstimatorChoice::External(path.into())),
            _ => Err(format!("unknown estimator '{s}' (expected oracle, fitted:<path> or external:<path>)")),
        }
    }
}

impl TryFrom<String> for EstimatorChoice {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<EstimatorChoice> for String {
    fn from(e: EstimatorChoice) -> String {
        e.to_string()
    }
}

impl fmt::Display for EstimatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorChoice::Oracle => write!(f, "oracle"),
            EstimatorChoice::Fitted(p) => write!(f, "fitted:{}", p.display()),
            EstimatorChoice::External(p) => write!(f, "external:{}", p.display()),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("trial seed {seed}: {source}")]
    Scenario { seed: u64, source: ScenarioError },
    #[error("trial seed {seed}, planner {planner}: {source}")]
    Mission { seed: u64, planner: &'static str, source: SimError },
    #[error("trial seed {seed}: external likelihoods missing or incomplete")]
    MissingLikelihoods { seed: u64 },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n_trials: usize,
    pub n_pois: Vec<usize>,
    pub n_robots: Vec<usize>,
    pub seed_base: u64,
    pub planners: Vec<PlannerKind>,
    pub estimator: EstimatorChoice,
    pub planner_config: PlannerConfig,
    pub speed: f64,
    pub params: GenerativeParams,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            n_trials: 100,
            n_pois: vec![12],
            n_robots: vec![1, 3, 5],
            seed_base: 0,
            planners: PlannerKind::ALL.to_vec(),
            estimator: EstimatorChoice::Oracle,
            planner_config: PlannerConfig::default(),
            speed: 1.0,
            params: GenerativeParams::default(),
            parallelism: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidSpec(m.to_string()));
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if self.n_pois.is_empty() || self.n_robots.is_empty() || self.planners.is_empty() {
            return bad("n_pois, n_robots and planners must be non-empty");
        }
        if self.n_robots.contains(&0) {
            return bad("robot counts must be at least 1");
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return bad("speed must be finite and positive");
        }
        self.planner_config.validate().map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        self.params.validate().map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        Ok(())
    }

    pub fn trial_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_trials as u64).map(move |i| self.seed_base.wrapping_add(i))
    }
}

/// One mission of one planner on one trial scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub planner: PlannerKind,
    pub realized_cost: f64,
    pub expected_cost: f64,
    pub distance: f64,
    pub time: f64,
    /// Problems found by replaying the trace; empty when consistent.
    pub replay_issues: Vec<String>,
    pub trace: MissionTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerRow {
    pub planner: PlannerKind,
    pub n_trials: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub mean_expected: f64,
    pub mean_distance: f64,
    pub mean_time: f64,
    /// For a baseline row: how much lower the model's mean is, in percent of
    /// this baseline's mean. For the model row: the same against the better
    /// baseline.
    pub pct_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub n_pois: usize,
    pub n_robots: usize,
    pub rows: Vec<PlannerRow>,
    /// Sorted by seed, then planner in spec order.
    pub trials: Vec<TrialRecord>,
}

impl CellReport {
    pub fn row(&self, planner: PlannerKind) -> Option<&PlannerRow> {
        self.rows.iter().find(|r| r.planner == planner)
    }

    pub fn costs(&self, planner: PlannerKind) -> Vec<f64> {
        self.trials.iter().filter(|t| t.planner == planner).map(|t| t.realized_cost).collect()
    }

    /// `(seed, model_cost, baseline_cost, baseline)` for every trial and baseline.
    pub fn scatter_pairs(&self) -> Vec<(u64, f64, f64, PlannerKind)> {
        let mut model: BTreeMap<u64, f64> = BTreeMap::new();
        for t in self.trials.iter().filter(|t| t.planner == PlannerKind::Model) {
            model.insert(t.seed, t.realized_cost);
        }
        let mut pairs = Vec::new();
        for baseline in [PlannerKind::Optimistic, PlannerKind::Greedy] {
            for t in self.trials.iter().filter(|t| t.planner == baseline) {
                if let Some(&m) = model.get(&t.seed) {
                    pairs.push((t.seed, m, t.realized_cost, baseline));
                }
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateReport {
    pub cells: Vec<CellReport>,
}

impl AggregateReport {
    pub fn cell(&self, n_pois: usize, n_robots: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.n_pois == n_pois && c.n_robots == n_robots)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn pct_improvement(model_mean: f64, baseline_mean: f64) -> Option<f64> {
    (baseline_mean > 0.0).then(|| (baseline_mean - model_mean) / baseline_mean * 100.0)
}

enum EstimatorSource {
    Oracle,
    Fitted(FittedParams),
    External(BTreeMap<u64, LikelihoodMap>),
}

impl EstimatorSource {
    fn load(choice: &EstimatorChoice) -> Result<Self, HarnessError> {
        Ok(match choice {
            EstimatorChoice::Oracle => EstimatorSource::Oracle,
            EstimatorChoice::Fitted(path) => EstimatorSource::Fitted(read_fitted_params(path)?),
            EstimatorChoice::External(path) => EstimatorSource::External(read_external_likelihoods(path)?),
        })
    }

    fn for_seed(&self, seed: u64) -> Option<Estimator> {
        match self {
            EstimatorSource::Oracle => Some(Estimator::Oracle),
            EstimatorSource::Fitted(params) => Some(Estimator::Fitted { params: params.clone(), jitter_std: 0.0 }),
            EstimatorSource::External(maps) => maps.get(&seed).cloned().map(Estimator::Fixed),
        }
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    source: &EstimatorSource,
    n_pois: usize,
    n_robots: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>, HarnessError> {
    let scenario =
        generate_scenario(seed, n_pois, &spec.params).map_err(|source| HarnessError::Scenario { seed, source })?;
    let estimator = source.for_seed(seed).ok_or(HarnessError::MissingLikelihoods { seed })?;
    if let Estimator::Fixed(map) = &estimator {
        if !map.covers(&scenario) {
            return Err(HarnessError::MissingLikelihoods { seed });
        }
    }
    let clock = StdClock::default();
    spec.planners
        .iter()
        .map(|&planner| {
            let config = MissionConfig {
                planner,
                planner_config: spec.planner_config.clone(),
                estimator: estimator.clone(),
                n_robots,
                speed: spec.speed,
                seed,
            };
            let trace = run_mission_with_clock(&scenario, &config, &clock)
                .map_err(|source| HarnessError::Mission { seed, planner: planner.name(), source })?;
            Ok(TrialRecord {
                seed,
                planner,
                realized_cost: trace.total_realized_cost,
                expected_cost: trace.total_expected_cost,
                distance: trace.total_distance,
                time: trace.total_time,
                replay_issues: replay_check(&trace, &scenario).reasons,
                trace,
            })
        })
        .collect()
}

fn summarize(planners: &[PlannerKind], trials: &[TrialRecord]) -> Vec<PlannerRow> {
    let mut rows: Vec<PlannerRow> = planners
        .iter()
        .map(|&planner| {
            let of = |f: fn(&TrialRecord) -> f64| -> Vec<f64> {
                trials.iter().filter(|t| t.planner == planner).map(f).collect()
            };
            let costs = of(|t| t.realized_cost);
            PlannerRow {
                planner,
                n_trials: costs.len(),
                mean: mean(&costs),
                median: median(&costs),
                std: std_dev(&costs),
                mean_expected: mean(&of(|t| t.expected_cost)),
                mean_distance: mean(&of(|t| t.distance)),
                mean_time: mean(&of(|t| t.time)),
                pct_improvement: None,
            }
        })
        .collect();
    let model = rows.iter().find(|r| r.planner == PlannerKind::Model).map(|r| r.mean);
    if let Some(model_mean) = model {
        let best_baseline =
            rows.iter().filter(|r| r.planner != PlannerKind::Model).map(|r| r.mean).min_by(f64::total_cmp);
        for row in &mut rows {
            let reference = if row.planner == PlannerKind::Model { best_baseline } else { Some(row.mean) };
            row.pct_improvement = reference.and_then(|b| pct_improvement(model_mean, b));
        }
    }
    rows
}

/// Runs every planner on the same generated scenario for each trial seed and
/// each (n_pois, n_robots) cell.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateReport, HarnessError> {
    spec.validate()?;
    let mut planners = spec.planners.clone();
    planners.dedup();
    let spec = ExperimentSpec { planners, ..spec.clone() };
    let source = EstimatorSource::load(&spec.estimator)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;

    let mut cells = Vec::new();
    for &n_pois in &spec.n_pois {
        for &n_robots in &spec.n_robots {
            let seeds: Vec<u64> = spec.trial_seeds().collect();
            let per_seed: Result<Vec<Vec<TrialRecord>>, HarnessError> = pool.install(|| {
                seeds.par_iter().map(|&seed| run_trial(&spec, &source, n_pois, n_robots, seed)).collect()
            });
            let trials: Vec<TrialRecord> = per_seed?.into_iter().flatten().collect();
            let rows = summarize(&spec.planners, &trials);
            cells.push(CellReport { n_pois, n_robots, rows, trials });
        }
    }
    Ok(AggregateReport { cells })
}

fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "planner",
    "n_pois",
    "n_robots",
    "mean",
    "median",
    "std",
    "pct_improvement",
    "n_trials",
    "mean_expected_cost",
    "mean_distance",
    "mean_time",
];

pub const SCATTER_HEADER: [&str; 6] = ["n_pois", "n_robots", "seed", "model_cost", "baseline_cost", "baseline_name"];

pub const CURVE_HEADER: [&str; 5] =
    ["time", "distance_traveled", "expected_cost_accrued", "realized_cost_accrued", "n_damaged_unreported"];

pub fn summary_csv(report: &AggregateReport) -> Vec<u8> {
    let rows = report.cells.iter().flat_map(|cell| {
        cell.rows.iter().map(move |r| {
            vec![
                r.planner.name().to_string(),
                cell.n_pois.to_string(),
                cell.n_robots.to_string(),
                fmt_num(r.mean),
                fmt_num(r.median),
                fmt_num(r.std),
                r.pct_improvement.map(fmt_num).unwrap_or_default(),
                r.n_trials.to_string(),
                fmt_num(r.mean_expected),
                fmt_num(r.mean_distance),
                fmt_num(r.mean_time),
            ]
        })
    });
    csv_bytes(&SUMMARY_HEADER, rows).expect("in-memory CSV")
}

pub fn scatter_csv(report: &AggregateReport) -> Vec<u8> {
    let rows = report.cells.iter().flat_map(|cell| {
        cell.scatter_pairs().into_iter().map(move |(seed, m, b, name)| {
            vec![
                cell.n_pois.to_string(),
                cell.n_robots.to_string(),
                seed.to_string(),
                fmt_num(m),
                fmt_num(b),
                name.name().to_string(),
            ]
        })
    });
    csv_bytes(&SCATTER_HEADER, rows).expect("in-memory CSV")
}

pub fn curve_csv(trace: &MissionTrace) -> Vec<u8> {
    let rows = trace.cost_curve.iter().map(|c| {
        vec![
            fmt_num(c.time),
            fmt_num(c.distance_traveled),
            fmt_num(c.expected_cost_accrued),
            fmt_num(c.realized_cost_accrued),
            c.n_damaged_unreported.to_string(),
        ]
    });
    csv_bytes(&CURVE_HEADER, rows).expect("in-memory CSV")
}

/// Writes `summary.csv`, `scatter.csv` and one `curves/<planner>_p<pois>_r<robots>_s<seed>.csv`
/// per mission. Returns the paths written.
pub fn emit_outputs(report: &AggregateReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    let mut put = |path: PathBuf, bytes: Vec<u8>| -> Result<(), HarnessError> {
        write_file(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put(dir.join("summary.csv"), summary_csv(report))?;
    put(dir.join("scatter.csv"), scatter_csv(report))?;
    for cell in &report.cells {
        for t in &cell.trials {
            let name = format!("{}_p{}_r{}_s{}.csv", t.planner.name(), cell.n_pois, cell.n_robots, t.seed);
            put(dir.join("curves").join(name), curve_csv(&t.trace))?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_choice_parses() {
        assert_eq!("oracle".parse::<EstimatorChoice>().unwrap(), EstimatorChoice::Oracle);
        assert_eq!(
            "fitted:out/p.json".parse::<EstimatorChoice>().unwrap(),
            EstimatorChoice::Fitted("out/p.json".into())
        );
        assert_eq!("external:x.jsonl".parse::<EstimatorChoice>().unwrap().to_string(), "external:x.jsonl");
        assert!("gnn".parse::<EstimatorChoice>().is_err());
        assert!("fitted:".parse::<EstimatorChoice>().is_err());
    }

    #[test]
    fn statistics() {
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
        assert_eq!(median(&[5.0, 1.0, 3.0, 2.0]), 2.5);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138089935299395).abs() < 1e-12);
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert!((pct_improvement(364.2, 435.1).unwrap() - 16.295).abs() < 1e-3);
        assert!((pct_improvement(221.1, 301.7).unwrap() - 26.715).abs() < 1e-3);
        assert_eq!(pct_improvement(0.0, 0.0), None);
    }

    #[test]
    fn empty_report_gives_header_only_csvs() {
        let report = AggregateReport::default();
        assert_eq!(String::from_utf8(summary_csv(&report)).unwrap(), format!("{}\n", SUMMARY_HEADER.join(",")));
        assert_eq!(String::from_utf8(scatter_csv(&report)).unwrap(), format!("{}\n", SCATTER_HEADER.join(",")));
    }
}
