//! On-disk formats: scenarios, graphs, fitted parameters, mission traces and
//! externally produced likelihoods.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::de::Deserializer;
use serde::ser::{Error as _, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use tcsearch_core::estimator::{FittedParams, LikelihoodMap};
use tcsearch_core::scenario::{
    CombineRule, GenerativeParams, Poi, PoiClass, Scenario, ScenarioGraph, Susceptibility, WindPocket,
};
use tcsearch_core::simulator::{CurvePoint, MissionTrace, PlannerKind, PlanningTimes, Reveal, SimEvent, SimEventKind};
use tcsearch_core::{Point, PoiId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> FormatError + '_ {
    move |source| FormatError::Json { path: path.to_path_buf(), source }
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// A coordinate written with exactly two decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Fixed2(f64);

impl Serialize for Fixed2 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom("coordinates must be finite"));
        }
        let raw = RawValue::from_string(format!("{:.2}", self.0)).map_err(S::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fixed2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Fixed2)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    sigma: f64,
    susceptibility: Susceptibility,
    n_wind_pockets: usize,
    map_radius: f64,
    combine_rule: CombineRule,
}

#[derive(Serialize, Deserialize)]
struct PoiFile {
    id: PoiId,
    x: Fixed2,
    y: Fixed2,
    class: PoiClass,
    inspect_time: f64,
    damaged: bool,
}

#[derive(Serialize, Deserialize)]
struct PocketFile {
    x: Fixed2,
    y: Fixed2,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    seed: u64,
    params: ParamsFile,
    start: [Fixed2; 2],
    pois: Vec<PoiFile>,
    wind_pockets: Vec<PocketFile>,
}

pub fn scenario_to_json(scenario: &Scenario) -> Result<String, serde_json::Error> {
    let p = &scenario.params;
    let file = ScenarioFile {
        seed: scenario.seed,
        params: ParamsFile {
            sigma: p.sigma,
            susceptibility: p.susceptibility,
            n_wind_pockets: p.n_wind_pockets,
            map_radius: p.map_radius,
            combine_rule: p.combine_rule,
        },
        start: [Fixed2(scenario.start_position.x), Fixed2(scenario.start_position.y)],
        pois: scenario
            .pois
            .iter()
            .map(|poi| PoiFile {
                id: poi.id,
                x: Fixed2(poi.position.x),
                y: Fixed2(poi.position.y),
                class: poi.class,
                inspect_time: poi.inspect_time,
                damaged: poi.damaged,
            })
            .collect(),
        wind_pockets: scenario
            .wind_pockets
            .iter()
            .map(|w| PocketFile { x: Fixed2(w.position.x), y: Fixed2(w.position.y) })
            .collect(),
    };
    serde_json::to_string_pretty(&file)
}

pub fn scenario_from_json(text: &str) -> Result<Scenario, serde_json::Error> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    Ok(Scenario {
        pois: file
            .pois
            .into_iter()
            .map(|p| Poi {
                id: p.id,
                position: Point::new(p.x.0, p.y.0),
                class: p.class,
                inspect_time: p.inspect_time,
                damaged: p.damaged,
            })
            .collect(),
        wind_pockets: file.wind_pockets.into_iter().map(|w| WindPocket { position: Point::new(w.x.0, w.y.0) }).collect(),
        start_position: Point::new(file.start[0].0, file.start[1].0),
        params: GenerativeParams {
            sigma: file.params.sigma,
            susceptibility: file.params.susceptibility,
            n_wind_pockets: file.params.n_wind_pockets,
            map_radius: file.params.map_radius,
            combine_rule: file.params.combine_rule,
        },
        seed: file.seed,
    })
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<(), FormatError> {
    let text = scenario_to_json(scenario).map_err(json_err(path))?;
    write_file(path, text.as_bytes())
}

/// Reads and validates a scenario file.
pub fn read_scenario(path: &Path) -> Result<Scenario, FormatError> {
    let scenario = scenario_from_json(&read_file(path)?).map_err(json_err(path))?;
    scenario
        .validate()
        .map_err(|e| FormatError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(scenario)
}

pub fn write_graph(path: &Path, graph: &ScenarioGraph) -> Result<(), FormatError> {
    let text = serde_json::to_string(graph).map_err(json_err(path))?;
    write_file(path, text.as_bytes())
}

pub fn read_graph(path: &Path) -> Result<ScenarioGraph, FormatError> {
    serde_json::from_str(&read_file(path)?).map_err(json_err(path))
}

pub fn write_fitted_params(path: &Path, params: &FittedParams) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(params).map_err(json_err(path))?;
    write_file(path, text.as_bytes())
}

pub fn read_fitted_params(path: &Path) -> Result<FittedParams, FormatError> {
    serde_json::from_str(&read_file(path)?).map_err(json_err(path))
}

#[derive(Serialize, Deserialize)]
struct ExternalRecord {
    seed: u64,
    likelihoods: LikelihoodMap,
}

/// Likelihoods produced outside this crate, one JSON object per line:
/// `{"seed": 17, "likelihoods": {"0": 0.12, "1": 0.003}}`, keyed by scenario
/// seed.
pub fn read_external_likelihoods(path: &Path) -> Result<BTreeMap<u64, LikelihoodMap>, FormatError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExternalRecord = serde_json::from_str(&line).map_err(json_err(path))?;
        out.insert(record.seed, record.likelihoods);
    }
    Ok(out)
}

pub fn write_external_likelihoods(path: &Path, maps: &BTreeMap<u64, LikelihoodMap>) -> Result<(), FormatError> {
    let mut buf = Vec::new();
    for (&seed, likelihoods) in maps {
        let line = serde_json::to_string(&ExternalRecord { seed, likelihoods: likelihoods.clone() })
            .map_err(json_err(path))?;
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceRecord {
    Mission {
        planner: PlannerKind,
        seed: u64,
        scenario_seed: u64,
        n_robots: usize,
        speed: f64,
        cost_rate: f64,
        start: Point,
        n_damaged_unreported: usize,
        // string keys: tagged enums buffer their content, which loses the
        // integer coercion of JSON object keys
        likelihoods: BTreeMap<String, f64>,
    },
    Event {
        time: f64,
        kind: SimEventKind,
        poi: Option<PoiId>,
        robot: Option<usize>,
        damaged: Option<bool>,
        distance_traveled: f64,
        expected_cost_accrued: f64,
        realized_cost_accrued: f64,
        n_damaged_unreported: usize,
        robot_positions: Vec<Point>,
    },
    Summary {
        total_realized_cost: f64,
        total_expected_cost: f64,
        total_time: f64,
        total_distance: f64,
        planning_calls: usize,
        planning_call_seconds: Vec<f64>,
    },
}

/// Mission trace as JSON lines: a `mission` header, one `event` per
/// inspection plus the closing `mission_end`, then a `summary`.
pub fn trace_to_jsonl(trace: &MissionTrace) -> Result<String, serde_json::Error> {
    let mut records = vec![TraceRecord::Mission {
        planner: trace.planner,
        seed: trace.seed,
        scenario_seed: trace.scenario_seed,
        n_robots: trace.n_robots,
        speed: trace.speed,
        cost_rate: trace.cost_rate,
        start: trace.start_position,
        n_damaged_unreported: trace.cost_curve.first().map_or(0, |c| c.n_damaged_unreported),
        likelihoods: trace.likelihoods.iter().map(|(id, p)| (id.to_string(), p)).collect(),
    }];
    let mut reveals = trace.reveal_log.iter();
    let mut curve = trace.cost_curve.iter().skip(1);
    let last = trace.cost_curve.last();
    for event in &trace.events {
        let (point, damaged) = match event.kind {
            SimEventKind::InspectionComplete => (curve.next(), reveals.next().map(|r| r.damaged)),
            SimEventKind::MissionEnd => (last, None),
        };
        let point = point.expect("one curve point per event");
        records.push(TraceRecord::Event {
            time: event.time,
            kind: event.kind,
            poi: event.poi,
            robot: event.robot,
            damaged,
            distance_traveled: point.distance_traveled,
            expected_cost_accrued: point.expected_cost_accrued,
            realized_cost_accrued: point.realized_cost_accrued,
            n_damaged_unreported: point.n_damaged_unreported,
            robot_positions: point.robot_positions.clone(),
        });
    }
    records.push(TraceRecord::Summary {
        total_realized_cost: trace.total_realized_cost,
        total_expected_cost: trace.total_expected_cost,
        total_time: trace.total_time,
        total_distance: trace.total_distance,
        planning_calls: trace.planning.calls,
        planning_call_seconds: trace.planning.call_seconds.clone(),
    });
    let mut out = String::new();
    for r in &records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn trace_from_jsonl(text: &str) -> Result<MissionTrace, String> {
    let mut trace: Option<MissionTrace> = None;
    let mut summarized = false;
    for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let record: TraceRecord = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", lineno + 1))?;
        match record {
            TraceRecord::Mission {
                planner,
                seed,
                scenario_seed,
                n_robots,
                speed,
                cost_rate,
                start,
                n_damaged_unreported,
                likelihoods,
            } => {
                let mut map = LikelihoodMap::new();
                for (key, p) in likelihoods {
                    let id = key.parse::<PoiId>().map_err(|_| format!("line {}: bad PoI id '{key}'", lineno + 1))?;
                    map.insert(id, p);
                }
                trace = Some(MissionTrace {
                    planner,
                    seed,
                    scenario_seed,
                    n_robots,
                    speed,
                    cost_rate,
                    start_position: start,
                    likelihoods: map,
                    events: Vec::new(),
                    reveal_log: Vec::new(),
                    cost_curve: vec![CurvePoint {
                        time: 0.0,
                        distance_traveled: 0.0,
                        expected_cost_accrued: 0.0,
                        realized_cost_accrued: 0.0,
                        n_damaged_unreported,
                        robot_positions: vec![start; n_robots],
                    }],
                    total_realized_cost: 0.0,
                    total_expected_cost: 0.0,
                    total_time: 0.0,
                    total_distance: 0.0,
                    planning: PlanningTimes::default(),
                });
            }
            TraceRecord::Event {
                time,
                kind,
                poi,
                robot,
                damaged,
                distance_traveled,
                expected_cost_accrued,
                realized_cost_accrued,
                n_damaged_unreported,
                robot_positions,
            } => {
                let t = trace.as_mut().ok_or("event before mission header")?;
                t.events.push(SimEvent { time, kind, poi, robot });
                if kind == SimEventKind::InspectionComplete {
                    let (Some(poi), Some(robot), Some(damaged)) = (poi, robot, damaged) else {
                        return Err(format!("line {}: inspection event without poi, robot or damaged", lineno + 1));
                    };
                    t.reveal_log.push(Reveal { time, poi, damaged, robot });
                    t.cost_curve.push(CurvePoint {
                        time,
                        distance_traveled,
                        expected_cost_accrued,
                        realized_cost_accrued,
                        n_damaged_unreported,
                        robot_positions,
                    });
                }
            }
            TraceRecord::Summary {
                total_realized_cost,
                total_expected_cost,
                total_time,
                total_distance,
                planning_calls,
                planning_call_seconds,
            } => {
                let t = trace.as_mut().ok_or("summary before mission header")?;
                if summarized {
                    return Err(format!("line {}: second summary", lineno + 1));
                }
                summarized = true;
                t.total_realized_cost = total_realized_cost;
                t.total_expected_cost = total_expected_cost;
                t.total_time = total_time;
                t.total_distance = total_distance;
                t.planning = PlanningTimes { calls: planning_calls, call_seconds: planning_call_seconds };
            }
        }
    }
    match trace {
        None => Err("no mission header".into()),
        Some(_) if !summarized => Err("missing summary line".into()),
        Some(t) => Ok(t),
    }
}

pub fn write_trace(path: &Path, trace: &MissionTrace) -> Result<(), FormatError> {
    let text = trace_to_jsonl(trace).map_err(json_err(path))?;
    write_file(path, text.as_bytes())
}

pub fn read_trace(path: &Path) -> Result<MissionTrace, FormatError> {
    trace_from_jsonl(&read_file(path)?).map_err(|message| FormatError::Invalid { path: path.to_path_buf(), message })
}
