//! Event-driven mission execution.
//!
//! The team replans whenever an inspection completes. Between events robots
//! move in straight lines at constant speed; a robot that keeps its target
//! across a replan keeps any inspection progress it has made.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{greedy_assign, optimistic_assign};
use crate::estimator::{Estimator, LikelihoodMap};
use crate::geometry::Point;
use crate::planner::{action_outcome, plan, PlannerConfig, PlannerError, PlanningState};
use crate::scenario::{Scenario, ScenarioError};
use crate::PoiId;

const POSITION_TOL: f64 = 1e-6;
const MOTION_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum PlannerKind {
    #[default]
    Model,
    Optimistic,
    Greedy,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Model, PlannerKind::Optimistic, PlannerKind::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Model => "model",
            PlannerKind::Optimistic => "optimistic",
            PlannerKind::Greedy => "greedy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PlannerKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionConfig {
    pub planner: PlannerKind,
    pub planner_config: PlannerConfig,
    pub estimator: Estimator,
    pub n_robots: usize,
    pub speed: f64,
    pub seed: u64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            planner: PlannerKind::Model,
            planner_config: PlannerConfig::default(),
            estimator: Estimator::Oracle,
            n_robots: 1,
            speed: 1.0,
            seed: 0,
        }
    }
}

impl MissionConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.planner_config.validate()?;
        if self.n_robots == 0 {
            return Err(SimError::InvalidConfig("n_robots must be at least 1"));
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(SimError::InvalidConfig("speed must be finite and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid mission config: {0}")]
    InvalidConfig(&'static str),
    #[error("planner returned an invalid action at t={time}")]
    InvalidAction { time: f64 },
    #[error("non-finite robot position at t={time}")]
    NonFinite { time: f64 },
}

/// Source of wall-clock readings for planning-time statistics.
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

/// A clock that never advances; planning times are all recorded as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum SimEventKind {
    InspectionComplete,
    MissionEnd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimEvent {
    pub time: f64,
    pub kind: SimEventKind,
    pub poi: Option<PoiId>,
    pub robot: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Reveal {
    pub time: f64,
    pub poi: PoiId,
    pub damaged: bool,
    pub robot: usize,
}

/// Mission state right after an event (the first point is t = 0).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CurvePoint {
    pub time: f64,
    pub distance_traveled: f64,
    pub expected_cost_accrued: f64,
    pub realized_cost_accrued: f64,
    pub n_damaged_unreported: usize,
    pub robot_positions: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlanningTimes {
    pub calls: usize,
    /// Wall time of every planning call in seconds, in call order.
    pub call_seconds: Vec<f64>,
}

impl PlanningTimes {
    pub fn total(&self) -> f64 {
        self.call_seconds.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.call_seconds.iter().copied().fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.call_seconds.clone();
        v.sort_by(f64::total_cmp);
        match v.len() {
            0 => 0.0,
            n if n % 2 == 1 => v[n / 2],
            n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MissionTrace {
    pub planner: PlannerKind,
    pub seed: u64,
    pub scenario_seed: u64,
    pub n_robots: usize,
    pub speed: f64,
    pub cost_rate: f64,
    pub start_position: Point,
    /// Raw (unclamped) likelihoods the mission was planned with.
    pub likelihoods: LikelihoodMap,
    pub events: Vec<SimEvent>,
    pub reveal_log: Vec<Reveal>,
    pub cost_curve: Vec<CurvePoint>,
    pub total_realized_cost: f64,
    pub total_expected_cost: f64,
    pub total_time: f64,
    pub total_distance: f64,
    pub planning: PlanningTimes,
}

impl MissionTrace {
    pub fn final_damaged_unreported(&self) -> usize {
        self.cost_curve.last().map_or(0, |c| c.n_damaged_unreported)
    }
}

pub fn run_mission(scenario: &Scenario, config: &MissionConfig) -> Result<MissionTrace, SimError> {
    run_mission_with_clock(scenario, config, &NullClock)
}

pub fn run_mission_with_clock(
    scenario: &Scenario,
    config: &MissionConfig,
    clock: &dyn Clock,
) -> Result<MissionTrace, SimError> {
    scenario.validate()?;
    config.validate()?;
    let k = config.planner_config.cost_rate;
    let likelihoods = config.estimator.estimate(scenario);
    let raw_p = |id: PoiId| likelihoods.get(id).unwrap_or(0.0);
    let damaged = |id: PoiId| scenario.poi(id).is_some_and(|p| p.damaged);

    let mut state = PlanningState::from_scenario(scenario, &likelihoods, config.n_robots, config.speed);
    let mut time = 0.0;
    let mut distance = 0.0;
    let mut expected = 0.0;
    let mut realized = 0.0;
    let mut n_unreported = scenario.n_damaged();
    let mut trace = MissionTrace {
        planner: config.planner,
        seed: config.seed,
        scenario_seed: scenario.seed,
        n_robots: config.n_robots,
        speed: config.speed,
        cost_rate: k,
        start_position: scenario.start_position,
        likelihoods: likelihoods.clone(),
        events: Vec::new(),
        reveal_log: Vec::new(),
        cost_curve: vec![CurvePoint {
            time: 0.0,
            distance_traveled: 0.0,
            expected_cost_accrued: 0.0,
            realized_cost_accrued: 0.0,
            n_damaged_unreported: n_unreported,
            robot_positions: state.robots.iter().map(|r| r.position).collect(),
        }],
        total_realized_cost: 0.0,
        total_expected_cost: 0.0,
        total_time: 0.0,
        total_distance: 0.0,
        planning: PlanningTimes::default(),
    };

    while !state.remaining.is_empty() {
        let started = clock.now_seconds();
        let action = match config.planner {
            PlannerKind::Model => plan(&state, &config.planner_config)?,
            PlannerKind::Optimistic => optimistic_assign(&state)?,
            PlannerKind::Greedy => greedy_assign(&state)?,
        };
        trace.planning.calls += 1;
        trace.planning.call_seconds.push((clock.now_seconds() - started).max(0.0));
        if !action.is_valid_for(&state) {
            return Err(SimError::InvalidAction { time });
        }
        let outcome = action_outcome(&state, &action)?;
        let dt = outcome.duration;
        let p_sum: f64 = state.remaining.iter().map(|p| raw_p(p.id)).sum();
        let damaged_left = state.remaining.iter().filter(|p| damaged(p.id)).count();
        expected += k * p_sum * dt;
        realized += k * damaged_left as f64 * dt;
        for (before, after) in state.robots.iter().zip(&outcome.successor.robots) {
            if !after.position.is_finite() {
                return Err(SimError::NonFinite { time });
            }
            distance += before.position.distance(after.position);
        }
        time += dt;
        let was_damaged = damaged(outcome.first_poi);
        if was_damaged {
            n_unreported -= 1;
        }
        trace.events.push(SimEvent {
            time,
            kind: SimEventKind::InspectionComplete,
            poi: Some(outcome.first_poi),
            robot: Some(outcome.finishing_robot),
        });
        trace.reveal_log.push(Reveal {
            time,
            poi: outcome.first_poi,
            damaged: was_damaged,
            robot: outcome.finishing_robot,
        });
        state = outcome.successor;
        state.elapsed = time;
        trace.cost_curve.push(CurvePoint {
            time,
            distance_traveled: distance,
            expected_cost_accrued: expected,
            realized_cost_accrued: realized,
            n_damaged_unreported: n_unreported,
            robot_positions: state.robots.iter().map(|r| r.position).collect(),
        });
    }
    trace.events.push(SimEvent { time, kind: SimEventKind::MissionEnd, poi: None, robot: None });
    trace.total_realized_cost = realized;
    trace.total_expected_cost = expected;
    trace.total_time = time;
    trace.total_distance = distance;
    Ok(trace)
}

/// Outcome of [`replay_check`]: empty `reasons` means the trace is consistent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayReport {
    pub reasons: Vec<String>,
}

impl ReplayReport {
    pub fn is_valid(&self) -> bool {
        self.reasons.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Re-derives every quantity of a trace from its reveal log and positions.
pub fn replay_check(trace: &MissionTrace, scenario: &Scenario) -> ReplayReport {
    let mut reasons = Vec::new();
    let speed = trace.speed;
    let k = trace.cost_rate;

    let mut seen: Vec<PoiId> = Vec::new();
    let mut last_time = 0.0;
    for r in &trace.reveal_log {
        let Some(poi) = scenario.poi(r.poi) else {
            reasons.push(format!("unknown PoI {} revealed", r.poi));
            continue;
        };
        if seen.contains(&r.poi) {
            reasons.push(format!("PoI {} revealed twice", r.poi));
        }
        seen.push(r.poi);
        if r.time < last_time {
            reasons.push(format!("reveal of PoI {} goes back in time", r.poi));
        }
        last_time = r.time;
        let earliest = trace.start_position.distance(poi.position) / speed + poi.inspect_time;
        if r.time < earliest - MOTION_TOL * earliest.max(1.0) {
            reasons.push(format!("unreachable reveal of PoI {} at t={} (earliest {})", r.poi, r.time, earliest));
        }
        if r.damaged != poi.damaged {
            reasons.push(format!("damage flag of PoI {} does not match the scenario", r.poi));
        }
    }
    for poi in &scenario.pois {
        if !seen.contains(&poi.id) {
            reasons.push(format!("PoI {} never revealed", poi.id));
        }
    }

    if trace.cost_curve.len() != trace.reveal_log.len() + 1 {
        reasons.push(String::from("cost curve does not have one point per reveal plus the start"));
        return ReplayReport { reasons };
    }
    let first = &trace.cost_curve[0];
    if first.time != 0.0 || first.robot_positions.iter().any(|p| *p != trace.start_position) {
        reasons.push(String::from("mission does not start at t=0 from the start position"));
    }
    if first.robot_positions.len() != trace.n_robots {
        reasons.push(String::from("robot count does not match the curve"));
        return ReplayReport { reasons };
    }

    let mut distance = 0.0;
    let mut realized = 0.0;
    let mut expected = 0.0;
    let mut unreported = scenario.n_damaged();
    if first.n_damaged_unreported != unreported {
        reasons.push(String::from("initial damaged count is wrong"));
    }
    let mut remaining: Vec<PoiId> = scenario.pois.iter().map(|p| p.id).collect();
    for (i, r) in trace.reveal_log.iter().enumerate() {
        let prev = &trace.cost_curve[i];
        let cur = &trace.cost_curve[i + 1];
        let dt = cur.time - prev.time;
        if cur.time != r.time {
            reasons.push(format!("curve point {} is not at reveal time", i + 1));
        }
        if cur.robot_positions.len() != trace.n_robots {
            reasons.push(format!("curve point {} has the wrong number of robots", i + 1));
            continue;
        }
        for (b, (a, c)) in prev.robot_positions.iter().zip(&cur.robot_positions).enumerate() {
            let step = a.distance(*c);
            if step > speed * dt + MOTION_TOL * (speed * dt).max(1.0) {
                reasons.push(format!("robot {b} moved {step} m in {dt} s"));
            }
            distance += step;
        }
        if let (Some(pos), Some(poi)) = (cur.robot_positions.get(r.robot), scenario.poi(r.poi)) {
            if pos.distance(poi.position) > POSITION_TOL {
                reasons.push(format!("robot {} is not at PoI {} when revealing it", r.robot, r.poi));
            }
        }
        let damaged_left = remaining.iter().filter(|&&id| scenario.poi(id).is_some_and(|p| p.damaged)).count();
        let p_sum: f64 = remaining.iter().map(|&id| trace.likelihoods.get(id).unwrap_or(0.0)).sum();
        realized += k * damaged_left as f64 * dt;
        expected += k * p_sum * dt;
        remaining.retain(|&id| id != r.poi);
        if r.damaged {
            unreported = unreported.saturating_sub(1);
        }
        if cur.n_damaged_unreported != unreported {
            reasons.push(format!("damaged count wrong after reveal {i}"));
        }
        if cur.n_damaged_unreported > prev.n_damaged_unreported {
            reasons.push(format!("damaged count increased after reveal {i}"));
        }
        if cur.realized_cost_accrued < prev.realized_cost_accrued {
            reasons.push(format!("realized cost decreased after reveal {i}"));
        }
        if !close(cur.realized_cost_accrued, realized) || !close(cur.expected_cost_accrued, expected) {
            reasons.push(format!("cost integrals disagree after reveal {i}"));
        }
        if !close(cur.distance_traveled, distance) {
            reasons.push(format!("distance disagrees after reveal {i}"));
        }
    }

    // closed forms: K * sum of damaged reveal times, K * sum of P(l) * t(l)
    let closed_realized: f64 = k * trace.reveal_log.iter().filter(|r| r.damaged).map(|r| r.time).sum::<f64>();
    let closed_expected: f64 =
        k * trace.reveal_log.iter().map(|r| trace.likelihoods.get(r.poi).unwrap_or(0.0) * r.time).sum::<f64>();
    if !close(trace.total_realized_cost, closed_realized) || !close(trace.total_realized_cost, realized) {
        reasons.push(String::from("total realized cost does not match the reveal log"));
    }
    if !close(trace.total_expected_cost, closed_expected) {
        reasons.push(String::from("total expected cost does not match the reveal log"));
    }
    if trace.total_time != trace.reveal_log.last().map_or(0.0, |r| r.time) {
        reasons.push(String::from("total time is not the last reveal time"));
    }
    if !close(trace.total_distance, distance) {
        reasons.push(String::from("total distance does not match the positions"));
    }
    if trace.final_damaged_unreported() != 0 {
        reasons.push(String::from("mission ended with damaged PoIs unreported"));
    }
    ReplayReport { reasons }
}
