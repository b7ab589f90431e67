//! Expected-cost planning for a robot team.
//!
//! A joint action sends every robot toward one PoI. It ends as soon as the
//! first robot completes an inspection; during that interval cost accrues at
//! `K * sum(P(l))` over the un-inspected PoIs. The planner minimises the total
//! accrued cost by depth-first branch-and-bound over sequences of such
//! actions.
//!
//! Search only re-assigns robots that became free at the last event; robots
//! still travelling keep their targets. With an unlimited depth this returns
//! the same optimum as re-assigning the whole team at every event: an optimal
//! team policy is a set of straight-line routes, and any retargeting in the
//! middle of a leg can be shortcut by the triangle inequality. Below
//! `depth_cap` levels the remaining cost is completed with a greedy rollout.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{clamp_for_planning, LikelihoodMap};
use crate::geometry::Point;
use crate::scenario::Scenario;
use crate::PoiId;

/// Bitmask search supports at most this many PoIs in one call.
pub const MAX_SEARCH_POIS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("no PoIs remain to be planned")]
    EmptyRemaining,
    #[error("the team has no robots")]
    NoRobots,
    #[error("{0} PoIs exceed the search limit of {MAX_SEARCH_POIS}")]
    TooManyPois(usize),
    #[error("invalid planner config: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid planning state: {0}")]
    InvalidState(&'static str),
    #[error("joint action is not valid for this state")]
    InvalidAction,
}

/// A PoI as the planner sees it; `likelihood` is already clamped for planning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoi {
    pub id: PoiId,
    pub position: Point,
    pub inspect_time: f64,
    pub likelihood: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub position: Point,
    pub speed: f64,
    /// PoI the robot is currently heading to or inspecting.
    pub target: Option<PoiId>,
    /// Seconds of inspection already spent at `target`; only non-zero once the
    /// robot has arrived there. Lost if the robot is sent elsewhere.
    pub progress: f64,
}

impl RobotState {
    pub fn new(position: Point, speed: f64) -> Self {
        RobotState { position, speed, target: None, progress: 0.0 }
    }

    fn credit(&self, id: PoiId) -> f64 {
        if self.target == Some(id) {
            self.progress
        } else {
            0.0
        }
    }

    /// Time until this robot would finish inspecting `poi` if sent there now.
    pub fn completion_time(&self, poi: &PlanPoi) -> f64 {
        travel_time(self.position, poi.position, self.speed) + (poi.inspect_time - self.credit(poi.id)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningState {
    /// Un-inspected PoIs, sorted by id.
    pub remaining: Vec<PlanPoi>,
    pub robots: Vec<RobotState>,
    pub elapsed: f64,
}

impl PlanningState {
    pub fn new(mut remaining: Vec<PlanPoi>, robots: Vec<RobotState>) -> Self {
        remaining.sort_by_key(|p| p.id);
        PlanningState { remaining, robots, elapsed: 0.0 }
    }

    /// Initial state for a scenario: all robots idle at the start position,
    /// likelihoods clamped into the planning range.
    pub fn from_scenario(scenario: &Scenario, likelihoods: &LikelihoodMap, n_robots: usize, speed: f64) -> Self {
        let remaining = scenario
            .pois
            .iter()
            .map(|p| PlanPoi {
                id: p.id,
                position: p.position,
                inspect_time: p.inspect_time,
                likelihood: clamp_for_planning(likelihoods.get(p.id).unwrap_or(0.0)),
            })
            .collect();
        PlanningState::new(remaining, vec![RobotState::new(scenario.start_position, speed); n_robots])
    }

    pub fn poi(&self, id: PoiId) -> Option<&PlanPoi> {
        self.remaining.binary_search_by_key(&id, |p| p.id).ok().map(|i| &self.remaining[i])
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.robots.is_empty() {
            return Err(PlannerError::NoRobots);
        }
        if self.remaining.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(PlannerError::InvalidState("remaining PoIs must be sorted with unique ids"));
        }
        for r in &self.robots {
            if !(r.speed.is_finite() && r.speed > 0.0) {
                return Err(PlannerError::InvalidState("robot speed must be finite and positive"));
            }
            if !r.position.is_finite() {
                return Err(PlannerError::InvalidState("robot position must be finite"));
            }
        }
        for p in &self.remaining {
            if !(0.0..=1.0).contains(&p.likelihood) || !(p.inspect_time >= 0.0) || !p.position.is_finite() {
                return Err(PlannerError::InvalidState("PoI has invalid likelihood, inspection time or position"));
            }
        }
        Ok(())
    }

    /// The same state with only the listed PoIs remaining. Robot targets outside
    /// the subset are dropped.
    pub fn restrict(&self, ids: &[PoiId]) -> PlanningState {
        let remaining: Vec<PlanPoi> = self.remaining.iter().filter(|p| ids.contains(&p.id)).copied().collect();
        let robots = self
            .robots
            .iter()
            .map(|r| match r.target {
                Some(t) if !ids.contains(&t) => RobotState { target: None, progress: 0.0, ..*r },
                _ => *r,
            })
            .collect();
        PlanningState { remaining, robots, elapsed: self.elapsed }
    }
}

/// One target PoI per robot, indexed by robot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct JointAction {
    pub targets: Vec<PoiId>,
}

impl JointAction {
    /// Checks the target constraints: every target remains, targets are
    /// distinct when there are at least as many PoIs as robots, and otherwise
    /// every remaining PoI is covered.
    pub fn is_valid_for(&self, state: &PlanningState) -> bool {
        if self.targets.len() != state.robots.len() || state.remaining.is_empty() {
            return false;
        }
        if !self.targets.iter().all(|&t| state.poi(t).is_some()) {
            return false;
        }
        if state.remaining.len() >= state.robots.len() {
            let mut sorted = self.targets.clone();
            sorted.sort_unstable();
            sorted.windows(2).all(|w| w[0] != w[1])
        } else {
            state.remaining.iter().all(|p| self.targets.contains(&p.id))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub duration: f64,
    pub first_poi: PoiId,
    pub finishing_robot: usize,
    pub successor: PlanningState,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct PlannerConfig {
    /// Cost per second per PoI-needing-attention (K).
    pub cost_rate: f64,
    pub n_priority: usize,
    pub n_top_prob: usize,
    /// Number of events searched exactly before the greedy rollout takes over.
    pub depth_cap: usize,
    /// Children whose bound is within this much of the incumbent are pruned.
    pub bound_slack: f64,
    /// Turns branch-and-bound pruning off entirely when false.
    pub prune: bool,
    /// Upper limit on node expansions per search; `None` searches to completion.
    pub max_expansions: Option<u64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            cost_rate: 1.0,
            n_priority: 12,
            n_top_prob: 6,
            depth_cap: 4,
            bound_slack: 0.0,
            prune: true,
            max_expansions: Some(DEFAULT_MAX_EXPANSIONS),
        }
    }
}

pub const DEFAULT_MAX_EXPANSIONS: u64 = 1_000_000;

impl PlannerConfig {
    /// Exhaustive settings: no expansion limit and a depth covering `n_pois`.
    pub fn exact(n_pois: usize) -> Self {
        PlannerConfig { depth_cap: n_pois.max(1), max_expansions: None, n_priority: n_pois.max(12), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.cost_rate.is_finite() && self.cost_rate > 0.0) {
            return Err(PlannerError::InvalidConfig("cost_rate must be finite and positive"));
        }
        if self.n_top_prob > self.n_priority {
            return Err(PlannerError::InvalidConfig("n_top_prob must not exceed n_priority"));
        }
        if self.n_priority == 0 || self.n_priority > MAX_SEARCH_POIS {
            return Err(PlannerError::InvalidConfig("n_priority must be in 1..=64"));
        }
        if self.depth_cap == 0 {
            return Err(PlannerError::InvalidConfig("depth_cap must be at least 1"));
        }
        if !(self.bound_slack >= 0.0) {
            return Err(PlannerError::InvalidConfig("bound_slack must be non-negative"));
        }
        Ok(())
    }
}

pub fn travel_time(from: Point, to: Point, speed: f64) -> f64 {
    from.distance(to) / speed
}

// ---------------------------------------------------------------------------
// Index-based search model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Bot {
    pos: Point,
    speed: f64,
    target: Option<usize>,
    progress: f64,
}

#[derive(Debug, Clone)]
struct Node {
    mask: u64,
    bots: Vec<Bot>,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    duration: f64,
    poi: usize,
    robot: usize,
    /// `duration * sum(P)` over the PoIs remaining before the event.
    cost: f64,
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    let mut m = mask;
    core::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

/// Static data of one search: PoIs indexed in id order.
struct Model {
    ids: Vec<PoiId>,
    pos: Vec<Point>,
    insp: Vec<f64>,
    prob: Vec<f64>,
    dist: Vec<f64>,
    n: usize,
    max_speed: f64,
}

impl Model {
    fn build(state: &PlanningState) -> Result<(Model, Node), PlannerError> {
        state.validate()?;
        let n = state.remaining.len();
        if n > MAX_SEARCH_POIS {
            return Err(PlannerError::TooManyPois(n));
        }
        let pos: Vec<Point> = state.remaining.iter().map(|p| p.position).collect();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = pos[i].distance(pos[j]);
            }
        }
        let model = Model {
            ids: state.remaining.iter().map(|p| p.id).collect(),
            insp: state.remaining.iter().map(|p| p.inspect_time).collect(),
            prob: state.remaining.iter().map(|p| p.likelihood).collect(),
            pos,
            dist,
            n,
            max_speed: state.robots.iter().map(|r| r.speed).fold(0.0, f64::max),
        };
        let bots = state
            .robots
            .iter()
            .map(|r| {
                let target = r.target.and_then(|t| model.index_of(t));
                Bot { pos: r.position, speed: r.speed, target, progress: if target.is_some() { r.progress } else { 0.0 } }
            })
            .collect();
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Ok((model, Node { mask, bots }))
    }

    fn index_of(&self, id: PoiId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    fn sum_p(&self, mask: u64) -> f64 {
        bits(mask).map(|i| self.prob[i]).sum()
    }

    fn completion(&self, bot: &Bot, i: usize) -> f64 {
        let credit = if bot.target == Some(i) { bot.progress } else { 0.0 };
        bot.pos.distance(self.pos[i]) / bot.speed + (self.insp[i] - credit).max(0.0)
    }

    fn to_state(&self, node: &Node, elapsed: f64) -> PlanningState {
        let remaining = bits(node.mask)
            .map(|i| PlanPoi { id: self.ids[i], position: self.pos[i], inspect_time: self.insp[i], likelihood: self.prob[i] })
            .collect();
        let robots = node
            .bots
            .iter()
            .map(|b| RobotState {
                position: b.pos,
                speed: b.speed,
                target: b.target.map(|t| self.ids[t]),
                progress: b.progress,
            })
            .collect();
        PlanningState { remaining, robots, elapsed }
    }

    /// Runs one joint action (`targets[b]` for every bot) until the first
    /// inspection completes. Ties go to the lowest PoI id, then robot index.
    fn advance(&self, node: &Node, targets: &[usize]) -> (Event, Node) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (b, (bot, &t)) in node.bots.iter().zip(targets).enumerate() {
            let c = self.completion(bot, t);
            let better = match best {
                None => true,
                Some((bc, bp, _)) => c < bc || (c == bc && t < bp),
            };
            if better {
                best = Some((c, t, b));
            }
        }
        let (duration, first, robot) = best.expect("at least one robot");
        let cost = duration * self.sum_p(node.mask);
        let bots = node
            .bots
            .iter()
            .zip(targets)
            .map(|(bot, &t)| {
                let credit = if bot.target == Some(t) { bot.progress } else { 0.0 };
                let travel = bot.pos.distance(self.pos[t]) / bot.speed;
                let pos = bot.pos.step_toward(self.pos[t], duration * bot.speed);
                if t == first {
                    Bot { pos, speed: bot.speed, target: None, progress: 0.0 }
                } else {
                    let progress = (credit + (duration - travel).max(0.0)).min(self.insp[t]);
                    Bot { pos, speed: bot.speed, target: Some(t), progress }
                }
            })
            .collect();
        (Event { duration, poi: first, robot, cost }, Node { mask: node.mask & !(1u64 << first), bots })
    }

    fn free_bots(&self, node: &Node) -> (Vec<usize>, u64) {
        let mut free = Vec::new();
        let mut busy = 0u64;
        for (b, bot) in node.bots.iter().enumerate() {
            match bot.target {
                Some(t) if node.mask & (1u64 << t) != 0 => busy |= 1u64 << t,
                _ => free.push(b),
            }
        }
        (free, busy)
    }

    /// All target choices for the `free` bots, flattened `free.len()` at a
    /// time, in lexicographic order by robot then PoI id. Free bots take
    /// distinct untargeted PoIs while enough exist; otherwise they must cover
    /// every untargeted PoI and may share the rest.
    fn assignments(&self, mask: u64, busy: u64, n_free: usize, out: &mut Vec<usize>) {
        let untargeted = mask & !busy;
        let injective = n_free <= untargeted.count_ones() as usize;
        let pool: Vec<usize> = bits(if injective { untargeted } else { mask }).collect();
        let mut current = Vec::with_capacity(n_free);
        fn rec(
            pool: &[usize],
            n_free: usize,
            injective: bool,
            untargeted: u64,
            used: u64,
            current: &mut Vec<usize>,
            out: &mut Vec<usize>,
        ) {
            if current.len() == n_free {
                if injective || untargeted & !used == 0 {
                    out.extend_from_slice(current);
                }
                return;
            }
            for &i in pool {
                let bit = 1u64 << i;
                if injective && used & bit != 0 {
                    continue;
                }
                current.push(i);
                rec(pool, n_free, injective, untargeted, used | bit, current, out);
                current.pop();
            }
        }
        rec(&pool, n_free, injective, untargeted, 0, &mut current, out);
    }

    /// Lower bound on the cost-to-go (K = 1): every PoI reached directly by the
    /// quickest robot, ignoring contention.
    fn simple_bound(&self, node: &Node) -> f64 {
        bits(node.mask)
            .map(|i| {
                let t = node.bots.iter().map(|b| self.completion(b, i)).fold(f64::INFINITY, f64::min);
                self.prob[i] * t
            })
            .sum()
    }

    /// Contention-aware lower bound on the cost-to-go (K = 1).
    ///
    /// Each robot reveals at most one PoI directly from where it stands; any
    /// other PoI is reached from a previously revealed one, so it cannot be
    /// revealed before `e2(l) = min_m e1(m) + d(m, l) / v_max + T_R(l)`. At most
    /// `robots` PoIs are granted their direct time `e1`; picking the largest
    /// savings without matching them to distinct robots keeps the bound valid.
    fn contention_bound(&self, node: &Node) -> f64 {
        let k = node.mask.count_ones() as usize;
        if k == 0 {
            return 0.0;
        }
        let mut e1 = [0.0f64; MAX_SEARCH_POIS];
        for i in bits(node.mask) {
            e1[i] = node.bots.iter().map(|b| self.completion(b, i)).fold(f64::INFINITY, f64::min);
        }
        if k <= node.bots.len() {
            return bits(node.mask).map(|i| self.prob[i] * e1[i]).sum();
        }
        let mut total = 0.0;
        let mut savings = [0.0f64; MAX_SEARCH_POIS];
        let mut ns = 0;
        for i in bits(node.mask) {
            let row = &self.dist[i * self.n..(i + 1) * self.n];
            let mut reach = f64::INFINITY;
            for j in bits(node.mask & !(1u64 << i)) {
                reach = reach.min(e1[j] + row[j] / self.max_speed);
            }
            let e2 = (reach + self.insp[i]).max(e1[i]);
            total += self.prob[i] * e2;
            savings[ns] = self.prob[i] * (e2 - e1[i]);
            ns += 1;
        }
        let savings = &mut savings[..ns];
        savings.sort_unstable_by(|a, b| b.total_cmp(a));
        total - savings.iter().take(node.bots.len()).sum::<f64>()
    }

    fn nearest(&self, bot: &Bot, candidates: u64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for i in bits(candidates) {
            let d = bot.pos.distance(self.pos[i]);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Greedy completion cost (K = 1): robots in index order take their nearest
    /// free PoI, sharing only when PoIs run short. With `keep_commitments`,
    /// robots already heading somewhere keep their target.
    fn rollout(&self, node: &Node, keep_commitments: bool) -> f64 {
        let mut node = node.clone();
        let mut total = 0.0;
        let mut targets = vec![0usize; node.bots.len()];
        while node.mask != 0 {
            let mut taken = 0u64;
            let mut open = vec![true; node.bots.len()];
            if keep_commitments {
                for (b, bot) in node.bots.iter().enumerate() {
                    if let Some(t) = bot.target.filter(|&t| node.mask & (1u64 << t) != 0) {
                        targets[b] = t;
                        taken |= 1u64 << t;
                        open[b] = false;
                    }
                }
            }
            for (b, bot) in node.bots.iter().enumerate() {
                if !open[b] {
                    continue;
                }
                let pick = self
                    .nearest(bot, node.mask & !taken)
                    .or_else(|| self.nearest(bot, node.mask))
                    .expect("mask is non-empty");
                targets[b] = pick;
                taken |= 1u64 << pick;
            }
            let (event, next) = self.advance(&node, &targets);
            total += event.cost;
            node = next;
        }
        total
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Every valid joint action for the state, re-assigning all robots.
pub fn enumerate_joint_actions(state: &PlanningState) -> Result<Vec<JointAction>, PlannerError> {
    if state.remaining.is_empty() {
        return Err(PlannerError::EmptyRemaining);
    }
    let (model, node) = Model::build(state)?;
    let n_bots = node.bots.len();
    let mut flat = Vec::new();
    model.assignments(node.mask, 0, n_bots, &mut flat);
    Ok(flat
        .chunks(n_bots)
        .map(|c| JointAction { targets: c.iter().map(|&i| model.ids[i]).collect() })
        .collect())
}

pub fn action_outcome(state: &PlanningState, action: &JointAction) -> Result<ActionOutcome, PlannerError> {
    if state.remaining.is_empty() {
        return Err(PlannerError::EmptyRemaining);
    }
    if !action.is_valid_for(state) {
        return Err(PlannerError::InvalidAction);
    }
    let (model, node) = Model::build(state)?;
    let targets: Vec<usize> = action.targets.iter().map(|&t| model.index_of(t).expect("validated")).collect();
    let (event, next) = model.advance(&node, &targets);
    Ok(ActionOutcome {
        duration: event.duration,
        first_poi: model.ids[event.poi],
        finishing_robot: event.robot,
        successor: model.to_state(&next, state.elapsed + event.duration),
    })
}

/// `accrued` plus K times the contention-free completion bound.
pub fn lower_bound(state: &PlanningState, accrued: f64, config: &PlannerConfig) -> f64 {
    match Model::build(state) {
        Ok((model, node)) => accrued + config.cost_rate * model.simple_bound(&node),
        Err(_) => accrued,
    }
}

/// The tighter bound used for pruning; never below [`lower_bound`].
pub fn contention_bound(state: &PlanningState, accrued: f64, config: &PlannerConfig) -> f64 {
    match Model::build(state) {
        Ok((model, node)) => accrued + config.cost_rate * model.contention_bound(&node),
        Err(_) => accrued,
    }
}

/// Cost of the greedy nearest-PoI completion from `state`, re-assigning every
/// robot at every event.
pub fn rollout_estimate(state: &PlanningState, config: &PlannerConfig) -> f64 {
    match Model::build(state) {
        Ok((model, node)) => config.cost_rate * model.rollout(&node, false),
        Err(_) => 0.0,
    }
}

/// Up to `max(n_priority, robots)` PoIs: the `n_top_prob` most likely, then
/// robots in turn adding their nearest unselected PoI. Returned sorted by id.
pub fn select_priority_subset(state: &PlanningState, config: &PlannerConfig) -> Vec<PoiId> {
    let target = config.n_priority.max(state.robots.len());
    if state.remaining.len() <= target {
        return state.remaining.iter().map(|p| p.id).collect();
    }
    let mut by_likelihood: Vec<&PlanPoi> = state.remaining.iter().collect();
    by_likelihood.sort_by(|a, b| b.likelihood.total_cmp(&a.likelihood).then(a.id.cmp(&b.id)));
    let mut chosen: Vec<PoiId> = by_likelihood.iter().take(config.n_top_prob.min(target)).map(|p| p.id).collect();
    'fill: while chosen.len() < target {
        for robot in &state.robots {
            if chosen.len() >= target {
                break 'fill;
            }
            let next = state
                .remaining
                .iter()
                .filter(|p| !chosen.contains(&p.id))
                .min_by(|a, b| {
                    robot.position.distance(a.position).total_cmp(&robot.position.distance(b.position)).then(a.id.cmp(&b.id))
                });
            match next {
                Some(p) => chosen.push(p.id),
                None => break 'fill,
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Counters from one search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub expansions: u64,
    pub leaves: u64,
    pub pruned: u64,
    /// Incumbent cost (K units) each time it improved, in discovery order.
    pub incumbent_trace: Vec<f64>,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub action: JointAction,
    /// Expected cost (K units) of the best plan found.
    pub cost: f64,
    pub stats: SearchStats,
}

/// Called at every expanded node with the node state and its [`lower_bound`].
pub type NodeObserver<'a> = &'a mut dyn FnMut(&PlanningState, f64);

struct Search<'a, 'o> {
    model: &'a Model,
    config: &'a PlannerConfig,
    /// Slack in K = 1 units.
    slack: f64,
    incumbent: f64,
    best_root: usize,
    root_idx: usize,
    stats: SearchStats,
    observer: Option<NodeObserver<'o>>,
}

struct Child {
    f: f64,
    idx: usize,
    event: Event,
    node: Node,
}

impl Search<'_, '_> {
    fn offer(&mut self, total: f64) {
        self.stats.leaves += 1;
        if total < self.incumbent || (total == self.incumbent && self.root_idx < self.best_root) {
            self.incumbent = total;
            self.best_root = self.root_idx;
            self.stats.incumbent_trace.push(total * self.config.cost_rate);
        }
    }

    fn pruned(&self, f: f64, root_idx: usize) -> bool {
        if !self.config.prune {
            return false;
        }
        let cut = self.incumbent - self.slack;
        f > cut || (f == cut && !(self.slack == 0.0 && root_idx < self.best_root))
    }

    fn out_of_budget(&self) -> bool {
        self.config.max_expansions.is_some_and(|m| self.stats.expansions >= m)
    }

    fn children(&mut self, node: &Node, accrued: f64, elapsed: f64, all_free: bool) -> Vec<Child> {
        self.stats.expansions += 1;
        if let Some(obs) = self.observer.as_mut() {
            let state = self.model.to_state(node, elapsed);
            let lb = self.config.cost_rate * self.model.simple_bound(node);
            obs(&state, lb);
        }
        let (free, busy) = if all_free {
            ((0..node.bots.len()).collect(), 0)
        } else {
            self.model.free_bots(node)
        };
        let mut flat = Vec::new();
        self.model.assignments(node.mask, busy, free.len(), &mut flat);
        let mut targets: Vec<usize> =
            node.bots.iter().map(|b| b.target.filter(|&t| node.mask & (1u64 << t) != 0).unwrap_or(0)).collect();
        let step = free.len().max(1);
        let mut out: Vec<Child> = flat
            .chunks(step)
            .enumerate()
            .map(|(idx, choice)| {
                for (&b, &t) in free.iter().zip(choice) {
                    targets[b] = t;
                }
                let (event, next) = self.model.advance(node, &targets);
                let f = accrued + event.cost + self.model.contention_bound(&next);
                Child { f, idx, event, node: next }
            })
            .collect();
        out.sort_by(|a, b| a.f.total_cmp(&b.f).then(a.idx.cmp(&b.idx)));
        out
    }

    fn dfs(&mut self, node: &Node, accrued: f64, elapsed: f64, depth: usize) {
        if node.mask == 0 {
            self.offer(accrued);
            return;
        }
        if depth >= self.config.depth_cap || self.out_of_budget() {
            if depth >= self.config.depth_cap || self.incumbent.is_infinite() {
                let total = accrued + self.model.rollout(node, true);
                self.offer(total);
            } else {
                self.stats.budget_exhausted = true;
            }
            return;
        }
        let children = self.children(node, accrued, elapsed, false);
        for child in children {
            if self.pruned(child.f, self.root_idx) {
                self.stats.pruned += 1;
                continue;
            }
            self.dfs(&child.node, accrued + child.event.cost, elapsed + child.event.duration, depth + 1);
        }
    }

    fn run_root(&mut self, root: &Node, elapsed: f64) -> Vec<usize> {
        let children = self.children(root, 0.0, elapsed, true);
        let mut order: Vec<usize> = Vec::with_capacity(children.len());
        for child in &children {
            order.push(child.idx);
        }
        for child in children {
            if self.pruned(child.f, child.idx) {
                self.stats.pruned += 1;
                continue;
            }
            if self.out_of_budget() && self.incumbent.is_finite() {
                self.stats.budget_exhausted = true;
                break;
            }
            self.root_idx = child.idx;
            self.dfs(&child.node, child.event.cost, elapsed + child.event.duration, 1);
        }
        order
    }
}

fn search(
    state: &PlanningState,
    config: &PlannerConfig,
    observer: Option<NodeObserver<'_>>,
) -> Result<PlanResult, PlannerError> {
    config.validate()?;
    if state.remaining.is_empty() {
        return Err(PlannerError::EmptyRemaining);
    }
    let (model, root) = Model::build(state)?;
    let mut s = Search {
        model: &model,
        config,
        slack: config.bound_slack / config.cost_rate,
        incumbent: f64::INFINITY,
        best_root: usize::MAX,
        root_idx: 0,
        stats: SearchStats::default(),
        observer,
    };
    s.run_root(&root, state.elapsed);
    let n_bots = root.bots.len();
    let mut flat = Vec::new();
    model.assignments(root.mask, 0, n_bots, &mut flat);
    let chosen = &flat[s.best_root * n_bots..(s.best_root + 1) * n_bots];
    Ok(PlanResult {
        action: JointAction { targets: chosen.iter().map(|&i| model.ids[i]).collect() },
        cost: s.incumbent * config.cost_rate,
        stats: s.stats,
    })
}

/// Minimum expected cost over all PoIs in `state` and the root joint action
/// achieving it (ties go to the first action in enumeration order).
pub fn expected_cost(state: &PlanningState, config: &PlannerConfig) -> Result<(f64, JointAction), PlannerError> {
    search(state, config, None).map(|r| (r.cost, r.action))
}

/// [`expected_cost`] with search statistics and an optional per-node callback.
pub fn expected_cost_with_stats(
    state: &PlanningState,
    config: &PlannerConfig,
    observer: Option<NodeObserver<'_>>,
) -> Result<PlanResult, PlannerError> {
    search(state, config, observer)
}

/// Receding-horizon planning: search over the priority subset only.
pub fn plan(state: &PlanningState, config: &PlannerConfig) -> Result<JointAction, PlannerError> {
    plan_with_stats(state, config).map(|r| r.action)
}

pub fn plan_with_stats(state: &PlanningState, config: &PlannerConfig) -> Result<PlanResult, PlannerError> {
    config.validate()?;
    if state.remaining.is_empty() {
        return Err(PlannerError::EmptyRemaining);
    }
    let subset = select_priority_subset(state, config);
    if subset.len() == state.remaining.len() {
        search(state, config, None)
    } else {
        search(&state.restrict(&subset), config, None)
    }
}
