//! Comparison planners: nearest-first and likelihood-first.

use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::min_cost_assignment;
use crate::planner::{travel_time, JointAction, PlanPoi, PlannerError, PlanningState, RobotState};

fn nearest<'a>(robot: &RobotState, pois: impl Iterator<Item = &'a PlanPoi>) -> Option<&'a PlanPoi> {
    pois.min_by(|a, b| {
        robot.position.distance(a.position).total_cmp(&robot.position.distance(b.position)).then(a.id.cmp(&b.id))
    })
}

/// Robots in index order each claim their nearest unclaimed PoI; once every
/// PoI is claimed, remaining robots go to their nearest PoI.
pub fn optimistic_assign(state: &PlanningState) -> Result<JointAction, PlannerError> {
    if state.remaining.is_empty() {
        return Err(PlannerError::EmptyRemaining);
    }
    let mut targets = Vec::with_capacity(state.robots.len());
    for robot in &state.robots {
        let pick = nearest(robot, state.remaining.iter().filter(|p| !targets.contains(&p.id)))
            .or_else(|| nearest(robot, state.remaining.iter()))
            .expect("non-empty");
        targets.push(pick.id);
    }
    Ok(JointAction { targets })
}

/// The most likely PoIs, one per robot, matched to robots so the summed travel
/// time is minimal. Surplus robots go to their nearest PoI.
pub fn greedy_assign(state: &PlanningState) -> Result<JointAction, PlannerError> {
    if state.remaining.is_empty() {
        return Err(PlannerError::EmptyRemaining);
    }
    let mut ranked: Vec<&PlanPoi> = state.remaining.iter().collect();
    ranked.sort_by(|a, b| b.likelihood.total_cmp(&a.likelihood).then(a.id.cmp(&b.id)));
    let n_robots = state.robots.len();
    let top = &ranked[..n_robots.min(ranked.len())];

    let cost = |r: &RobotState, p: &PlanPoi| travel_time(r.position, p.position, r.speed);
    let mut targets = vec![0; n_robots];
    if top.len() == n_robots {
        let matrix: Vec<f64> = state.robots.iter().flat_map(|r| top.iter().map(move |p| cost(r, p))).collect();
        for (r, c) in min_cost_assignment(&matrix, n_robots, top.len()).into_iter().enumerate() {
            targets[r] = top[c].id;
        }
    } else {
        // every PoI gets one robot, the rest double up on their nearest
        let matrix: Vec<f64> = top.iter().flat_map(|p| state.robots.iter().map(move |r| cost(r, p))).collect();
        let mut covered = vec![false; n_robots];
        for (pi, r) in min_cost_assignment(&matrix, top.len(), n_robots).into_iter().enumerate() {
            targets[r] = top[pi].id;
            covered[r] = true;
        }
        for (r, robot) in state.robots.iter().enumerate() {
            if !covered[r] {
                targets[r] = nearest(robot, state.remaining.iter()).expect("non-empty").id;
            }
        }
    }
    Ok(JointAction { targets })
}
