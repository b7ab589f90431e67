//! Test-side oracles, written independently of the planner internals.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tcsearch_core::planner::{PlanPoi, PlanningState, RobotState};
use tcsearch_core::Point;

/// Exhaustive minimum over every sequence of joint actions, re-assigning
/// every robot at every reveal.
pub fn brute_force_cost(state: &PlanningState, k: f64) -> f64 {
    brute(&state.remaining, &state.robots, k)
}

fn valid(targets: &[usize], n: usize) -> bool {
    if n >= targets.len() {
        let mut t = targets.to_vec();
        t.sort_unstable();
        t.windows(2).all(|w| w[0] != w[1])
    } else {
        (0..n).all(|i| targets.contains(&i))
    }
}

fn brute(pois: &[PlanPoi], robots: &[RobotState], k: f64) -> f64 {
    if pois.is_empty() {
        return 0.0;
    }
    let n = pois.len();
    let m = robots.len();
    let p_sum: f64 = pois.iter().map(|p| p.likelihood).sum();
    let mut best = f64::INFINITY;
    let mut targets = vec![0usize; m];
    loop {
        if valid(&targets, n) {
            let mut first = (f64::INFINITY, u32::MAX, usize::MAX);
            for (b, r) in robots.iter().enumerate() {
                let poi = &pois[targets[b]];
                let credit = if r.target == Some(poi.id) { r.progress } else { 0.0 };
                let travel = r.position.distance(poi.position) / r.speed;
                let c = travel + (poi.inspect_time - credit).max(0.0);
                if (c, poi.id, b) < first {
                    first = (c, poi.id, b);
                }
            }
            let (dt, first_id, _) = first;
            let next_robots: Vec<RobotState> = robots
                .iter()
                .zip(&targets)
                .map(|(r, &t)| {
                    let poi = &pois[t];
                    let d = r.position.distance(poi.position);
                    let moved = (dt * r.speed).min(d);
                    let position = if moved >= d {
                        poi.position
                    } else {
                        Point::new(
                            r.position.x + (poi.position.x - r.position.x) * moved / d,
                            r.position.y + (poi.position.y - r.position.y) * moved / d,
                        )
                    };
                    if poi.id == first_id {
                        RobotState { position, speed: r.speed, target: None, progress: 0.0 }
                    } else {
                        let credit = if r.target == Some(poi.id) { r.progress } else { 0.0 };
                        let progress = credit + (dt - d / r.speed).max(0.0);
                        RobotState { position, speed: r.speed, target: Some(poi.id), progress }
                    }
                })
                .collect();
            let next_pois: Vec<PlanPoi> = pois.iter().filter(|p| p.id != first_id).copied().collect();
            let total = k * dt * p_sum + brute(&next_pois, &next_robots, k);
            if total < best {
                best = total;
            }
        }
        // odometer increment
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            targets[i] += 1;
            if targets[i] < n {
                break;
            }
            targets[i] = 0;
        }
    }
}

/// Random small planning instance: PoIs and robots in a 400 m square.
pub fn random_instance(seed: u64, max_pois: usize, max_robots: usize) -> PlanningState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_pois);
    let m = rng.random_range(1..=max_robots);
    let inspect_mode = rng.random_range(0..3);
    let pois = (0..n)
        .map(|i| PlanPoi {
            id: (i as u32) * 3 + rng.random_range(0..3),
            position: Point::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0)),
            inspect_time: match inspect_mode {
                0 => 0.0,
                1 => 30.0,
                _ => rng.random_range(0.0..60.0),
            },
            likelihood: if rng.random_bool(0.2) { 1e-6 } else { rng.random_range(0.0..1.0) },
        })
        .collect();
    let shared_start = rng.random_bool(0.5);
    let origin = Point::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let robots = (0..m)
        .map(|_| {
            let position = if shared_start {
                origin
            } else {
                Point::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0))
            };
            RobotState::new(position, 1.0)
        })
        .collect();
    PlanningState::new(pois, robots)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}
