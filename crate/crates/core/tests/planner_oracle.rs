mod common;

use common::{brute_force_cost, random_instance};
use tcsearch_core::planner::{
    contention_bound, expected_cost, expected_cost_with_stats, lower_bound, plan_with_stats, rollout_estimate,
    PlannerConfig,
};

const INSTANCES: u64 = 200;

fn exact_config() -> PlannerConfig {
    PlannerConfig::exact(6)
}

#[test]
fn search_matches_brute_force() {
    for seed in 0..INSTANCES {
        let state = random_instance(seed, 6, 2);
        let expected = brute_force_cost(&state, 1.0);
        let got = plan_with_stats(&state, &exact_config()).unwrap();
        assert!((got.cost - expected).abs() <= 1e-9, "seed {seed}: search {} vs brute {expected}", got.cost);
    }
}

#[test]
fn search_matches_brute_force_with_surplus_robots() {
    for seed in 0..60 {
        let state = random_instance(10_000 + seed, 4, 3);
        let expected = brute_force_cost(&state, 1.0);
        let (cost, _) = expected_cost(&state, &PlannerConfig::exact(4)).unwrap();
        assert!((cost - expected).abs() <= 1e-9, "seed {seed}: search {cost} vs brute {expected}");
    }
}

#[test]
fn pruning_does_not_change_the_result() {
    for seed in 0..INSTANCES {
        let state = random_instance(seed, 6, 2);
        let pruned = expected_cost(&state, &exact_config()).unwrap();
        let full = expected_cost(&state, &PlannerConfig { prune: false, ..exact_config() }).unwrap();
        assert!((pruned.0 - full.0).abs() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn bounds_are_admissible_at_every_node() {
    let config = exact_config();
    let mut checked = 0usize;
    for seed in 0..INSTANCES {
        let state = random_instance(seed, 6, 2);
        let mut violations = Vec::new();
        let mut observer = |node: &tcsearch_core::PlanningState, lb: f64| {
            // sample: the full check is exhaustive below five PoIs
            if node.remaining.len() <= 5 {
                let opt = brute_force_cost(node, config.cost_rate);
                let cb = contention_bound(node, 0.0, &config);
                if lb > opt + 1e-9 || cb > opt + 1e-9 || cb + 1e-9 < lb {
                    violations.push((lb, cb, opt));
                }
                checked += 1;
            }
        };
        expected_cost_with_stats(&state, &config, Some(&mut observer)).unwrap();
        assert!(violations.is_empty(), "seed {seed}: {violations:?}");
        let opt = brute_force_cost(&state, 1.0);
        assert!(lower_bound(&state, 0.0, &config) <= opt + 1e-9);
        assert!(contention_bound(&state, 0.0, &config) <= opt + 1e-9);
    }
    assert!(checked > 1000, "only {checked} nodes checked");
}

#[test]
fn rollout_is_an_upper_bound() {
    for seed in 0..INSTANCES {
        let state = random_instance(seed, 6, 2);
        let opt = brute_force_cost(&state, 1.0);
        assert!(rollout_estimate(&state, &exact_config()) >= opt - 1e-9, "seed {seed}");
    }
}

#[test]
fn incumbent_never_increases() {
    for seed in 0..INSTANCES {
        let state = random_instance(seed, 6, 2);
        let res = plan_with_stats(&state, &PlannerConfig { depth_cap: 3, ..exact_config() }).unwrap();
        let trace = &res.stats.incumbent_trace;
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {trace:?}");
        assert_eq!(*trace.last().unwrap(), res.cost);
    }
}
