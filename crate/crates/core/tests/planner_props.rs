mod common;

use common::random_instance;
use proptest::prelude::*;
use tcsearch_core::baselines::{greedy_assign, optimistic_assign};
use tcsearch_core::planner::{
    action_outcome, enumerate_joint_actions, expected_cost, plan, PlannerConfig, PlanningState,
};
use tcsearch_core::Point;

fn perms(n: usize, k: usize) -> usize {
    (n - k + 1..=n).product()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn joint_actions_are_valid_and_complete(seed in any::<u64>()) {
        let state = random_instance(seed, 6, 3);
        let actions = enumerate_joint_actions(&state).unwrap();
        let (n, m) = (state.remaining.len(), state.robots.len());
        if n >= m {
            prop_assert_eq!(actions.len(), perms(n, m));
        } else {
            // surjections of m robots onto n PoIs
            let total: usize = (0..=n).map(|j| {
                let sign = if j % 2 == 0 { 1i64 } else { -1 };
                let binom = (0..j).fold(1i64, |acc, i| acc * (n - i) as i64 / (i as i64 + 1));
                sign * binom * ((n - j) as i64).pow(m as u32)
            }).sum::<i64>() as usize;
            prop_assert_eq!(actions.len(), total);
        }
        prop_assert!(actions.iter().all(|a| a.is_valid_for(&state)));
        prop_assert!(actions.windows(2).all(|w| w[0].targets < w[1].targets));
    }

    #[test]
    fn outcomes_conserve_pois_and_motion(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let state = random_instance(seed, 6, 3);
        let actions = enumerate_joint_actions(&state).unwrap();
        let action = &actions[pick.index(actions.len())];
        let out = action_outcome(&state, action).unwrap();
        prop_assert_eq!(out.successor.remaining.len(), state.remaining.len() - 1);
        prop_assert!(out.successor.poi(out.first_poi).is_none());
        prop_assert_eq!(action.targets[out.finishing_robot], out.first_poi);
        for ((before, after), &t) in state.robots.iter().zip(&out.successor.robots).zip(&action.targets) {
            let target = state.poi(t).unwrap().position;
            let moved = before.position.distance(after.position);
            prop_assert!(moved <= out.duration * before.speed + 1e-9);
            let via = moved + after.position.distance(target);
            prop_assert!((via - before.position.distance(target)).abs() <= 1e-9);
        }
        // the reported duration is the finisher's travel plus inspection
        let finisher = &state.robots[out.finishing_robot];
        prop_assert!((finisher.completion_time(state.poi(out.first_poi).unwrap()) - out.duration).abs() <= 1e-12);
    }

    #[test]
    fn argmin_is_scale_equivariant(seed in any::<u64>(), scale in 0.001..1000.0f64) {
        let state = random_instance(seed, 5, 2);
        let base = PlannerConfig::exact(5);
        let (c1, a1) = expected_cost(&state, &base).unwrap();
        let (c2, a2) = expected_cost(&state, &PlannerConfig { cost_rate: scale, ..base }).unwrap();
        prop_assert_eq!(a1, a2);
        prop_assert!((c2 - scale * c1).abs() <= 1e-12 * c2.abs().max(1.0));
    }

    #[test]
    fn zero_likelihoods_cost_nothing(seed in any::<u64>()) {
        let mut state = random_instance(seed, 6, 2);
        for p in &mut state.remaining {
            p.likelihood = 0.0;
        }
        let (cost, action) = expected_cost(&state, &PlannerConfig::default()).unwrap();
        prop_assert_eq!(cost, 0.0);
        prop_assert_eq!(&action, &enumerate_joint_actions(&state).unwrap()[0]);
    }

    #[test]
    fn full_subset_plan_equals_expected_cost(seed in any::<u64>(), depth in 1usize..5) {
        let state = random_instance(seed, 8, 3);
        let config = PlannerConfig { depth_cap: depth, ..PlannerConfig::default() };
        prop_assert_eq!(plan(&state, &config).unwrap(), expected_cost(&state, &config).unwrap().1);
    }

    #[test]
    fn plans_are_deterministic(seed in any::<u64>()) {
        let state = random_instance(seed, 8, 3);
        let config = PlannerConfig::default();
        prop_assert_eq!(plan(&state, &config).unwrap(), plan(&state, &config).unwrap());
    }

    #[test]
    fn baselines_return_valid_actions(seed in any::<u64>()) {
        let state = random_instance(seed, 6, 5);
        prop_assert!(optimistic_assign(&state).unwrap().is_valid_for(&state));
        prop_assert!(greedy_assign(&state).unwrap().is_valid_for(&state));
    }

    #[test]
    fn optimistic_ignores_likelihoods(seed in any::<u64>(), rotate in 0usize..6) {
        let state = random_instance(seed, 6, 3);
        let mut shuffled = state.clone();
        let mut ps: Vec<f64> = state.remaining.iter().map(|p| p.likelihood).collect();
        let n = ps.len();
        ps.rotate_left(rotate % n);
        for (p, v) in shuffled.remaining.iter_mut().zip(ps) {
            p.likelihood = v;
        }
        prop_assert_eq!(optimistic_assign(&state).unwrap(), optimistic_assign(&shuffled).unwrap());
    }

    #[test]
    fn greedy_targets_ignore_distances(seed in any::<u64>(), other in any::<u64>()) {
        let state = random_instance(seed, 6, 3);
        prop_assume!(state.remaining.len() >= state.robots.len());
        let moved = PlanningState {
            robots: random_instance(other, 6, 3)
                .robots
                .into_iter()
                .chain(std::iter::repeat(tcsearch_core::RobotState::new(Point::new(7.0, -3.0), 1.0)))
                .take(state.robots.len())
                .collect(),
            ..state.clone()
        };
        let mut a = greedy_assign(&state).unwrap().targets;
        let mut b = greedy_assign(&moved).unwrap().targets;
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }
}
