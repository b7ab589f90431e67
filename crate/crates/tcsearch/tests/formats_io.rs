use std::collections::BTreeMap;

use proptest::prelude::*;
use tcsearch::formats::{
    read_external_likelihoods, read_fitted_params, read_graph, read_scenario, read_trace, scenario_from_json,
    scenario_to_json, trace_from_jsonl, trace_to_jsonl, write_external_likelihoods, write_fitted_params,
    write_graph, write_scenario, write_trace, FormatError,
};
use tcsearch_core::estimator::{fit_estimator, oracle_estimate, Estimator};
use tcsearch_core::planner::PlannerConfig;
use tcsearch_core::scenario::{build_graph, generate_scenario, GenerativeParams};
use tcsearch_core::simulator::{replay_check, run_mission, MissionConfig, PlannerKind};

fn mission(planner: PlannerKind, n_robots: usize) -> MissionConfig {
    MissionConfig {
        planner,
        planner_config: PlannerConfig::default(),
        estimator: Estimator::Oracle,
        n_robots,
        speed: 1.0,
        seed: 0,
    }
}

#[test]
fn scenario_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/scenario.json");
    let sc = generate_scenario(11, 12, &GenerativeParams::default()).unwrap();
    write_scenario(&path, &sc).unwrap();
    assert_eq!(read_scenario(&path).unwrap(), sc);
}

#[test]
fn scenario_reader_rejects_invalid_content() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut sc = generate_scenario(3, 6, &GenerativeParams::default()).unwrap();
    sc.pois[1].id = sc.pois[0].id;
    std::fs::write(&path, scenario_to_json(&sc).unwrap()).unwrap();
    assert!(matches!(read_scenario(&path), Err(FormatError::Invalid { .. })));

    std::fs::write(&path, "{ not json").unwrap();
    assert!(matches!(read_scenario(&path), Err(FormatError::Json { .. })));
    assert!(matches!(read_scenario(&dir.path().join("missing.json")), Err(FormatError::Io { .. })));
}

#[test]
fn graph_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let sc = generate_scenario(5, 20, &GenerativeParams::default()).unwrap();
    let graph = build_graph(&sc);
    assert!(!graph.edges.is_empty());
    write_graph(&path, &graph).unwrap();
    assert_eq!(read_graph(&path).unwrap(), graph);
}

#[test]
fn fitted_params_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fitted_params.json");
    let training: Vec<_> =
        (0..40).map(|s| generate_scenario(1000 + s, 12, &GenerativeParams::default()).unwrap()).collect();
    let params = fit_estimator(&training).unwrap().params;
    write_fitted_params(&path, &params).unwrap();
    assert_eq!(read_fitted_params(&path).unwrap(), params);
}

#[test]
fn external_likelihoods_round_trip_and_skip_blank_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ext.jsonl");
    let maps: BTreeMap<u64, _> = (0..4)
        .map(|s| (s, oracle_estimate(&generate_scenario(s, 12, &GenerativeParams::default()).unwrap())))
        .collect();
    write_external_likelihoods(&path, &maps).unwrap();
    assert_eq!(read_external_likelihoods(&path).unwrap(), maps);

    let padded = format!("\n{}\n\n", std::fs::read_to_string(&path).unwrap());
    std::fs::write(&path, padded).unwrap();
    assert_eq!(read_external_likelihoods(&path).unwrap(), maps);
}

#[test]
fn handwritten_external_line_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ext.jsonl");
    std::fs::write(&path, "{\"seed\": 17, \"likelihoods\": {\"0\": 0.12, \"1\": 0.003}}\n").unwrap();
    let maps = read_external_likelihoods(&path).unwrap();
    let map = &maps[&17];
    assert_eq!(map.len(), 2);
    assert_eq!(map.get(0), Some(0.12));
    assert_eq!(map.get(1), Some(0.003));
}

#[test]
fn trace_file_reloads_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let sc = generate_scenario(42, 12, &GenerativeParams::default()).unwrap();
    for planner in PlannerKind::ALL {
        for robots in [1, 3] {
            let trace = run_mission(&sc, &mission(planner, robots)).unwrap();
            let path = dir.path().join(format!("{}_{robots}.jsonl", planner.name()));
            write_trace(&path, &trace).unwrap();
            let back = read_trace(&path).unwrap();
            assert_eq!(back, trace, "{} with {robots} robots", planner.name());
            assert!(replay_check(&back, &sc).is_valid());
        }
    }
}

#[test]
fn trace_lines_are_tagged_records() {
    let sc = generate_scenario(8, 12, &GenerativeParams::default()).unwrap();
    let trace = run_mission(&sc, &mission(PlannerKind::Model, 3)).unwrap();
    let text = trace_to_jsonl(&trace).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["type"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds.first().map(String::as_str), Some("mission"));
    assert_eq!(kinds.last().map(String::as_str), Some("summary"));
    assert!(kinds[1..kinds.len() - 1].iter().all(|k| k == "event"));
    // one event per inspection plus the closing one
    assert_eq!(kinds.len() - 2, sc.pois.len() + 1);
}

#[test]
fn tampered_trace_fails_replay() {
    let sc = generate_scenario(9, 12, &GenerativeParams::default()).unwrap();
    let trace = run_mission(&sc, &mission(PlannerKind::Greedy, 1)).unwrap();
    let text = trace_to_jsonl(&trace).unwrap();
    let cost = format!("{:?}", trace.total_realized_cost);
    let bumped = format!("{:?}", trace.total_realized_cost + 1.0);
    let tampered = text.replace(&format!("\"total_realized_cost\":{cost}"), &format!("\"total_realized_cost\":{bumped}"));
    assert_ne!(tampered, text);
    let back = trace_from_jsonl(&tampered).unwrap();
    assert!(!replay_check(&back, &sc).is_valid());
}

#[test]
fn truncated_trace_is_an_error() {
    let sc = generate_scenario(2, 6, &GenerativeParams::default()).unwrap();
    let trace = run_mission(&sc, &mission(PlannerKind::Model, 2)).unwrap();
    let text = trace_to_jsonl(&trace).unwrap();
    let without_summary: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
    assert!(trace_from_jsonl(&without_summary).is_err());
    assert!(trace_from_jsonl("").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_scenarios_survive_json(seed in any::<u64>(), n in 1usize..40) {
        let sc = generate_scenario(seed, n, &GenerativeParams::default()).unwrap();
        let text = scenario_to_json(&sc).unwrap();
        prop_assert_eq!(scenario_from_json(&text).unwrap(), sc.clone());
        prop_assert_eq!(scenario_to_json(&scenario_from_json(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn traces_survive_jsonl(seed in 0u64..500, n in 1usize..10, robots in 1usize..4, planner in 0usize..3) {
        let sc = generate_scenario(seed, n, &GenerativeParams::default()).unwrap();
        let trace = run_mission(&sc, &mission(PlannerKind::ALL[planner], robots)).unwrap();
        let back = trace_from_jsonl(&trace_to_jsonl(&trace).unwrap()).unwrap();
        prop_assert!(replay_check(&back, &sc).is_valid());
        prop_assert_eq!(back, trace);
    }
}
