//! Settings shared by the CLI flags and the JSON config file. Flags override
//! the file; anything left unset falls back to the defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use tcsearch_core::planner::PlannerConfig;
use tcsearch_core::simulator::PlannerKind;

use crate::formats::FormatError;
use crate::harness::{EstimatorChoice, ExperimentSpec};

fn parse_planner(s: &str) -> Result<PlannerKind, String> {
    PlannerKind::from_name(s).ok_or_else(|| format!("unknown planner '{s}' (expected model, optimistic or greedy)"))
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// PoI counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_pois: Option<Vec<usize>>,
    /// Robot counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_robots: Option<Vec<usize>>,
    #[arg(long)]
    pub n_trials: Option<usize>,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Planners, comma separated: model, optimistic, greedy.
    #[arg(long, value_delimiter = ',', value_parser = parse_planner)]
    pub planner: Option<Vec<PlannerKind>>,
    /// oracle, fitted:<params.json> or external:<likelihoods.jsonl>.
    #[arg(long)]
    pub estimator: Option<EstimatorChoice>,
    #[arg(long)]
    pub depth_cap: Option<usize>,
    #[arg(long)]
    pub n_priority: Option<usize>,
    #[arg(long)]
    pub cost_rate: Option<f64>,
    /// Robot speed in m/s.
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.into(), source })
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: Settings) -> Settings {
        Settings {
            n_pois: over.n_pois.or(self.n_pois),
            n_robots: over.n_robots.or(self.n_robots),
            n_trials: over.n_trials.or(self.n_trials),
            seed: over.seed.or(self.seed),
            planner: over.planner.or(self.planner),
            estimator: over.estimator.or(self.estimator),
            depth_cap: over.depth_cap.or(self.depth_cap),
            n_priority: over.n_priority.or(self.n_priority),
            cost_rate: over.cost_rate.or(self.cost_rate),
            speed: over.speed.or(self.speed),
            out_dir: over.out_dir.or(self.out_dir),
            parallelism: over.parallelism.or(self.parallelism),
        }
    }

    pub fn planner_config(&self) -> PlannerConfig {
        let d = PlannerConfig::default();
        PlannerConfig {
            depth_cap: self.depth_cap.unwrap_or(d.depth_cap),
            n_priority: self.n_priority.unwrap_or(d.n_priority),
            n_top_prob: d.n_top_prob.min(self.n_priority.unwrap_or(d.n_priority)),
            cost_rate: self.cost_rate.unwrap_or(d.cost_rate),
            ..d
        }
    }

    pub fn experiment_spec(&self) -> ExperimentSpec {
        let d = ExperimentSpec::default();
        ExperimentSpec {
            n_trials: self.n_trials.unwrap_or(d.n_trials),
            n_pois: self.n_pois.clone().unwrap_or(d.n_pois),
            n_robots: self.n_robots.clone().unwrap_or(d.n_robots),
            seed_base: self.seed.unwrap_or(d.seed_base),
            planners: self.planner.clone().unwrap_or(d.planners),
            estimator: self.estimator.clone().unwrap_or(d.estimator),
            planner_config: self.planner_config(),
            speed: self.speed.unwrap_or(d.speed),
            params: d.params,
            parallelism: self.parallelism.unwrap_or(d.parallelism),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
