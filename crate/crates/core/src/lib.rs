//! Planning engine and simulation core for time-critical multi-robot search.
//!
//! A team of robots must inspect a set of points of interest (PoIs). Each PoI
//! carries a probability that it needs immediate attention, and every second
//! such a PoI goes unreported accrues cost. The crate provides:
//!
//! - [`scenario`]: procedural damage-survey worlds and their graph export,
//! - [`estimator`]: likelihood maps from the generative model or a fitted one,
//! - [`planner`]: the expected-cost branch-and-bound planner,
//! - [`baselines`]: nearest-first and likelihood-greedy comparison planners,
//! - [`simulator`]: event-driven mission execution and trace validation.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and the batch
//! harness live in the `tcsearch` crate.
#![no_std]

extern crate alloc;

mod assignment;
pub mod baselines;
pub mod estimator;
pub mod geometry;
pub mod planner;
pub mod scenario;
pub mod simulator;

pub use estimator::{FitReport, FittedParams, LikelihoodMap};
pub use geometry::Point;
pub use planner::{JointAction, PlannerConfig, PlanningState, RobotState};
pub use scenario::{GenerativeParams, PoiClass, Scenario};
pub use simulator::{MissionConfig, MissionTrace};

/// Identifier of a point of interest, unique within a scenario.
pub type PoiId = u32;
