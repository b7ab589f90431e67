//! Procedurally generated damage-survey worlds.
//!
//! PoIs and wind pockets are scattered uniformly over a disc centred on the
//! team's start position. Each PoI's damage probability is its class
//! susceptibility times a Gaussian falloff in distance to each pocket, the
//! per-pocket terms combined by [`CombineRule`]. Ground-truth damage flags are
//! independent Bernoulli draws from that probability.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;
use crate::PoiId;

pub const DEFAULT_INSPECT_TIME: f64 = 30.0;
pub const DEFAULT_SIGMA: f64 = 60.0;
pub const DEFAULT_MAP_RADIUS: f64 = 500.0;
pub const DEFAULT_WIND_POCKETS: usize = 2;
/// Node pairs further apart than this get no graph edge.
pub const EDGE_THRESHOLD: f64 = 400.0;

/// Salt mixed into the scenario seed for the wind-pocket observation noise stream.
const OBSERVATION_SALT: u64 = 0x6f62_7365_7276_6521;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("map radius must be finite and positive, got {0}")]
    InvalidMapRadius(f64),
    #[error("sigma must be finite and positive, got {0}")]
    InvalidSigma(f64),
    #[error("susceptibility for {class:?} must lie in [0, 1], got {value}")]
    InvalidSusceptibility { class: PoiClass, value: f64 },
    #[error("duplicate PoI id {0}")]
    DuplicatePoiId(PoiId),
    #[error("PoI {0} has a negative or non-finite inspection time")]
    InvalidInspectTime(PoiId),
    #[error("{what} at ({x}, {y}) lies outside the map")]
    OutOfBounds { what: &'static str, x: f64, y: f64 },
}

/// Land-cover class of a PoI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum PoiClass {
    Forest,
    Field,
    Building,
}

impl PoiClass {
    pub const ALL: [PoiClass; 3] = [PoiClass::Forest, PoiClass::Field, PoiClass::Building];

    pub fn name(self) -> &'static str {
        match self {
            PoiClass::Forest => "forest",
            PoiClass::Field => "field",
            PoiClass::Building => "building",
        }
    }

    /// Position in the graph one-hot vector `[field, forest, cabin, wind pocket]`.
    fn onehot_slot(self) -> usize {
        match self {
            PoiClass::Field => 0,
            PoiClass::Forest => 1,
            PoiClass::Building => 2,
        }
    }
}

/// Per-class damage susceptibility.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Susceptibility {
    pub forest: f64,
    pub field: f64,
    pub building: f64,
}

impl Default for Susceptibility {
    fn default() -> Self {
        Susceptibility { forest: 1.0, field: 0.8, building: 0.2 }
    }
}

impl Susceptibility {
    pub fn uniform(value: f64) -> Self {
        Susceptibility { forest: value, field: value, building: value }
    }

    pub fn get(&self, class: PoiClass) -> f64 {
        match class {
            PoiClass::Forest => self.forest,
            PoiClass::Field => self.field,
            PoiClass::Building => self.building,
        }
    }

    pub fn set(&mut self, class: PoiClass, value: f64) {
        match class {
            PoiClass::Forest => self.forest = value,
            PoiClass::Field => self.field = value,
            PoiClass::Building => self.building = value,
        }
    }

    pub fn max(&self) -> f64 {
        self.forest.max(self.field).max(self.building)
    }
}

/// How the per-pocket damage terms of one PoI are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum CombineRule {
    /// Pockets act as independent damage causes: `1 - prod(1 - p_i)`.
    #[default]
    NoisyOr,
    /// Only the strongest pocket counts.
    Max,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GenerativeParams {
    pub sigma: f64,
    pub susceptibility: Susceptibility,
    pub n_wind_pockets: usize,
    pub map_radius: f64,
    pub combine_rule: CombineRule,
}

impl Default for GenerativeParams {
    fn default() -> Self {
        GenerativeParams {
            sigma: DEFAULT_SIGMA,
            susceptibility: Susceptibility::default(),
            n_wind_pockets: DEFAULT_WIND_POCKETS,
            map_radius: DEFAULT_MAP_RADIUS,
            combine_rule: CombineRule::NoisyOr,
        }
    }
}

impl GenerativeParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.map_radius.is_finite() && self.map_radius > 0.0) {
            return Err(ScenarioError::InvalidMapRadius(self.map_radius));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ScenarioError::InvalidSigma(self.sigma));
        }
        for class in PoiClass::ALL {
            let value = self.susceptibility.get(class);
            if !(0.0..=1.0).contains(&value) {
                return Err(ScenarioError::InvalidSusceptibility { class, value });
            }
        }
        Ok(())
    }
}

/// A point of interest. `damaged` is ground truth and must not reach planners.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Poi {
    pub id: PoiId,
    pub position: Point,
    pub class: PoiClass,
    pub inspect_time: f64,
    pub damaged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WindPocket {
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Scenario {
    pub pois: Vec<Poi>,
    pub wind_pockets: Vec<WindPocket>,
    pub start_position: Point,
    pub params: GenerativeParams,
    pub seed: u64,
}

impl Scenario {
    /// Checks the structural invariants: valid params, unique ids, sane
    /// inspection times, and everything inside the map disc.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params.validate()?;
        let mut ids: Vec<PoiId> = self.pois.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ScenarioError::DuplicatePoiId(w[0]));
        }
        let limit = self.params.map_radius + 1e-9;
        let in_bounds = |what: &'static str, p: Point| {
            if p.is_finite() && p.distance(self.start_position) <= limit {
                Ok(())
            } else {
                Err(ScenarioError::OutOfBounds { what, x: p.x, y: p.y })
            }
        };
        for poi in &self.pois {
            if !(poi.inspect_time.is_finite() && poi.inspect_time >= 0.0) {
                return Err(ScenarioError::InvalidInspectTime(poi.id));
            }
            in_bounds("PoI", poi.position)?;
        }
        for pocket in &self.wind_pockets {
            in_bounds("wind pocket", pocket.position)?;
        }
        Ok(())
    }

    pub fn poi(&self, id: PoiId) -> Option<&Poi> {
        self.pois.iter().find(|p| p.id == id)
    }

    /// Wind-pocket observations as an estimator would see them. With
    /// `jitter_std == 0` these are the true pockets; otherwise each position is
    /// perturbed by isotropic Gaussian noise from a stream derived from the seed.
    pub fn observed_pockets(&self, jitter_std: f64) -> Vec<WindPocket> {
        if !(jitter_std > 0.0) {
            return self.wind_pockets.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ OBSERVATION_SALT);
        let noise = Normal::new(0.0, jitter_std).expect("positive finite std");
        self.wind_pockets
            .iter()
            .map(|w| WindPocket {
                position: Point::new(
                    w.position.x + noise.sample(&mut rng),
                    w.position.y + noise.sample(&mut rng),
                ),
            })
            .collect()
    }

    /// Redraws every PoI's damage flag from its generative probability using a
    /// fresh stream, leaving the layout untouched.
    pub fn resample_damage(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_damage(&mut self.pois, &self.wind_pockets, &self.params, &mut rng);
    }

    pub fn n_damaged(&self) -> usize {
        self.pois.iter().filter(|p| p.damaged).count()
    }
}

/// Gaussian falloff `exp(-d^2 / 2 sigma^2)` of one pocket's influence.
pub fn gaussian_falloff(distance_sq: f64, sigma: f64) -> f64 {
    libm::exp(-distance_sq / (2.0 * sigma * sigma))
}

/// Merges per-pocket falloffs scaled by `susceptibility` under `rule`.
pub fn combine_falloffs<I>(susceptibility: f64, falloffs: I, rule: CombineRule) -> f64
where
    I: IntoIterator<Item = f64>,
{
    match rule {
        CombineRule::NoisyOr => {
            let mut miss = 1.0;
            let mut terms = 0usize;
            let mut single = 0.0;
            for g in falloffs {
                single = susceptibility * g;
                miss *= 1.0 - single;
                terms += 1;
            }
            // one cause reduces to the bare Gaussian term
            if terms == 1 {
                single
            } else {
                1.0 - miss
            }
        }
        CombineRule::Max => falloffs.into_iter().fold(0.0, |acc, g| acc.max(susceptibility * g)),
    }
}

/// Probability that `position` of class `class` is damaged given the pockets.
pub fn damage_probability_at(
    class: PoiClass,
    position: Point,
    pockets: &[WindPocket],
    sigma: f64,
    susceptibility: &Susceptibility,
    rule: CombineRule,
) -> f64 {
    let s = susceptibility.get(class);
    let falloffs = pockets.iter().map(|w| gaussian_falloff(position.distance_sq(w.position), sigma));
    combine_falloffs(s, falloffs, rule).clamp(0.0, 1.0)
}

pub fn damage_probability(poi: &Poi, pockets: &[WindPocket], params: &GenerativeParams) -> f64 {
    damage_probability_at(
        poi.class,
        poi.position,
        pockets,
        params.sigma,
        &params.susceptibility,
        params.combine_rule,
    )
}

/// Uniform point in the disc, truncated toward the centre to centimetres so
/// that written scenario files reload bit-identically.
fn sample_in_disc<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * libm::sqrt(rng.random::<f64>());
    let theta = 2.0 * PI * rng.random::<f64>();
    let quantize = |v: f64| {
        let q = libm::trunc(v * 100.0) / 100.0;
        if q == 0.0 {
            0.0
        } else {
            q
        }
    };
    Point::new(
        center.x + quantize(r * libm::cos(theta)),
        center.y + quantize(r * libm::sin(theta)),
    )
}

fn sample_damage<R: Rng>(pois: &mut [Poi], pockets: &[WindPocket], params: &GenerativeParams, rng: &mut R) {
    for poi in pois {
        let p = damage_probability(poi, pockets, params);
        poi.damaged = rng.random::<f64>() < p;
    }
}

/// Builds a scenario deterministically from `(seed, n_pois, params)`.
pub fn generate_scenario(seed: u64, n_pois: usize, params: &GenerativeParams) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Point::ORIGIN;
    let wind_pockets: Vec<WindPocket> = (0..params.n_wind_pockets)
        .map(|_| WindPocket { position: sample_in_disc(&mut rng, center, params.map_radius) })
        .collect();
    let mut pois: Vec<Poi> = (0..n_pois)
        .map(|i| {
            let position = sample_in_disc(&mut rng, center, params.map_radius);
            let class = PoiClass::ALL[rng.random_range(0..PoiClass::ALL.len())];
            Poi { id: i as PoiId, position, class, inspect_time: DEFAULT_INSPECT_TIME, damaged: false }
        })
        .collect();
    sample_damage(&mut pois, &wind_pockets, params, &mut rng);
    Ok(Scenario { pois, wind_pockets, start_position: center, params: params.clone(), seed })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GraphNode {
    pub id: u32,
    /// `[field, forest, cabin, wind pocket]`
    pub onehot: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GraphEdge {
    pub src: u32,
    pub dst: u32,
    pub w: f64,
}

/// Proximity graph over PoIs and wind pockets, directed edges both ways plus
/// self-loops.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScenarioGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Edge feature for two nodes `distance` apart; `None` beyond the threshold.
pub fn edge_weight(distance: f64) -> Option<f64> {
    (distance <= EDGE_THRESHOLD).then(|| 1.0 - distance / EDGE_THRESHOLD)
}

/// Nodes are the PoIs (keeping their ids) followed by the wind pockets, which
/// are numbered from one past the largest PoI id.
pub fn build_graph(scenario: &Scenario) -> ScenarioGraph {
    let mut nodes = Vec::with_capacity(scenario.pois.len() + scenario.wind_pockets.len());
    let mut positions = Vec::with_capacity(nodes.capacity());
    for poi in &scenario.pois {
        let mut onehot = [0.0; 4];
        onehot[poi.class.onehot_slot()] = 1.0;
        nodes.push(GraphNode { id: poi.id, onehot });
        positions.push(poi.position);
    }
    let first_pocket_id = scenario.pois.iter().map(|p| p.id + 1).max().unwrap_or(0);
    for (k, pocket) in scenario.wind_pockets.iter().enumerate() {
        nodes.push(GraphNode { id: first_pocket_id + k as u32, onehot: [0.0, 0.0, 0.0, 1.0] });
        positions.push(pocket.position);
    }
    let mut edges = Vec::new();
    for (i, src) in nodes.iter().enumerate() {
        for (j, dst) in nodes.iter().enumerate() {
            let d = if i == j { 0.0 } else { positions[i].distance(positions[j]) };
            if let Some(w) = edge_weight(d) {
                edges.push(GraphEdge { src: src.id, dst: dst.id, w });
            }
        }
    }
    ScenarioGraph { nodes, edges }
}
