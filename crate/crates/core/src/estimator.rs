//! Likelihood maps: per-PoI probability of needing immediate attention.
//!
//! Two producers are provided. [`oracle_estimate`] evaluates the generative
//! model with its true parameters. [`fit_estimator`] recovers the falloff
//! scale and per-class susceptibilities by maximum likelihood from labelled
//! scenarios, and [`predict`] applies the fitted model to new scenarios.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{
    combine_falloffs, damage_probability, damage_probability_at, gaussian_falloff, CombineRule, PoiClass, Scenario,
    Susceptibility, WindPocket,
};
use crate::PoiId;

/// Planner-facing probabilities are kept strictly inside (0, 1) by this margin.
pub const PLANNING_EPSILON: f64 = 1e-6;
/// Fitted susceptibilities never drop below this.
pub const SUSCEPTIBILITY_FLOOR: f64 = 1e-6;
/// Susceptibility assigned to a class absent from the training data.
pub const UNSEEN_CLASS_SUSCEPTIBILITY: f64 = 0.5;
pub const SIGMA_SEARCH_RANGE: (f64, f64) = (5.0, 500.0);
pub const MAX_SWEEPS: usize = 200;
pub const CONVERGENCE_TOL: f64 = 1e-9;

const LOG_PROB_FLOOR: f64 = 1e-12;
const INITIAL_SIGMA: f64 = 50.0;
const INITIAL_SUSCEPTIBILITY: f64 = 0.5;

pub fn clamp_for_planning(p: f64) -> f64 {
    p.clamp(PLANNING_EPSILON, 1.0 - PLANNING_EPSILON)
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct LikelihoodMap {
    entries: BTreeMap<PoiId, f64>,
}

impl LikelihoodMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Values are clamped into `[0, 1]`.
    pub fn insert(&mut self, id: PoiId, p: f64) {
        let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        self.entries.insert(id, p);
    }

    pub fn get(&self, id: PoiId) -> Option<f64> {
        self.entries.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PoiId, f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the map has an entry for exactly the scenario's PoIs.
    pub fn covers(&self, scenario: &Scenario) -> bool {
        self.entries.len() == scenario.pois.len() && scenario.pois.iter().all(|p| self.entries.contains_key(&p.id))
    }
}

impl FromIterator<(PoiId, f64)> for LikelihoodMap {
    fn from_iter<T: IntoIterator<Item = (PoiId, f64)>>(iter: T) -> Self {
        let mut map = LikelihoodMap::new();
        for (id, p) in iter {
            map.insert(id, p);
        }
        map
    }
}

/// Exact generative probabilities; ignores the hidden damage flags.
pub fn oracle_estimate(scenario: &Scenario) -> LikelihoodMap {
    scenario
        .pois
        .iter()
        .map(|poi| (poi.id, damage_probability(poi, &scenario.wind_pockets, &scenario.params)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FittedParams {
    pub sigma_hat: f64,
    pub susceptibility_hat: Susceptibility,
    pub train_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: FittedParams,
    /// False when the sweep cap was hit first; `params` is then best-so-far.
    pub converged: bool,
    pub sweeps: usize,
    /// Log-likelihood at the start and after every sweep.
    pub log_likelihood_trace: Vec<f64>,
    /// Classes with no training PoIs; their susceptibility is the fallback.
    pub unseen_classes: Vec<PoiClass>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FitError {
    #[error("training set contains no PoIs")]
    NoTrainingData,
}

fn class_slot(class: PoiClass) -> usize {
    match class {
        PoiClass::Forest => 0,
        PoiClass::Field => 1,
        PoiClass::Building => 2,
    }
}

/// Flattened training set: one row per PoI with its squared pocket distances.
struct TrainingSet {
    labels: Vec<bool>,
    classes: Vec<usize>,
    rules: Vec<CombineRule>,
    /// `dist_sq[offsets[i]..offsets[i + 1]]` belong to row `i`.
    offsets: Vec<usize>,
    dist_sq: Vec<f64>,
    by_class: [Vec<usize>; 3],
}

impl TrainingSet {
    fn new(scenarios: &[Scenario]) -> Self {
        let mut set = TrainingSet {
            labels: Vec::new(),
            classes: Vec::new(),
            rules: Vec::new(),
            offsets: alloc::vec![0],
            dist_sq: Vec::new(),
            by_class: Default::default(),
        };
        for scenario in scenarios {
            for poi in &scenario.pois {
                let row = set.labels.len();
                set.labels.push(poi.damaged);
                set.classes.push(class_slot(poi.class));
                set.rules.push(scenario.params.combine_rule);
                set.by_class[class_slot(poi.class)].push(row);
                set.dist_sq.extend(scenario.wind_pockets.iter().map(|w| poi.position.distance_sq(w.position)));
                set.offsets.push(set.dist_sq.len());
            }
        }
        set
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn falloffs(&self, sigma: f64) -> Vec<f64> {
        self.dist_sq.iter().map(|&d| gaussian_falloff(d, sigma)).collect()
    }

    fn row_ll(&self, row: usize, susceptibility: f64, falloffs: &[f64]) -> f64 {
        let g = &falloffs[self.offsets[row]..self.offsets[row + 1]];
        let p = combine_falloffs(susceptibility, g.iter().copied(), self.rules[row]);
        bernoulli_ll(self.labels[row], p)
    }

    fn log_likelihood(&self, s: &[f64; 3], falloffs: &[f64]) -> f64 {
        (0..self.len()).map(|row| self.row_ll(row, s[self.classes[row]], falloffs)).sum()
    }

    fn class_log_likelihood(&self, class: usize, susceptibility: f64, falloffs: &[f64]) -> f64 {
        self.by_class[class].iter().map(|&row| self.row_ll(row, susceptibility, falloffs)).sum()
    }
}

fn bernoulli_ll(label: bool, p: f64) -> f64 {
    let p = p.clamp(LOG_PROB_FLOOR, 1.0 - LOG_PROB_FLOOR);
    if label {
        libm::log(p)
    } else {
        libm::log1p(-p)
    }
}

/// Golden-section maximisation of a unimodal `f` on `[lo, hi]`. The interval
/// end points are also evaluated so boundary optima are returned exactly.
fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Maximum-likelihood fit of the falloff scale and class susceptibilities.
///
/// Coordinate ascent: each sweep runs a golden-section search on sigma over
/// [`SIGMA_SEARCH_RANGE`] with susceptibilities held fixed, then one per class.
/// A coordinate update is only accepted when it does not lower the
/// log-likelihood, so the trace is non-decreasing. Stops once a sweep gains
/// less than [`CONVERGENCE_TOL`] or after [`MAX_SWEEPS`].
pub fn fit_estimator(training: &[Scenario]) -> Result<FitReport, FitError> {
    let data = TrainingSet::new(training);
    if data.len() == 0 {
        return Err(FitError::NoTrainingData);
    }
    let present: Vec<usize> = (0..3).filter(|&c| !data.by_class[c].is_empty()).collect();
    let mut s = [UNSEEN_CLASS_SUSCEPTIBILITY; 3];
    for &c in &present {
        s[c] = INITIAL_SUSCEPTIBILITY;
    }
    let mut sigma = INITIAL_SIGMA;
    let mut falloffs = data.falloffs(sigma);
    let mut ll = data.log_likelihood(&s, &falloffs);
    let mut trace = alloc::vec![ll];
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let start_ll = ll;

        let (lo, hi) = SIGMA_SEARCH_RANGE;
        let (cand, cand_ll) = golden_section_max(|sg| data.log_likelihood(&s, &data.falloffs(sg)), lo, hi, 1e-7);
        if cand_ll > ll {
            sigma = cand;
            falloffs = data.falloffs(sigma);
        }

        for &c in &present {
            let current = data.class_log_likelihood(c, s[c], &falloffs);
            let (cand, cand_ll) =
                golden_section_max(|v| data.class_log_likelihood(c, v, &falloffs), SUSCEPTIBILITY_FLOOR, 1.0, 1e-10);
            if cand_ll > current {
                s[c] = cand;
            }
        }
        ll = data.log_likelihood(&s, &falloffs);
        trace.push(ll);
        if ll - start_ll < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }

    let unseen_classes = PoiClass::ALL.into_iter().filter(|&c| data.by_class[class_slot(c)].is_empty()).collect();
    let mut susceptibility_hat = Susceptibility::uniform(UNSEEN_CLASS_SUSCEPTIBILITY);
    for class in PoiClass::ALL {
        susceptibility_hat.set(class, s[class_slot(class)].clamp(SUSCEPTIBILITY_FLOOR, 1.0));
    }
    Ok(FitReport {
        params: FittedParams { sigma_hat: sigma, susceptibility_hat, train_log_likelihood: ll },
        converged,
        sweeps,
        log_likelihood_trace: trace,
        unseen_classes,
    })
}

/// Applies fitted parameters to the scenario's true wind pockets.
pub fn predict(params: &FittedParams, scenario: &Scenario) -> LikelihoodMap {
    predict_with_pockets(params, scenario, &scenario.wind_pockets)
}

/// Applies fitted parameters using the given pocket observations.
pub fn predict_with_pockets(params: &FittedParams, scenario: &Scenario, pockets: &[WindPocket]) -> LikelihoodMap {
    scenario
        .pois
        .iter()
        .map(|poi| {
            let p = damage_probability_at(
                poi.class,
                poi.position,
                pockets,
                params.sigma_hat,
                &params.susceptibility_hat,
                scenario.params.combine_rule,
            );
            (poi.id, p)
        })
        .collect()
}

/// Interchangeable source of likelihood maps for planners.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Estimator {
    #[default]
    Oracle,
    Fitted { params: FittedParams, jitter_std: f64 },
    /// A precomputed map, e.g. produced by an external model.
    Fixed(LikelihoodMap),
}

impl Estimator {
    pub fn estimate(&self, scenario: &Scenario) -> LikelihoodMap {
        match self {
            Estimator::Oracle => oracle_estimate(scenario),
            Estimator::Fitted { params, jitter_std } => {
                predict_with_pockets(params, scenario, &scenario.observed_pockets(*jitter_std))
            }
            Estimator::Fixed(map) => map.clone(),
        }
    }
}
