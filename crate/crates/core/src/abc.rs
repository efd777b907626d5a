//! Subset-encoded Artificial Bee Colony.
//!
//! A food source is a feature subset; its cost is the cross-validated mean
//! RMSE plus `feature_penalty` per selected feature, and its nectar (fitness)
//! is `1 / (1 + cost)`. Each iteration runs the employed, onlooker and scout
//! phases in that order.
//!
//! Every random decision is drawn from a stream keyed by
//! `(seed, phase, iteration, index)`. Proposals within a phase are built from
//! the population as it stood when the phase began, evaluated (possibly in
//! parallel), then merged in index order, so runs are bit-identical for any
//! thread count.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FoldAssignment};
use crate::metrics::CvSummary;
use crate::regressor::{cross_validate, CvError, RegressorConfig};
use crate::rng::{self, tag};

#[derive(Debug, Error)]
pub enum AbcError {
    #[error("invalid ABC configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid feature subset: {0}")]
    InvalidSubset(String),
    #[error("iteration {iteration}, {phase} phase, source {source_index}: {source}")]
    Objective {
        iteration: usize,
        phase: Phase,
        source_index: usize,
        #[source]
        source: CvError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Employed,
    Onlooker,
    Scout,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "initialization",
            Phase::Employed => "employed",
            Phase::Onlooker => "onlooker",
            Phase::Scout => "scout",
        })
    }
}

/// Sorted, unique, nonempty feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    /// Sorts and validates `indices` against `p` features.
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self, AbcError> {
        indices.sort_unstable();
        if indices.is_empty() {
            return Err(AbcError::InvalidSubset("empty subset".into()));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(AbcError::InvalidSubset("duplicate index".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= p {
                return Err(AbcError::InvalidSubset(format!(
                    "index {last} out of range for {p} features"
                )));
            }
        }
        Ok(FeatureSubset(indices))
    }

    fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(!indices.is_empty() && indices.windows(2).all(|w| w[0] < w[1]));
        FeatureSubset(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Checks the structural invariants against `p` features.
    pub fn is_valid(&self, p: usize) -> bool {
        !self.0.is_empty()
            && self.0.windows(2).all(|w| w[0] < w[1])
            && self.0.last().is_some_and(|&l| l < p)
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CardinalityMode {
    /// Any size in `1..=max_k`; the feature penalty trades size against error.
    Free { max_k: usize },
    /// Exactly `k` features.
    Fixed { k: usize },
}

impl Default for CardinalityMode {
    fn default() -> Self {
        CardinalityMode::Free { max_k: 16 }
    }
}

impl fmt::Display for CardinalityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardinalityMode::Free { max_k } => write!(f, "free (1..={max_k} features, scalarized)"),
            CardinalityMode::Fixed { k } => write!(f, "fixed ({k} features)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub cv_summary: CvSummary,
    pub n_features: usize,
    pub cost: f64,
}

impl ObjectiveValue {
    pub fn new(cv_summary: CvSummary, n_features: usize, feature_penalty: f64) -> Self {
        let cost = cv_summary.mean_rmse + feature_penalty * n_features as f64;
        ObjectiveValue {
            cv_summary,
            n_features,
            cost,
        }
    }
}

/// Nectar of a source; strictly decreasing in cost for cost >= 0.
pub fn fitness(cost: f64) -> f64 {
    if cost >= 0.0 {
        1.0 / (1.0 + cost)
    } else {
        1.0 + cost.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoodSource {
    pub subset: FeatureSubset,
    pub objective: Arc<ObjectiveValue>,
    pub fitness: f64,
    pub trials: usize,
}

impl FoodSource {
    fn new(subset: FeatureSubset, objective: Arc<ObjectiveValue>) -> Self {
        let fitness = fitness(objective.cost);
        FoodSource {
            subset,
            objective,
            fitness,
            trials: 0,
        }
    }

    pub fn cost(&self) -> f64 {
        self.objective.cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcConfig {
    pub population: usize,
    pub iterations: usize,
    /// Abandonment threshold; `None` means the population size.
    pub limit: Option<usize>,
    /// Cost added per selected feature, in target units.
    pub feature_penalty: f64,
    pub cardinality: CardinalityMode,
    pub seed: u64,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig {
            population: 50,
            iterations: 25,
            limit: None,
            feature_penalty: 25.0,
            cardinality: CardinalityMode::default(),
            seed: 0,
        }
    }
}

impl AbcConfig {
    pub fn effective_limit(&self) -> usize {
        self.limit.unwrap_or(self.population)
    }

    pub fn validate(&self, p: usize) -> Result<(), AbcError> {
        let bad = |m: &str| Err(AbcError::InvalidConfig(m.into()));
        if self.population < 2 {
            return bad("population must be >= 2");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if self.effective_limit() < 1 {
            return bad("limit must be >= 1");
        }
        if !(self.feature_penalty >= 0.0) {
            return bad("feature_penalty must be >= 0");
        }
        if p < 1 {
            return bad("no features to select from");
        }
        match self.cardinality {
            CardinalityMode::Fixed { k } if k == 0 || k > p => Err(AbcError::InvalidConfig(
                format!("fixed cardinality k={k} not in 1..={p}"),
            )),
            CardinalityMode::Free { max_k: 0 } => bad("max_k must be >= 1"),
            _ => Ok(()),
        }
    }
}

/// Anything that can score a feature subset.
pub trait SubsetObjective: Sync {
    fn n_features(&self) -> usize;
    fn evaluate(&self, subset: &FeatureSubset) -> Result<ObjectiveValue, CvError>;
}

/// Cross-validated regression objective.
pub struct CvObjective<'a> {
    pub dataset: &'a Dataset,
    pub regressor: &'a RegressorConfig,
    pub folds: &'a FoldAssignment,
    pub feature_penalty: f64,
}

impl SubsetObjective for CvObjective<'_> {
    fn n_features(&self) -> usize {
        self.dataset.n_features()
    }

    fn evaluate(&self, subset: &FeatureSubset) -> Result<ObjectiveValue, CvError> {
        cv_objective(
            subset,
            self.dataset,
            self.regressor,
            self.folds,
            self.feature_penalty,
        )
    }
}

pub fn cv_objective(
    subset: &FeatureSubset,
    dataset: &Dataset,
    regressor: &RegressorConfig,
    folds: &FoldAssignment,
    feature_penalty: f64,
) -> Result<ObjectiveValue, CvError> {
    let (summary, _) = cross_validate(dataset, subset.indices(), regressor, folds)?;
    Ok(ObjectiveValue::new(summary, subset.len(), feature_penalty))
}

fn random_subset<R: Rng>(mode: CardinalityMode, p: usize, rng: &mut R) -> FeatureSubset {
    let k = match mode {
        CardinalityMode::Fixed { k } => k,
        CardinalityMode::Free { max_k } => rng.gen_range(1..=max_k.min(p)),
    };
    let mut v = index::sample(rng, p, k).into_vec();
    v.sort_unstable();
    FeatureSubset::from_sorted(v)
}

fn uniform_from<R: Rng>(items: &[usize], rng: &mut R) -> usize {
    items[rng.gen_range(0..items.len())]
}

/// Neighborhood move on a subset, guided by a partner source.
///
/// Fixed mode swaps one member for one non-member; half of the time the
/// incoming feature comes from `partner \ subset` when that is nonempty.
/// Free mode toggles one position where the two subsets disagree (any
/// position if they agree), then repairs emptiness or overflow of `max_k`
/// without undoing the toggle.
pub fn neighbor<R: Rng>(
    subset: &FeatureSubset,
    partner: &FeatureSubset,
    p: usize,
    mode: CardinalityMode,
    rng: &mut R,
) -> FeatureSubset {
    match mode {
        CardinalityMode::Fixed { .. } => {
            let complement: Vec<usize> = (0..p).filter(|j| !subset.contains(*j)).collect();
            if complement.is_empty() {
                return subset.clone();
            }
            let out = rng.gen_range(0..subset.len());
            let from_partner: Vec<usize> = partner
                .indices()
                .iter()
                .copied()
                .filter(|j| !subset.contains(*j))
                .collect();
            let incoming = if !from_partner.is_empty() && rng.gen_bool(0.5) {
                uniform_from(&from_partner, rng)
            } else {
                uniform_from(&complement, rng)
            };
            let mut v = subset.indices().to_vec();
            v.remove(out);
            let pos = v.partition_point(|&j| j < incoming);
            v.insert(pos, incoming);
            FeatureSubset::from_sorted(v)
        }
        CardinalityMode::Free { max_k } => {
            let max_k = max_k.min(p).max(1);
            let disagree: Vec<usize> = {
                let a = subset.indices();
                let b = partner.indices();
                let mut d: Vec<usize> = a
                    .iter()
                    .copied()
                    .filter(|j| !partner.contains(*j))
                    .collect();
                d.extend(b.iter().copied().filter(|j| *j < p && !subset.contains(*j)));
                d.sort_unstable();
                d
            };
            let flip = if disagree.is_empty() {
                rng.gen_range(0..p)
            } else {
                uniform_from(&disagree, rng)
            };
            let mut v = subset.indices().to_vec();
            match v.binary_search(&flip) {
                Ok(pos) => {
                    v.remove(pos);
                    if v.is_empty() {
                        let choices: Vec<usize> = (0..p).filter(|&j| j != flip || p == 1).collect();
                        v.push(uniform_from(&choices, rng));
                    }
                }
                Err(pos) => {
                    v.insert(pos, flip);
                    if v.len() > max_k {
                        let droppable: Vec<usize> =
                            v.iter().copied().filter(|&j| j != flip).collect();
                        let gone = uniform_from(&droppable, rng);
                        v.retain(|&j| j != gone);
                    }
                }
            }
            FeatureSubset::from_sorted(v)
        }
    }
}

/// Roulette-wheel probabilities proportional to fitness; uniform when all
/// fitness values are zero.
pub fn selection_probabilities(fitness: &[f64]) -> Vec<f64> {
    assert!(!fitness.is_empty(), "no sources to select from");
    let total: f64 = fitness.iter().sum();
    if total > 0.0 {
        fitness.iter().map(|f| f / total).collect()
    } else {
        vec![1.0 / fitness.len() as f64; fitness.len()]
    }
}

fn roulette<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn pick_partner<R: Rng>(self_index: usize, population: usize, rng: &mut R) -> usize {
    let mut j = rng.gen_range(0..population - 1);
    if j >= self_index {
        j += 1;
    }
    j
}

/// Per-iteration progress record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best_cost: f64,
    pub best_mean_rmse: f64,
    pub best_subset: FeatureSubset,
    /// Distinct subsets evaluated so far, including initialization.
    pub evaluations: usize,
    pub scouts: usize,
}

/// Best subset seen for one subset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBest {
    pub k: usize,
    pub mean_rmse: f64,
    pub cost: f64,
    pub subset: FeatureSubset,
}

#[derive(Debug, Clone)]
pub struct AbcOutcome {
    pub best: FoodSource,
    pub trace: Vec<IterationRecord>,
    pub population: Vec<FoodSource>,
    pub evaluations: usize,
    pub best_by_size: Vec<SizeBest>,
}

struct Evaluator<'a, O: SubsetObjective> {
    objective: &'a O,
    cache: HashMap<FeatureSubset, Arc<ObjectiveValue>>,
}

impl<O: SubsetObjective> Evaluator<'_, O> {
    /// Evaluates every uncached subset in parallel and returns the objective
    /// for each input, in input order.
    fn evaluate(
        &mut self,
        subsets: &[FeatureSubset],
        iteration: usize,
        phase: Phase,
    ) -> Result<Vec<Arc<ObjectiveValue>>, AbcError> {
        let mut pending: Vec<(usize, &FeatureSubset)> = Vec::new();
        for (i, s) in subsets.iter().enumerate() {
            if !self.cache.contains_key(s) && !pending.iter().any(|(_, q)| *q == s) {
                pending.push((i, s));
            }
        }
        let objective = self.objective;
        let results: Vec<_> = pending
            .par_iter()
            .map(|(i, s)| (*i, objective.evaluate(s)))
            .collect();
        for ((_, s), (i, r)) in pending.iter().zip(results) {
            let value = r.map_err(|source| AbcError::Objective {
                iteration,
                phase,
                source_index: i,
                source,
            })?;
            self.cache.insert((*s).clone(), Arc::new(value));
        }
        Ok(subsets.iter().map(|s| Arc::clone(&self.cache[s])).collect())
    }
}

fn consider_best(best: &mut FoodSource, subset: &FeatureSubset, value: &Arc<ObjectiveValue>) {
    if value.cost < best.cost() {
        *best = FoodSource::new(subset.clone(), Arc::clone(value));
    }
}

pub fn abc_run<O: SubsetObjective>(
    cfg: &AbcConfig,
    objective: &O,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<AbcOutcome, AbcError> {
    let p = objective.n_features();
    cfg.validate(p)?;
    let sn = cfg.population;
    let mode = match cfg.cardinality {
        CardinalityMode::Free { max_k } => CardinalityMode::Free {
            max_k: max_k.min(p),
        },
        fixed => fixed,
    };
    let limit = cfg.effective_limit();
    let mut eval = Evaluator {
        objective,
        cache: HashMap::new(),
    };

    let mut population = init_population(cfg, p, &mut eval)?;
    let mut best = population[0].clone();
    for s in &population[1..] {
        consider_best(&mut best, &s.subset, &s.objective);
    }

    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 1..=cfg.iterations {
        // Employed bees: one proposal per source.
        let proposals: Vec<FeatureSubset> = (0..sn)
            .map(|i| {
                let mut r = rng::stream(cfg.seed, &[tag::EMPLOYED, iteration as u64, i as u64]);
                let partner = pick_partner(i, sn, &mut r);
                neighbor(
                    &population[i].subset,
                    &population[partner].subset,
                    p,
                    mode,
                    &mut r,
                )
            })
            .collect();
        let values = eval.evaluate(&proposals, iteration, Phase::Employed)?;
        for (i, (cand, value)) in proposals.into_iter().zip(values).enumerate() {
            consider_best(&mut best, &cand, &value);
            greedy_update(&mut population[i], cand, value);
        }

        // Onlookers: roulette selection on current nectar.
        let fit: Vec<f64> = population.iter().map(|s| s.fitness).collect();
        let probs = selection_probabilities(&fit);
        let picks: Vec<(usize, FeatureSubset)> = (0..sn)
            .map(|j| {
                let mut r = rng::stream(cfg.seed, &[tag::ONLOOKER, iteration as u64, j as u64]);
                let src = roulette(&probs, &mut r);
                let partner = pick_partner(src, sn, &mut r);
                let cand = neighbor(
                    &population[src].subset,
                    &population[partner].subset,
                    p,
                    mode,
                    &mut r,
                );
                (src, cand)
            })
            .collect();
        let cands: Vec<FeatureSubset> = picks.iter().map(|(_, c)| c.clone()).collect();
        let values = eval.evaluate(&cands, iteration, Phase::Onlooker)?;
        for ((src, cand), value) in picks.into_iter().zip(values) {
            consider_best(&mut best, &cand, &value);
            greedy_update(&mut population[src], cand, value);
        }

        // Scouts: abandon exhausted sources.
        let abandoned: Vec<usize> = (0..sn).filter(|&i| population[i].trials > limit).collect();
        let fresh: Vec<FeatureSubset> = abandoned
            .iter()
            .map(|&i| {
                let mut r = rng::stream(cfg.seed, &[tag::SCOUT, iteration as u64, i as u64]);
                random_subset(mode, p, &mut r)
            })
            .collect();
        let values = eval.evaluate(&fresh, iteration, Phase::Scout)?;
        for ((&i, subset), value) in abandoned.iter().zip(fresh).zip(values) {
            consider_best(&mut best, &subset, &value);
            population[i] = FoodSource::new(subset, value);
        }

        let record = IterationRecord {
            iteration,
            best_cost: best.cost(),
            best_mean_rmse: best.objective.cv_summary.mean_rmse,
            best_subset: best.subset.clone(),
            evaluations: eval.cache.len(),
            scouts: abandoned.len(),
        };
        log::debug!(
            "iteration {iteration}: best cost {:.4} on {} ({} evaluations)",
            record.best_cost,
            record.best_subset,
            record.evaluations
        );
        progress(&record);
        trace.push(record);
    }

    let mut by_size: BTreeMap<usize, SizeBest> = BTreeMap::new();
    let mut entries: Vec<(&FeatureSubset, &Arc<ObjectiveValue>)> = eval.cache.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    for (subset, value) in entries {
        let better = by_size
            .get(&subset.len())
            .is_none_or(|cur| value.cv_summary.mean_rmse < cur.mean_rmse);
        if better {
            by_size.insert(
                subset.len(),
                SizeBest {
                    k: subset.len(),
                    mean_rmse: value.cv_summary.mean_rmse,
                    cost: value.cost,
                    subset: subset.clone(),
                },
            );
        }
    }

    Ok(AbcOutcome {
        best,
        trace,
        population,
        evaluations: eval.cache.len(),
        best_by_size: by_size.into_values().collect(),
    })
}

fn greedy_update(source: &mut FoodSource, cand: FeatureSubset, value: Arc<ObjectiveValue>) {
    if value.cost < source.cost() {
        *source = FoodSource::new(cand, value);
    } else {
        source.trials += 1;
    }
}

fn init_population<O: SubsetObjective>(
    cfg: &AbcConfig,
    p: usize,
    eval: &mut Evaluator<'_, O>,
) -> Result<Vec<FoodSource>, AbcError> {
    let mode = match cfg.cardinality {
        CardinalityMode::Free { max_k } => CardinalityMode::Free {
            max_k: max_k.min(p),
        },
        fixed => fixed,
    };
    let mut subsets: Vec<FeatureSubset> = Vec::with_capacity(cfg.population);
    for i in 0..cfg.population {
        let mut r = rng::stream(cfg.seed, &[tag::INIT, i as u64]);
        let mut s = random_subset(mode, p, &mut r);
        for _ in 0..32 {
            if !subsets.contains(&s) {
                break;
            }
            s = random_subset(mode, p, &mut r);
        }
        subsets.push(s);
    }
    let values = eval.evaluate(&subsets, 0, Phase::Init)?;
    Ok(subsets
        .into_iter()
        .zip(values)
        .map(|(s, v)| FoodSource::new(s, v))
        .collect())
}

/// Initial population without a running optimizer, for inspection and tests.
pub fn init_population_for<O: SubsetObjective>(
    cfg: &AbcConfig,
    objective: &O,
) -> Result<Vec<FoodSource>, AbcError> {
    let p = objective.n_features();
    if let CardinalityMode::Fixed { k } = cfg.cardinality {
        if k > p {
            return Err(AbcError::InvalidConfig(format!(
                "fixed cardinality k={k} exceeds {p} features"
            )));
        }
    }
    cfg.validate(p)?;
    let mut eval = Evaluator {
        objective,
        cache: HashMap::new(),
    };
    init_population(cfg, p, &mut eval)
}
