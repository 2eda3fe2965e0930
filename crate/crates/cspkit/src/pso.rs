//! Particle-swarm search over the classifier's four starting hyperparameters.
//!
//! Fitness of a candidate is the validation accuracy of a classifier trained
//! from scratch with it. Particle 0 always starts at [`HyperParams::default`],
//! so the tuned result can never score below the untuned starting point on
//! the validation set.
//!
//! Determinism: all random draws happen in one fixed-order sequential loop,
//! and fitness evaluations — though they may run in parallel — are collected
//! in particle order before any reduction. Runs with the same inputs and
//! config are bit-identical, and a longer run with the same seed extends a
//! shorter one: its best-so-far trace has the shorter run's trace as a
//! prefix.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csp::FeatureVector;
use crate::error::{Error, Result};
use crate::par;
use crate::srit2nfis::{
    HyperParams, Srit2nfisModel, ADD_THRESHOLD_RANGE, INTER_OVERLAP_RANGE,
    NOVELTY_THRESHOLD_RANGE, UPDATE_THRESHOLD_RANGE,
};

/// Number of tuned dimensions.
pub const SEARCH_DIMS: usize = 4;

/// Training passes used inside every fitness evaluation.
pub const FITNESS_TRAIN_PASSES: usize = 3;

/// Swarm settings. `parameter_width` is the velocity clamp as a fraction of
/// each dimension's range; `iterations` counts evaluation rounds and includes
/// the initial swarm evaluation, so `iterations = 1` just scores the starting
/// positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub iterations: usize,
    pub swarm_size: usize,
    pub parameter_width: f64,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            iterations: 20,
            swarm_size: 10,
            parameter_width: 0.2,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.swarm_size < 2 {
            return Err(Error::InvalidConfig("swarm_size must be >= 2".into()));
        }
        if !(self.parameter_width > 0.0 && self.parameter_width <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "parameter_width {} outside (0, 1]",
                self.parameter_width
            )));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Box bounds of the searched hyperparameters, in the fixed order
/// (add, novelty, inter-overlap, update). The default covers exactly the
/// admissible ranges of [`HyperParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub bounds: [(f64, f64); SEARCH_DIMS],
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            bounds: [
                ADD_THRESHOLD_RANGE,
                NOVELTY_THRESHOLD_RANGE,
                INTER_OVERLAP_RANGE,
                UPDATE_THRESHOLD_RANGE,
            ],
        }
    }
}

impl SearchSpace {
    fn params_at(&self, x: &[f64; SEARCH_DIMS]) -> HyperParams {
        HyperParams {
            add_threshold_init: x[0],
            novelty_threshold: x[1],
            inter_overlap: x[2],
            update_threshold_init: x[3],
        }
    }

    fn position_of(&self, p: &HyperParams) -> [f64; SEARCH_DIMS] {
        [p.add_threshold_init, p.novelty_threshold, p.inter_overlap, p.update_threshold_init]
    }
}

/// Result of a tuning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuneOutcome {
    /// Best hyperparameters found.
    pub params: HyperParams,
    /// Validation accuracy of `params`.
    pub accuracy: f64,
    /// Best-so-far validation accuracy after each evaluation round;
    /// length equals `iterations` and the sequence never decreases.
    pub trace: Vec<f64>,
}

/// One cell of a width x iteration-count sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub parameter_width: f64,
    pub iterations: usize,
    pub accuracy: f64,
}

/// Grid of sweep results, row-major over (width, iteration count).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    /// CSV with header `parameter_width,iterations,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter_width,iterations,accuracy\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{}\n", c.parameter_width, c.iterations, c.accuracy));
        }
        out
    }
}

fn infer_problem(train: &[FeatureVector], val: &[FeatureVector]) -> Result<(u32, usize)> {
    if train.is_empty() {
        return Err(Error::InvalidInput("tuning needs a nonempty training set".into()));
    }
    if val.is_empty() {
        return Err(Error::InvalidInput("tuning needs a nonempty validation set".into()));
    }
    let dim = train[0].values.len();
    let mut max_label = 0u32;
    for (kind, set) in [("training", train), ("validation", val)] {
        for fv in set {
            if fv.values.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "{kind} sample for trial {} has {} features, expected {}",
                    fv.trial_id,
                    fv.values.len(),
                    dim
                )));
            }
            if fv.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{kind} sample for trial {} contains non-finite features",
                    fv.trial_id
                )));
            }
            if fv.label < 1 {
                return Err(Error::InvalidInput(format!(
                    "{kind} sample for trial {} has label 0; labels start at 1",
                    fv.trial_id
                )));
            }
            max_label = max_label.max(fv.label);
        }
    }
    if max_label < 2 {
        return Err(Error::InvalidInput("tuning needs at least 2 classes".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidInput("feature vectors are empty".into()));
    }
    // Identical feature vectors on both sides of the split leak the
    // validation set into training and inflate every fitness value.
    for v in val {
        for t in train {
            if v.label == t.label && v.values == t.values {
                return Err(Error::InvalidInput(format!(
                    "validation trial {} duplicates training trial {}",
                    v.trial_id, t.trial_id
                )));
            }
        }
    }
    Ok((max_label, dim))
}

fn fitness(
    position: &[f64; SEARCH_DIMS],
    space: &SearchSpace,
    train: &[FeatureVector],
    val: &[FeatureVector],
    n_classes: u32,
    dim: usize,
) -> Result<f64> {
    let params = space.params_at(position);
    let mut model = Srit2nfisModel::new(n_classes, dim, params)?;
    model.train(train, FITNESS_TRAIN_PASSES)?;
    Ok(model.evaluate(val)?.accuracy)
}

fn evaluate_swarm(
    positions: &[[f64; SEARCH_DIMS]],
    space: &SearchSpace,
    train: &[FeatureVector],
    val: &[FeatureVector],
    n_classes: u32,
    dim: usize,
) -> Result<Vec<f64>> {
    let raw = par::map_slice(positions, |x| fitness(x, space, train, val, n_classes, dim));
    let mut fits = Vec::with_capacity(raw.len());
    for r in raw {
        fits.push(r?);
    }
    Ok(fits)
}

/// Runs the swarm and returns the best hyperparameters, their validation
/// accuracy, and the best-so-far trace.
pub fn tune(train: &[FeatureVector], val: &[FeatureVector], cfg: &PsoConfig) -> Result<TuneOutcome> {
    cfg.validate()?;
    let (n_classes, dim) = infer_problem(train, val)?;
    let space = SearchSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let s = cfg.swarm_size;
    let mut positions: Vec<[f64; SEARCH_DIMS]> = Vec::with_capacity(s);
    positions.push(space.position_of(&HyperParams::default()));
    for _ in 1..s {
        let mut x = [0.0; SEARCH_DIMS];
        for (d, slot) in x.iter_mut().enumerate() {
            let (lo, hi) = space.bounds[d];
            *slot = lo + rng.random::<f64>() * (hi - lo);
        }
        positions.push(x);
    }
    let mut velocities = vec![[0.0f64; SEARCH_DIMS]; s];

    let fits = evaluate_swarm(&positions, &space, train, val, n_classes, dim)?;
    let mut pbest_pos = positions.clone();
    let mut pbest_fit = fits;
    let mut gbest_pos = pbest_pos[0];
    let mut gbest_fit = pbest_fit[0];
    for p in 1..s {
        if pbest_fit[p] > gbest_fit {
            gbest_fit = pbest_fit[p];
            gbest_pos = pbest_pos[p];
        }
    }
    let mut trace = Vec::with_capacity(cfg.iterations);
    trace.push(gbest_fit);

    for _ in 1..cfg.iterations {
        for p in 0..s {
            for d in 0..SEARCH_DIMS {
                let (lo, hi) = space.bounds[d];
                let range = hi - lo;
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = cfg.inertia * velocities[p][d]
                    + cfg.cognitive * r1 * (pbest_pos[p][d] - positions[p][d])
                    + cfg.social * r2 * (gbest_pos[d] - positions[p][d]);
                let vmax = cfg.parameter_width * range;
                velocities[p][d] = v.clamp(-vmax, vmax);
                positions[p][d] = (positions[p][d] + velocities[p][d]).clamp(lo, hi);
            }
        }
        let fits = evaluate_swarm(&positions, &space, train, val, n_classes, dim)?;
        for p in 0..s {
            if fits[p] > pbest_fit[p] {
                pbest_fit[p] = fits[p];
                pbest_pos[p] = positions[p];
            }
        }
        for p in 0..s {
            if pbest_fit[p] > gbest_fit {
                gbest_fit = pbest_fit[p];
                gbest_pos = pbest_pos[p];
            }
        }
        trace.push(gbest_fit);
    }

    Ok(TuneOutcome { params: space.params_at(&gbest_pos), accuracy: gbest_fit, trace })
}

/// Runs [`tune`] once per (width, iteration count) pair, all cells sharing
/// the base config's seed. For a fixed width, a cell with more iterations can
/// never score lower, because equal seeds make the longer run an extension of
/// the shorter one.
pub fn sweep(
    train: &[FeatureVector],
    val: &[FeatureVector],
    widths: &[f64],
    iteration_counts: &[usize],
    base: &PsoConfig,
) -> Result<SweepGrid> {
    if widths.is_empty() || iteration_counts.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one width and one iteration count".into()));
    }
    let mut cells = Vec::with_capacity(widths.len() * iteration_counts.len());
    for &w in widths {
        for &it in iteration_counts {
            let cfg = PsoConfig { parameter_width: w, iterations: it, ..*base };
            let outcome = tune(train, val, &cfg)?;
            cells.push(SweepCell { parameter_width: w, iterations: it, accuracy: outcome.accuracy });
        }
    }
    Ok(SweepGrid { cells })
}
