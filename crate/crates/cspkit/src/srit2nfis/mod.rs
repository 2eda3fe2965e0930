//! Evolving interval type-2 neuro-fuzzy classifier with sequential
//! self-regulated learning.
//!
//! The network holds a set of rules, each pairing one interval type-2
//! Gaussian membership function per input dimension with a per-class weight
//! vector. Prediction runs five stages: per-dimension upper/lower
//! memberships, per-rule products, interval reduction to a single firing
//! strength, and a normalized weighted vote. Learning processes samples one
//! at a time and routes each to exactly one fate — grow a rule, update
//! weights, discard, or defer to a reserve queue — then prunes rules whose
//! contribution has stayed negligible for a window of same-class samples.
//! Two decision thresholds adapt by exponential smoothing inside fixed
//! clamping ranges, which makes the whole procedure self-regulating:
//! hyperparameters choose starting points, not fixed behavior.

pub mod io;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::csp::FeatureVector;
use crate::error::{Error, Result};

/// Blend factor between the lower and upper firing products.
pub const ALPHA: f64 = 0.5;
/// Smoothing factor for threshold adaptation.
pub const GAMMA: f64 = 0.99;
/// Overlap factor toward the nearest same-class rule when sizing a new rule.
pub const INTRA_OVERLAP: f64 = 0.95;
/// Normalized firing below this counts as a non-contribution for pruning.
pub const PRUNE_THRESHOLD: f64 = 0.01;
/// Consecutive non-contributions on same-class samples before a rule is cut.
pub const PRUNE_WINDOW: usize = 10;
/// Hinge magnitude below this marks a sample as carrying nothing new.
pub const DELETE_THRESHOLD: f64 = 0.05;
/// Ridge term in the per-sample weight projection.
pub const REGULARIZATION: f64 = 0.01;
/// Rules firing (normalized) above this take part in weight updates.
const ACTIVE_RULE_THRESHOLD: f64 = 0.01;
/// Smallest membership width a grown rule may have.
const SIGMA_FLOOR: f64 = 1e-6;
/// Total firing below this means no rule fired.
const FIRING_UNDERFLOW: f64 = 1e-300;
/// New-rule mean interval half-width, as a fraction of the rule width.
const MEAN_INTERVAL_FRACTION: f64 = 0.05;

/// Clamping range of the rule-growth threshold.
pub const ADD_THRESHOLD_RANGE: (f64, f64) = (1.01, 1.20);
/// Clamping range of the weight-update threshold.
pub const UPDATE_THRESHOLD_RANGE: (f64, f64) = (0.04, 0.20);
/// Valid range of the novelty threshold hyperparameter.
pub const NOVELTY_THRESHOLD_RANGE: (f64, f64) = (0.01, 0.60);
/// Valid range of the inter-class overlap hyperparameter.
pub const INTER_OVERLAP_RANGE: (f64, f64) = (0.10, 0.40);

/// Gaussian membership function with an uncertain mean interval and a
/// fixed width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct It2GaussianMf {
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub sigma: f64,
}

impl It2GaussianMf {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_lo <= self.mean_hi) {
            return Err(Error::InvalidInput(format!(
                "mean interval [{}, {}] is inverted",
                self.mean_lo, self.mean_hi
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.mean_lo.is_finite() || !self.mean_hi.is_finite() {
            return Err(Error::InvalidInput("mean interval must be finite".into()));
        }
        Ok(())
    }

    fn gauss(&self, x: f64, mean: f64) -> f64 {
        let z = (x - mean) / self.sigma;
        (-0.5 * z * z).exp()
    }

    /// Upper membership: 1 inside the mean interval, the Gaussian of the
    /// nearer bound outside it.
    pub fn upper(&self, x: f64) -> f64 {
        if x < self.mean_lo {
            self.gauss(x, self.mean_lo)
        } else if x > self.mean_hi {
            self.gauss(x, self.mean_hi)
        } else {
            1.0
        }
    }

    /// Lower membership: the Gaussian of the farther bound, switching at
    /// the interval midpoint.
    pub fn lower(&self, x: f64) -> f64 {
        if x <= 0.5 * (self.mean_lo + self.mean_hi) {
            self.gauss(x, self.mean_hi)
        } else {
            self.gauss(x, self.mean_lo)
        }
    }
}

/// One fuzzy rule: an antecedent membership function per input dimension
/// and a consequent weight per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: u64,
    pub mfs: Vec<It2GaussianMf>,
    pub weights: Vec<f64>,
    pub class_assoc: u32,
    /// Samples processed since this rule was created.
    pub age: u64,
    /// Rolling record of "did not contribute" flags over the most recent
    /// same-class samples; a full window of misses triggers pruning.
    pub recent_misses: VecDeque<bool>,
}

impl Rule {
    /// Midpoints of the mean intervals.
    pub fn center(&self) -> Vec<f64> {
        self.mfs.iter().map(|m| 0.5 * (m.mean_lo + m.mean_hi)).collect()
    }

    /// Average width over dimensions.
    pub fn mean_sigma(&self) -> f64 {
        self.mfs.iter().map(|m| m.sigma).sum::<f64>() / self.mfs.len() as f64
    }

    fn squared_distance_to(&self, x: &[f64]) -> f64 {
        self.mfs
            .iter()
            .zip(x)
            .map(|(m, &xi)| {
                let d = xi - 0.5 * (m.mean_lo + m.mean_hi);
                d * d
            })
            .sum()
    }
}

/// Tunable starting points of the self-regulating learner. The remaining
/// constants of the learning law are fixed module constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Initial threshold on the hinge magnitude for growing a rule.
    pub add_threshold_init: f64,
    /// Required novelty (1 - potential) for growing a rule.
    pub novelty_threshold: f64,
    /// Overlap factor toward the nearest other-class rule for new widths.
    pub inter_overlap: f64,
    /// Initial threshold on the hinge magnitude for weight updates.
    pub update_threshold_init: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            add_threshold_init: 1.10,
            novelty_threshold: 0.30,
            inter_overlap: 0.25,
            update_threshold_init: 0.12,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, (lo, hi): (f64, f64)| {
            if !(lo..=hi).contains(&v) || !v.is_finite() {
                Err(Error::InvalidConfig(format!("{name} = {v} outside [{lo}, {hi}]")))
            } else {
                Ok(())
            }
        };
        check("add_threshold_init", self.add_threshold_init, ADD_THRESHOLD_RANGE)?;
        check("novelty_threshold", self.novelty_threshold, NOVELTY_THRESHOLD_RANGE)?;
        check("inter_overlap", self.inter_overlap, INTER_OVERLAP_RANGE)?;
        check("update_threshold_init", self.update_threshold_init, UPDATE_THRESHOLD_RANGE)?;
        Ok(())
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Winning class (lowest index on ties); 1 when nothing fired.
    pub class: u32,
    /// Per-class vote vector.
    pub y: Vec<f64>,
    /// Per-rule reduced firing strengths, unnormalized.
    pub firing: Vec<f64>,
    /// True when the total firing underflowed.
    pub no_rule_fired: bool,
}

/// What a learning step did with its sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnAction {
    GrewRule,
    UpdatedParams,
    DeletedSample,
    ReservedSample,
}

/// A learning step's action plus any rules pruned right after it.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub action: LearnAction,
    pub pruned: Vec<u64>,
}

/// A sample deferred for a later pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservedSample {
    pub values: Vec<f64>,
    pub label: u32,
}

/// Per-pass accounting of a training run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub grew: usize,
    pub updated: usize,
    pub deleted: usize,
    pub reserved: usize,
    pub pruned_rule_ids: Vec<u64>,
    pub passes_run: usize,
    pub final_rule_count: usize,
    pub reserved_remaining: usize,
    /// Threshold values after every processed sample.
    pub add_threshold_trace: Vec<f64>,
    pub update_threshold_trace: Vec<f64>,
}

/// Accuracy plus a confusion matrix with rows indexed by true class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub confusion: Vec<Vec<usize>>,
}

/// The classifier state.
#[derive(Debug, Clone)]
pub struct Srit2nfisModel {
    pub n_classes: u32,
    pub dim: usize,
    pub hyper: HyperParams,
    /// Adaptive rule-growth threshold, kept inside [`ADD_THRESHOLD_RANGE`].
    pub add_threshold: f64,
    /// Adaptive update threshold, kept inside [`UPDATE_THRESHOLD_RANGE`].
    pub update_threshold: f64,
    pub rules: Vec<Rule>,
    pub reserve_queue: Vec<ReservedSample>,
    pub(crate) next_rule_id: u64,
    pub(crate) seen_classes: Vec<bool>,
    pub(crate) stats_count: u64,
    pub(crate) stats_mean: Vec<f64>,
    pub(crate) stats_m2: Vec<f64>,
}

/// Per-class target encoding: +1 at the true class, -1 elsewhere.
pub fn encode_target(class: u32, n_classes: u32) -> Result<Vec<f64>> {
    if n_classes == 0 {
        return Err(Error::InvalidInput("need at least one class".into()));
    }
    if class < 1 || class > n_classes {
        return Err(Error::InvalidInput(format!("class {class} outside 1..={n_classes}")));
    }
    Ok((1..=n_classes).map(|j| if j == class { 1.0 } else { -1.0 }).collect())
}

/// Hinge error: zero where the margin y_j * t_j already exceeds 1, the raw
/// residual t_j - y_j elsewhere. Returns the vector and its max magnitude.
///
/// Panics if the two slices have different lengths.
pub fn hinge_error(y: &[f64], target: &[f64]) -> (Vec<f64>, f64) {
    assert_eq!(y.len(), target.len(), "output/target length mismatch");
    let e: Vec<f64> = y
        .iter()
        .zip(target)
        .map(|(&yj, &tj)| if yj * tj > 1.0 { 0.0 } else { tj - yj })
        .collect();
    let abs_max = e.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    (e, abs_max)
}

impl Srit2nfisModel {
    pub fn new(n_classes: u32, dim: usize, hyper: HyperParams) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::InvalidInput("classifier needs at least 2 classes".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("input dimension must be positive".into()));
        }
        hyper.validate()?;
        Ok(Srit2nfisModel {
            n_classes,
            dim,
            hyper,
            add_threshold: hyper.add_threshold_init,
            update_threshold: hyper.update_threshold_init,
            rules: Vec::new(),
            reserve_queue: Vec::new(),
            next_rule_id: 0,
            seen_classes: vec![false; n_classes as usize],
            stats_count: 0,
            stats_mean: vec![0.0; dim],
            stats_m2: vec![0.0; dim],
        })
    }

    pub fn n_rules(&self) -> usize {
        self.rules.len()
    }

    /// Structural consistency check, used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 || self.dim == 0 {
            return Err(Error::InvalidInput("model shape is degenerate".into()));
        }
        self.hyper.validate()?;
        let in_range = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        if !in_range(self.add_threshold, ADD_THRESHOLD_RANGE) {
            return Err(Error::InvalidInput(format!(
                "add threshold {} outside clamp range",
                self.add_threshold
            )));
        }
        if !in_range(self.update_threshold, UPDATE_THRESHOLD_RANGE) {
            return Err(Error::InvalidInput(format!(
                "update threshold {} outside clamp range",
                self.update_threshold
            )));
        }
        for r in &self.rules {
            if r.mfs.len() != self.dim {
                return Err(Error::InvalidInput(format!(
                    "rule {} has {} membership functions for dimension {}",
                    r.id,
                    r.mfs.len(),
                    self.dim
                )));
            }
            if r.weights.len() != self.n_classes as usize
                || r.weights.iter().any(|w| !w.is_finite())
            {
                return Err(Error::InvalidInput(format!("rule {} has bad weights", r.id)));
            }
            if r.class_assoc < 1 || r.class_assoc > self.n_classes {
                return Err(Error::InvalidInput(format!(
                    "rule {} class {} out of range",
                    r.id, r.class_assoc
                )));
            }
            if r.recent_misses.len() > PRUNE_WINDOW {
                return Err(Error::InvalidInput(format!(
                    "rule {} contribution window overflows",
                    r.id
                )));
            }
            for m in &r.mfs {
                m.validate()?;
            }
        }
        if self.seen_classes.len() != self.n_classes as usize
            || self.stats_mean.len() != self.dim
            || self.stats_m2.len() != self.dim
        {
            return Err(Error::InvalidInput("model bookkeeping shape mismatch".into()));
        }
        for s in &self.reserve_queue {
            if s.values.len() != self.dim || s.label < 1 || s.label > self.n_classes {
                return Err(Error::InvalidInput("reserved sample is malformed".into()));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("input has non-finite values".into()));
        }
        Ok(())
    }

    /// Forward pass. Errors when the model has no rules; when every rule's
    /// firing underflows, votes are zero and the lowest class is reported
    /// with the `no_rule_fired` flag set.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.check_input(x)?;
        if self.rules.is_empty() {
            return Err(Error::NoRules);
        }
        let mut firing = Vec::with_capacity(self.rules.len());
        for rule in &self.rules {
            let mut upper = 1.0;
            let mut lower = 1.0;
            for (m, &xi) in rule.mfs.iter().zip(x) {
                upper *= m.upper(xi);
                lower *= m.lower(xi);
            }
            firing.push(ALPHA * lower + (1.0 - ALPHA) * upper);
        }
        let total: f64 = firing.iter().sum();
        if total < FIRING_UNDERFLOW {
            return Ok(Prediction {
                class: 1,
                y: vec![0.0; self.n_classes as usize],
                firing,
                no_rule_fired: true,
            });
        }
        let mut y = vec![0.0; self.n_classes as usize];
        for (rule, &h) in self.rules.iter().zip(&firing) {
            for (j, &w) in rule.weights.iter().enumerate() {
                y[j] += w * h;
            }
        }
        for v in y.iter_mut() {
            *v /= total;
        }
        let mut class = 1u32;
        for j in 1..y.len() {
            if y[j] > y[(class - 1) as usize] {
                class = j as u32 + 1;
            }
        }
        Ok(Prediction { class, y, firing, no_rule_fired: false })
    }

    /// Mean Gaussian affinity between `x` and the significantly firing
    /// rules of `class`; 0 when the class has no such rules. High values
    /// mean the sample sits in territory the class already covers.
    pub fn spherical_potential(&self, x: &[f64], class: u32) -> Result<f64> {
        self.check_input(x)?;
        if class < 1 || class > self.n_classes {
            return Err(Error::InvalidInput(format!(
                "class {class} outside 1..={}",
                self.n_classes
            )));
        }
        if self.rules.is_empty() {
            return Ok(0.0);
        }
        let firing: Vec<f64> = self
            .rules
            .iter()
            .map(|rule| {
                let mut upper = 1.0;
                let mut lower = 1.0;
                for (m, &xi) in rule.mfs.iter().zip(x) {
                    upper *= m.upper(xi);
                    lower *= m.lower(xi);
                }
                ALPHA * lower + (1.0 - ALPHA) * upper
            })
            .collect();
        let max_firing = firing.iter().cloned().fold(0.0f64, f64::max);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (rule, &h) in self.rules.iter().zip(&firing) {
            if rule.class_assoc != class || !(h > 0.1 * max_firing) {
                continue;
            }
            let sigma = rule.mean_sigma();
            let d2 = rule.squared_distance_to(x);
            sum += (-d2 / (2.0 * sigma * sigma)).exp();
            count += 1;
        }
        if count == 0 {
            Ok(0.0)
        } else {
            Ok(sum / count as f64)
        }
    }

    fn update_running_stats(&mut self, x: &[f64]) {
        self.stats_count += 1;
        let n = self.stats_count as f64;
        for i in 0..self.dim {
            let delta = x[i] - self.stats_mean[i];
            self.stats_mean[i] += delta / n;
            self.stats_m2[i] += delta * (x[i] - self.stats_mean[i]);
        }
    }

    /// Width for a rule grown at `x` for `class`: a fraction of the distance
    /// to the nearest same-class rule, shrunk by the inter-class overlap if
    /// another class sits closer; the first rule of a class falls back to
    /// half the running input standard deviation.
    fn new_rule_sigma(&self, x: &[f64], class: u32) -> f64 {
        let mut d_same: Option<f64> = None;
        let mut d_other: Option<f64> = None;
        for rule in &self.rules {
            let d = rule.squared_distance_to(x).sqrt();
            if rule.class_assoc == class {
                d_same = Some(d_same.map_or(d, |cur: f64| cur.min(d)));
            } else {
                d_other = Some(d_other.map_or(d, |cur: f64| cur.min(d)));
            }
        }
        let sigma = match d_same {
            Some(ds) => {
                let mut s = INTRA_OVERLAP * ds;
                if let Some(od) = d_other {
                    s = s.min(self.hyper.inter_overlap * od);
                }
                s
            }
            None => {
                if self.stats_count >= 2 {
                    let mean_std = (0..self.dim)
                        .map(|i| (self.stats_m2[i] / self.stats_count as f64).sqrt())
                        .sum::<f64>()
                        / self.dim as f64;
                    if mean_std > 0.0 {
                        0.5 * mean_std
                    } else {
                        1.0
                    }
                } else {
                    1.0
                }
            }
        };
        sigma.max(SIGMA_FLOOR)
    }

    fn grow_rule(&mut self, x: &[f64], class: u32) {
        let sigma = self.new_rule_sigma(x, class);
        let half = MEAN_INTERVAL_FRACTION * sigma;
        let mfs = x
            .iter()
            .map(|&xi| It2GaussianMf { mean_lo: xi - half, mean_hi: xi + half, sigma })
            .collect();
        let weights = encode_target(class, self.n_classes).expect("class checked by caller");
        self.rules.push(Rule {
            id: self.next_rule_id,
            mfs,
            weights,
            class_assoc: class,
            age: 0,
            recent_misses: VecDeque::with_capacity(PRUNE_WINDOW),
        });
        self.next_rule_id += 1;
    }

    /// Records contribution flags for rules of the sample's class and prunes
    /// any rule that missed a full window, never cutting the last remaining
    /// rule of a class that has appeared in training. `normalized_firing`
    /// covers the rules that existed when the sample was evaluated.
    fn prune_starved_rules(&mut self, normalized_firing: &[f64], class: u32) -> Vec<u64> {
        for (idx, h) in normalized_firing.iter().enumerate() {
            let rule = &mut self.rules[idx];
            if rule.class_assoc != class {
                continue;
            }
            if rule.recent_misses.len() == PRUNE_WINDOW {
                rule.recent_misses.pop_front();
            }
            rule.recent_misses.push_back(*h < PRUNE_THRESHOLD);
        }
        let mut per_class = vec![0usize; self.n_classes as usize];
        for rule in &self.rules {
            per_class[(rule.class_assoc - 1) as usize] += 1;
        }
        let mut pruned = Vec::new();
        let mut idx = 0;
        while idx < self.rules.len() {
            let rule = &self.rules[idx];
            let starved = rule.recent_misses.len() == PRUNE_WINDOW
                && rule.recent_misses.iter().all(|&m| m);
            let class_slot = (rule.class_assoc - 1) as usize;
            let is_last_of_seen = per_class[class_slot] == 1 && self.seen_classes[class_slot];
            if starved && !is_last_of_seen {
                per_class[class_slot] -= 1;
                pruned.push(rule.id);
                self.rules.remove(idx);
            } else {
                idx += 1;
            }
        }
        pruned
    }

    /// Processes one labeled sample and routes it to exactly one fate.
    pub fn learn_sample(&mut self, x: &[f64], class: u32) -> Result<LearnOutcome> {
        self.check_input(x)?;
        if class < 1 || class > self.n_classes {
            return Err(Error::InvalidInput(format!(
                "class {class} outside 1..={}",
                self.n_classes
            )));
        }
        self.seen_classes[(class - 1) as usize] = true;
        self.update_running_stats(x);
        for rule in &mut self.rules {
            rule.age += 1;
        }

        let (prediction, normalized) = if self.rules.is_empty() {
            (None, Vec::new())
        } else {
            let p = self.predict(x)?;
            let total: f64 = p.firing.iter().sum();
            let normalized = if p.no_rule_fired {
                vec![0.0; p.firing.len()]
            } else {
                p.firing.iter().map(|h| h / total).collect()
            };
            (Some(p), normalized)
        };

        let target = encode_target(class, self.n_classes)?;
        let y = prediction
            .as_ref()
            .map(|p| p.y.clone())
            .unwrap_or_else(|| vec![0.0; self.n_classes as usize]);
        let (errors, abs_max) = hinge_error(&y, &target);
        let fired = prediction.as_ref().is_some_and(|p| !p.no_rule_fired);
        let predicted_class = prediction.as_ref().map(|p| p.class);

        let novelty_ok =
            (1.0 - self.spherical_potential(x, class)?) >= self.hyper.novelty_threshold;
        let wrong_with_margin = fired
            && predicted_class != Some(class)
            && abs_max >= self.add_threshold;
        // A sample nothing responds to is novel and erroneous by definition,
        // so the hinge test is waived in that case.
        let grow = novelty_ok && (!fired || wrong_with_margin);

        let action = if grow {
            self.grow_rule(x, class);
            self.add_threshold = (GAMMA * self.add_threshold + (1.0 - GAMMA) * abs_max)
                .clamp(ADD_THRESHOLD_RANGE.0, ADD_THRESHOLD_RANGE.1);
            LearnAction::GrewRule
        } else if fired && predicted_class == Some(class) && abs_max >= self.update_threshold {
            let s: f64 = normalized.iter().map(|h| h * h).sum::<f64>() + REGULARIZATION;
            for (rule, &h) in self.rules.iter_mut().zip(&normalized) {
                if h > ACTIVE_RULE_THRESHOLD {
                    for (w, &e) in rule.weights.iter_mut().zip(&errors) {
                        *w += h * e / s;
                    }
                }
            }
            self.update_threshold = (GAMMA * self.update_threshold + (1.0 - GAMMA) * abs_max)
                .clamp(UPDATE_THRESHOLD_RANGE.0, UPDATE_THRESHOLD_RANGE.1);
            LearnAction::UpdatedParams
        } else if abs_max < DELETE_THRESHOLD {
            LearnAction::DeletedSample
        } else {
            self.reserve_queue.push(ReservedSample { values: x.to_vec(), label: class });
            LearnAction::ReservedSample
        };

        let pruned = self.prune_starved_rules(&normalized, class);
        Ok(LearnOutcome { action, pruned })
    }

    /// Sequential training: one pass over `samples`, then up to
    /// `max_passes - 1` replays of the reserve queue while it keeps
    /// shrinking. Deferred samples left at the end stay in the queue and
    /// are counted in the report.
    pub fn train(&mut self, samples: &[FeatureVector], max_passes: usize) -> Result<TrainReport> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("training needs at least one sample".into()));
        }
        if max_passes == 0 {
            return Err(Error::InvalidConfig("max_passes must be at least 1".into()));
        }
        for f in samples {
            self.check_input(&f.values)?;
            if f.label < 1 || f.label > self.n_classes {
                return Err(Error::InvalidInput(format!(
                    "trial {}: label {} outside 1..={}",
                    f.trial_id, f.label, self.n_classes
                )));
            }
        }

        let mut report = TrainReport::default();
        let absorb = |model: &mut Self, x: &[f64], c: u32, report: &mut TrainReport| {
            let outcome = model.learn_sample(x, c)?;
            match outcome.action {
                LearnAction::GrewRule => report.grew += 1,
                LearnAction::UpdatedParams => report.updated += 1,
                LearnAction::DeletedSample => report.deleted += 1,
                LearnAction::ReservedSample => report.reserved += 1,
            }
            report.pruned_rule_ids.extend(outcome.pruned);
            report.add_threshold_trace.push(model.add_threshold);
            report.update_threshold_trace.push(model.update_threshold);
            Ok::<(), Error>(())
        };

        for f in samples {
            absorb(self, &f.values, f.label, &mut report)?;
        }
        report.passes_run = 1;

        for _ in 1..max_passes {
            if self.reserve_queue.is_empty() {
                break;
            }
            let batch: Vec<ReservedSample> = std::mem::take(&mut self.reserve_queue);
            let before = batch.len();
            for s in &batch {
                absorb(self, &s.values, s.label, &mut report)?;
            }
            report.passes_run += 1;
            if self.reserve_queue.len() >= before {
                break;
            }
        }

        report.final_rule_count = self.rules.len();
        report.reserved_remaining = self.reserve_queue.len();
        Ok(report)
    }

    /// Accuracy and confusion matrix over a labeled sample set.
    pub fn evaluate(&self, samples: &[FeatureVector]) -> Result<Evaluation> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("evaluation needs at least one sample".into()));
        }
        let k = self.n_classes as usize;
        let mut confusion = vec![vec![0usize; k]; k];
        let mut correct = 0usize;
        for f in samples {
            if f.label < 1 || f.label > self.n_classes {
                return Err(Error::InvalidInput(format!(
                    "trial {}: label {} outside 1..={}",
                    f.trial_id, f.label, self.n_classes
                )));
            }
            let p = self.predict(&f.values)?;
            confusion[(f.label - 1) as usize][(p.class - 1) as usize] += 1;
            if p.class == f.label {
                correct += 1;
            }
        }
        Ok(Evaluation {
            accuracy: correct as f64 / samples.len() as f64,
            n_correct: correct,
            n_total: samples.len(),
            confusion,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn feature(values: Vec<f64>, label: u32, trial_id: u32) -> FeatureVector {
        FeatureVector { values, label, trial_id }
    }

    fn rule_at(id: u64, center: &[f64], sigma: f64, class: u32, n_classes: u32) -> Rule {
        let half = MEAN_INTERVAL_FRACTION * sigma;
        Rule {
            id,
            mfs: center
                .iter()
                .map(|&c| It2GaussianMf { mean_lo: c - half, mean_hi: c + half, sigma })
                .collect(),
            weights: encode_target(class, n_classes).unwrap(),
            class_assoc: class,
            age: 0,
            recent_misses: VecDeque::new(),
        }
    }

    #[test]
    fn target_encoding_examples() {
        assert_eq!(encode_target(2, 4).unwrap(), vec![-1.0, 1.0, -1.0, -1.0]);
        assert_eq!(encode_target(1, 1).unwrap(), vec![1.0]);
        assert!(encode_target(5, 4).is_err());
        assert!(encode_target(0, 4).is_err());
    }

    #[test]
    fn hinge_error_examples() {
        let t = [1.0, -1.0, -1.0, -1.0];
        let (e, m) = hinge_error(&t, &t);
        assert_eq!(e, vec![0.0; 4]);
        assert_eq!(m, 0.0);

        let (e, m) = hinge_error(&[0.0; 4], &t);
        assert_eq!(e, vec![1.0, -1.0, -1.0, -1.0]);
        assert_eq!(m, 1.0);

        let (e, m) = hinge_error(&[1.5, -1.5, -1.5, -1.5], &t);
        assert_eq!(e, vec![0.0; 4]);
        assert_eq!(m, 0.0);
    }

    #[test]
    fn membership_interval_ordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let lo: f64 = rng.sample(StandardNormal);
            let width: f64 = rng.random::<f64>();
            let mf = It2GaussianMf {
                mean_lo: lo,
                mean_hi: lo + width,
                sigma: 0.1 + rng.random::<f64>(),
            };
            let x: f64 = 3.0 * rng.sample::<f64, _>(StandardNormal);
            let (u, l) = (mf.upper(x), mf.lower(x));
            assert!(l <= u + 1e-15, "lower {l} must not exceed upper {u}");
            assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn rule_centered_on_input_predicts_its_class() {
        let mut model = Srit2nfisModel::new(4, 2, HyperParams::default()).unwrap();
        model.rules.push(rule_at(0, &[0.3, -0.7], 0.5, 2, 4));
        let p = model.predict(&[0.3, -0.7]).unwrap();
        assert_eq!(p.class, 2);
        assert!(!p.no_rule_fired);
        let expected = [-1.0, 1.0, -1.0, -1.0];
        for (a, b) in p.y.iter().zip(&expected) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn equidistant_rules_average_their_weights() {
        let mut model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        model.rules.push(rule_at(0, &[-1.0], 0.8, 1, 2));
        model.rules.push(rule_at(1, &[1.0], 0.8, 2, 2));
        let p = model.predict(&[0.0]).unwrap();
        // Average of (+1,-1) and (-1,+1) is exactly zero.
        assert!(p.y[0].abs() < 1e-15 && p.y[1].abs() < 1e-15);
        assert_eq!(p.class, 1, "tie breaks toward the lowest class index");
        assert!((p.firing[0] - p.firing[1]).abs() < 1e-18);
    }

    #[test]
    fn collapsed_interval_equals_type_1_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let dim = 3;
        let mut model = Srit2nfisModel::new(3, dim, HyperParams::default()).unwrap();
        for id in 0..5u64 {
            let center: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut rule = rule_at(id, &center, 0.4 + rng.random::<f64>(), 1 + (id % 3) as u32, 3);
            for m in &mut rule.mfs {
                let mid = 0.5 * (m.mean_lo + m.mean_hi);
                m.mean_lo = mid;
                m.mean_hi = mid;
            }
            for w in &mut rule.weights {
                *w += 0.3 * rng.sample::<f64, _>(StandardNormal);
            }
            model.rules.push(rule);
        }
        for _ in 0..1000 {
            let x: Vec<f64> = (0..dim).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let p = model.predict(&x).unwrap();
            // Type-1 reference: plain Gaussian product firing.
            let mut total = 0.0;
            let mut y_ref = vec![0.0; 3];
            for rule in &model.rules {
                let mut h = 1.0;
                for (m, &xi) in rule.mfs.iter().zip(&x) {
                    let z = (xi - m.mean_lo) / m.sigma;
                    h *= (-0.5 * z * z).exp();
                }
                total += h;
                for (j, &w) in rule.weights.iter().enumerate() {
                    y_ref[j] += w * h;
                }
            }
            for (a, b) in p.y.iter().zip(&y_ref) {
                assert_relative_eq!(*a, b / total, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reduced_firing_lies_between_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let mf = It2GaussianMf {
                mean_lo: -0.2,
                mean_hi: 0.4,
                sigma: 0.3 + rng.random::<f64>(),
            };
            let x: f64 = rng.sample::<f64, _>(StandardNormal);
            let (u, l) = (mf.upper(x), mf.lower(x));
            let reduced = ALPHA * l + (1.0 - ALPHA) * u;
            assert!(reduced >= l - 1e-18 && reduced <= u + 1e-18);
        }
    }

    #[test]
    fn no_rules_errors_and_underflow_flags() {
        let model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        assert!(matches!(model.predict(&[0.0]), Err(Error::NoRules)));

        let mut model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        model.rules.push(rule_at(0, &[0.0], 1e-3, 2, 2));
        let p = model.predict(&[1.0e6]).unwrap();
        assert!(p.no_rule_fired);
        assert_eq!(p.class, 1);
        assert_eq!(p.y, vec![0.0, 0.0]);
    }

    #[test]
    fn potential_is_one_at_center_zero_far_away() {
        let mut model = Srit2nfisModel::new(2, 2, HyperParams::default()).unwrap();
        assert_eq!(model.spherical_potential(&[0.0, 0.0], 1).unwrap(), 0.0);
        model.rules.push(rule_at(0, &[1.0, -1.0], 0.5, 1, 2));
        let at_center = model.spherical_potential(&[1.0, -1.0], 1).unwrap();
        assert_relative_eq!(at_center, 1.0, epsilon = 1e-12);
        assert_eq!(model.spherical_potential(&[1.0, -1.0], 2).unwrap(), 0.0);
        let far = model.spherical_potential(&[1.0 + 10.0 * 0.5, -1.0], 1).unwrap();
        assert!(far < 1e-6);
    }

    #[test]
    fn cold_start_grows_a_rule() {
        let mut model = Srit2nfisModel::new(4, 3, HyperParams::default()).unwrap();
        let out = model.learn_sample(&[0.5, -0.25, 1.0], 3).unwrap();
        assert_eq!(out.action, LearnAction::GrewRule);
        assert!(out.pruned.is_empty());
        assert_eq!(model.n_rules(), 1);
        let rule = &model.rules[0];
        assert_eq!(rule.class_assoc, 3);
        assert_eq!(rule.weights, vec![-1.0, -1.0, 1.0, -1.0]);
        assert_eq!(rule.center(), vec![0.5, -0.25, 1.0]);
        assert_relative_eq!(rule.mean_sigma(), 1.0, epsilon = 1e-12); // stats fallback
    }

    #[test]
    fn duplicate_of_saturated_rule_is_deleted() {
        let mut model = Srit2nfisModel::new(4, 2, HyperParams::default()).unwrap();
        model.learn_sample(&[1.0, 2.0], 2).unwrap();
        let out = model.learn_sample(&[1.0, 2.0], 2).unwrap();
        assert_eq!(out.action, LearnAction::DeletedSample);
        assert_eq!(model.n_rules(), 1);
    }

    #[test]
    fn starved_rule_pruned_after_exact_window() {
        let mut model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        model.seen_classes[0] = true;
        model.rules.push(rule_at(0, &[0.0], 0.5, 1, 2));
        model.rules.push(rule_at(7, &[50.0], 0.5, 1, 2));
        model.next_rule_id = 8;
        // Samples at the first rule's center: the far rule never contributes.
        for i in 0..PRUNE_WINDOW - 1 {
            let out = model.learn_sample(&[0.0], 1).unwrap();
            assert!(out.pruned.is_empty(), "no pruning before the window fills (step {i})");
            assert_eq!(model.n_rules(), 2);
        }
        let out = model.learn_sample(&[0.0], 1).unwrap();
        assert_eq!(out.pruned, vec![7], "the starved rule goes exactly at the window");
        assert_eq!(model.n_rules(), 1);
        assert_eq!(model.rules[0].id, 0);
    }

    #[test]
    fn pruning_spares_last_rule_of_seen_class() {
        let mut model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        model.seen_classes[0] = true;
        model.seen_classes[1] = true;
        model.rules.push(rule_at(0, &[0.0], 0.5, 1, 2));
        let mut lone = rule_at(1, &[50.0], 0.5, 2, 2);
        lone.recent_misses = std::iter::repeat_n(true, PRUNE_WINDOW).collect();
        model.rules.push(lone.clone());
        let pruned = model.prune_starved_rules(&[1.0, 0.0], 2);
        assert!(pruned.is_empty(), "last class-2 rule must survive");
        assert_eq!(model.n_rules(), 2);

        // With a second class-2 rule present, the starved one goes.
        model.rules.push(rule_at(2, &[51.0], 0.5, 2, 2));
        let pruned = model.prune_starved_rules(&[1.0, 0.0, 1.0], 2);
        assert_eq!(pruned, vec![1]);
    }

    #[test]
    fn interleaved_contribution_resets_the_window() {
        let mut model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        model.seen_classes[0] = true;
        model.rules.push(rule_at(0, &[0.0], 0.5, 1, 2));
        model.rules.push(rule_at(1, &[6.0], 0.5, 1, 2));
        for _ in 0..PRUNE_WINDOW - 1 {
            model.learn_sample(&[0.0], 1).unwrap();
        }
        // A sample near the second rule breaks its miss streak.
        model.learn_sample(&[6.0], 1).unwrap();
        for _ in 0..PRUNE_WINDOW - 1 {
            let out = model.learn_sample(&[0.0], 1).unwrap();
            assert!(out.pruned.is_empty());
        }
        assert_eq!(model.n_rules(), 2);
        let out = model.learn_sample(&[0.0], 1).unwrap();
        assert_eq!(out.pruned, vec![1]);
    }

    #[test]
    fn thresholds_stay_clamped_under_random_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(2025);
        let mut model = Srit2nfisModel::new(3, 2, HyperParams::default()).unwrap();
        for _ in 0..400 {
            let x = [
                3.0 * rng.sample::<f64, _>(StandardNormal),
                3.0 * rng.sample::<f64, _>(StandardNormal),
            ];
            let c = 1 + rng.random_range(0..3u32);
            model.learn_sample(&x, c).unwrap();
            assert!(
                (ADD_THRESHOLD_RANGE.0..=ADD_THRESHOLD_RANGE.1).contains(&model.add_threshold)
            );
            assert!((UPDATE_THRESHOLD_RANGE.0..=UPDATE_THRESHOLD_RANGE.1)
                .contains(&model.update_threshold));
        }
    }

    fn blob_samples(n_per_class: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [[-2.0, 0.0], [2.0, 0.0]];
        let mut samples = Vec::new();
        for i in 0..n_per_class {
            for (c, center) in centers.iter().enumerate() {
                samples.push(feature(
                    vec![
                        center[0] + 0.5 * rng.sample::<f64, _>(StandardNormal),
                        center[1] + 0.5 * rng.sample::<f64, _>(StandardNormal),
                    ],
                    c as u32 + 1,
                    (i * 2 + c) as u32,
                ));
            }
        }
        samples
    }

    #[test]
    fn separable_blobs_learned_compactly() {
        let samples = blob_samples(50, 99);
        let mut model = Srit2nfisModel::new(2, 2, HyperParams::default()).unwrap();
        let report = model.train(&samples, 3).unwrap();
        let eval = model.evaluate(&samples).unwrap();
        assert!(eval.accuracy >= 0.95, "accuracy {}", eval.accuracy);
        assert!(model.n_rules() <= 10, "rules {}", model.n_rules());
        assert_eq!(
            report.grew + report.updated + report.deleted + report.reserved,
            report.add_threshold_trace.len()
        );
        // Every sample fate is one of the four categories per attempt.
        assert_eq!(report.final_rule_count, model.n_rules());

        // Replaying identical data grows nothing further.
        let second = model.train(&samples, 3).unwrap();
        assert_eq!(second.grew, 0, "saturated model must not grow on replay");
    }

    #[test]
    fn single_pass_keeps_reserve_queue_visible() {
        let samples = blob_samples(30, 512);
        let mut model = Srit2nfisModel::new(2, 2, HyperParams::default()).unwrap();
        let report = model.train(&samples, 1).unwrap();
        assert_eq!(report.passes_run, 1);
        assert_eq!(report.reserved_remaining, model.reserve_queue.len());
        assert_eq!(report.reserved, model.reserve_queue.len());
    }

    #[test]
    fn evaluation_counts_and_confusion_shape() {
        let mut model = Srit2nfisModel::new(2, 1, HyperParams::default()).unwrap();
        model.rules.push(rule_at(0, &[-1.0], 0.5, 1, 2));
        model.rules.push(rule_at(1, &[1.0], 0.5, 2, 2));
        let samples = vec![
            feature(vec![-1.0], 1, 0),
            feature(vec![-0.9], 1, 1),
            feature(vec![1.0], 2, 2),
            feature(vec![0.9], 1, 3), // wrong side on purpose
        ];
        let eval = model.evaluate(&samples).unwrap();
        assert_eq!(eval.n_total, 4);
        assert_eq!(eval.n_correct, 3);
        assert_relative_eq!(eval.accuracy, 0.75, epsilon = 1e-15);
        assert_eq!(eval.confusion[0][0], 2);
        assert_eq!(eval.confusion[0][1], 1);
        assert_eq!(eval.confusion[1][1], 1);
        assert_eq!(eval.confusion[1][0], 0);
    }

    #[test]
    fn constant_prediction_scores_chance_on_balanced_set() {
        let mut model = Srit2nfisModel::new(4, 1, HyperParams::default()).unwrap();
        model.rules.push(rule_at(0, &[0.0], 5.0, 3, 4));
        let samples: Vec<FeatureVector> = (0..40)
            .map(|i| feature(vec![(i % 5) as f64 * 0.1], 1 + (i % 4) as u32, i as u32))
            .collect();
        let eval = model.evaluate(&samples).unwrap();
        assert_relative_eq!(eval.accuracy, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn hyperparams_validated_on_construction() {
        let mut bad = HyperParams::default();
        bad.novelty_threshold = 0.7;
        assert!(Srit2nfisModel::new(2, 2, bad).is_err());
        let mut bad = HyperParams::default();
        bad.add_threshold_init = 1.0;
        assert!(Srit2nfisModel::new(2, 2, bad).is_err());
        assert!(Srit2nfisModel::new(1, 2, HyperParams::default()).is_err());
        assert!(Srit2nfisModel::new(2, 0, HyperParams::default()).is_err());
    }
}
