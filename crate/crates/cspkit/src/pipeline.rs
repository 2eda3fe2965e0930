//! End-to-end evaluation pipeline and its reporting types.
//!
//! A run loads train/test trial files, band-passes and optionally epochs
//! them, rejects artifact trials by covariance-norm z-score, fits spatial
//! filters on the cleaned class averages, extracts log-variance features,
//! trains the classifier (with fixed starting hyperparameters or a swarm
//! search over them), and writes every intermediate artifact plus a JSON and
//! a CSV report. Given the same config and seed, a run is byte-identical:
//! nothing in the artifacts depends on time, machine, or thread count.
//!
//! Stage failures are wrapped with the stage name so a CLI user sees where a
//! run died without losing the underlying cause.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariance::{class_average, detect_outliers};
use crate::csp::ffdiag::FfdiagConfig;
use crate::csp::itfe::MiEstimator;
use crate::csp::{
    csp_two_class, extract_features_set, multiclass_csp, two_class_selection, write_features,
    write_filter_bank, FeatureVector, SpatialFilterBank, DEFAULT_FILTER_PAIRS,
    DEFAULT_MULTICLASS_FILTERS,
};
use crate::dataio::{read_manifest, read_trialset, TrialSet};
use crate::error::{Error, Result};
use crate::preprocess::{design_bandpass, epoch_set, filter_set};
use crate::pso::{tune, PsoConfig, TuneOutcome};
use crate::srit2nfis::{io::write_model, HyperParams, Srit2nfisModel};
use crate::util::derive_seed;

/// How classifier starting hyperparameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierMode {
    /// Use the configured (or default) starting values directly.
    Fixed,
    /// Swarm-search the starting values on a held-out validation split,
    /// then retrain on the full training set with the best found.
    Tuned,
}

impl FromStr for ClassifierMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixed" => Ok(ClassifierMode::Fixed),
            "tune" | "tuned" => Ok(ClassifierMode::Tuned),
            other => Err(Error::InvalidConfig(format!(
                "classifier mode `{other}` is not `fixed` or `tune`"
            ))),
        }
    }
}

/// Fraction of each class's training features held out when tuning.
pub const VALIDATION_FRACTION: f64 = 0.25;

/// Everything a pipeline run needs. Built from a UTF-8 `key = value` config
/// file ([`PipelineConfig::from_file`]) and/or programmatic field edits;
/// unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Training trial file.
    pub train: PathBuf,
    /// Test trial file.
    pub test: PathBuf,
    /// Directory receiving all artifacts; created if absent.
    pub out_dir: PathBuf,
    /// Free-form subject label carried into the report.
    pub subject: String,
    /// Band-pass edges in Hz, or `None` to skip filtering.
    pub band: Option<(f64, f64)>,
    /// Band-pass order (per direction; applied zero-phase).
    pub order: usize,
    /// Epoch window in seconds after filtering, or `None` to keep all samples.
    pub window: Option<(f64, f64)>,
    /// Z-score threshold on covariance Frobenius norms for artifact trials.
    pub z_threshold: f64,
    /// Drop flagged trials from feature extraction and training (the class
    /// averages behind the spatial filters always exclude them).
    pub drop_outliers: bool,
    /// Filter pairs kept per side in the two-class path.
    pub m: usize,
    /// Filters kept in the multiclass path.
    pub k: usize,
    pub ffdiag: FfdiagConfig,
    pub mi_estimator: MiEstimator,
    pub classifier: ClassifierMode,
    /// Starting hyperparameters for `Fixed` mode (and the swarm's particle 0).
    pub hyper: HyperParams,
    /// Swarm settings for `Tuned` mode; its `seed` field is ignored and
    /// replaced by a sub-seed derived from [`PipelineConfig::seed`].
    pub pso: PsoConfig,
    /// Maximum training passes (first pass plus reserve replays).
    pub train_passes: usize,
    /// Root seed; every randomized stage derives its own stream from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: PathBuf::new(),
            test: PathBuf::new(),
            out_dir: PathBuf::new(),
            subject: String::new(),
            band: Some((8.0, 40.0)),
            order: 5,
            window: None,
            z_threshold: 2.5,
            drop_outliers: true,
            m: DEFAULT_FILTER_PAIRS,
            k: DEFAULT_MULTICLASS_FILTERS,
            ffdiag: FfdiagConfig::default(),
            mi_estimator: MiEstimator::default(),
            classifier: ClassifierMode::Fixed,
            hyper: HyperParams::default(),
            pso: PsoConfig::default(),
            train_passes: 3,
            seed: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::InvalidConfig(format!("config key `{key}`: cannot parse `{value}`"))
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "config key `{key}`: expected true/false, got `{value}`"
        ))),
    }
}

/// `LO:HI` pair, or `none` for an absent range.
fn parse_range(key: &str, value: &str) -> Result<Option<(f64, f64)>> {
    let v = value.trim();
    if v.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let (lo, hi) = v.split_once(':').ok_or_else(|| {
        Error::InvalidConfig(format!("config key `{key}`: expected LO:HI or none, got `{value}`"))
    })?;
    Ok(Some((parse_num::<f64>(key, lo)?, parse_num::<f64>(key, hi)?)))
}

impl PipelineConfig {
    /// Applies one `key = value` setting. Unknown keys are errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "train" => self.train = PathBuf::from(value.trim()),
            "test" => self.test = PathBuf::from(value.trim()),
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "subject" => self.subject = value.trim().to_string(),
            "band" => self.band = parse_range(key, value)?,
            "order" => self.order = parse_num(key, value)?,
            "window" => self.window = parse_range(key, value)?,
            "z_threshold" => self.z_threshold = parse_num(key, value)?,
            "drop_outliers" => self.drop_outliers = parse_bool(key, value)?,
            "m" => self.m = parse_num(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "ffdiag_max_iter" => self.ffdiag.max_iter = parse_num(key, value)?,
            "ffdiag_tol" => self.ffdiag.tol = parse_num(key, value)?,
            "mi_estimator" => self.mi_estimator = value.trim().parse()?,
            "classifier" => self.classifier = value.trim().parse()?,
            "add_threshold_init" => self.hyper.add_threshold_init = parse_num(key, value)?,
            "novelty_threshold" => self.hyper.novelty_threshold = parse_num(key, value)?,
            "inter_overlap" => self.hyper.inter_overlap = parse_num(key, value)?,
            "update_threshold_init" => self.hyper.update_threshold_init = parse_num(key, value)?,
            "pso_iterations" => self.pso.iterations = parse_num(key, value)?,
            "pso_swarm_size" => self.pso.swarm_size = parse_num(key, value)?,
            "pso_parameter_width" => self.pso.parameter_width = parse_num(key, value)?,
            "pso_inertia" => self.pso.inertia = parse_num(key, value)?,
            "pso_cognitive" => self.pso.cognitive = parse_num(key, value)?,
            "pso_social" => self.pso.social = parse_num(key, value)?,
            "train_passes" => self.train_passes = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    /// Parses a config file: one `key = value` per line, `#` comments and
    /// blank lines ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::Io)?;
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                reason: format!("line {}: expected `key = value`, got `{line}`", lineno + 1),
            })?;
            cfg.apply(key.trim(), value)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("`train` path is not set".into()));
        }
        if self.test.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("`test` path is not set".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::InvalidConfig("`out_dir` path is not set".into()));
        }
        if let Some((lo, hi)) = self.band {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::InvalidConfig(format!("band {lo}:{hi} needs 0 < LO < HI")));
            }
        }
        if self.order < 1 {
            return Err(Error::InvalidConfig("order must be >= 1".into()));
        }
        if let Some((start, end)) = self.window {
            if !(start >= 0.0 && end > start) {
                return Err(Error::InvalidConfig(format!(
                    "window {start}:{end} needs 0 <= START < END"
                )));
            }
        }
        if !(self.z_threshold > 0.0) || !self.z_threshold.is_finite() {
            return Err(Error::InvalidConfig("z_threshold must be positive and finite".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidConfig("m must be >= 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.ffdiag.max_iter < 1 {
            return Err(Error::InvalidConfig("ffdiag_max_iter must be >= 1".into()));
        }
        if !(self.ffdiag.tol > 0.0) {
            return Err(Error::InvalidConfig("ffdiag_tol must be positive".into()));
        }
        if self.train_passes < 1 {
            return Err(Error::InvalidConfig("train_passes must be >= 1".into()));
        }
        self.hyper.validate()?;
        self.pso.validate()?;
        Ok(())
    }
}

/// One bundled published reference result for comparison display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMethod {
    pub name: String,
    /// Accuracy percent for subjects 1..=9, in order.
    pub per_subject: Vec<f64>,
    /// Published mean accuracy percent.
    pub mean: f64,
}

/// The bundled reference accuracies (percent, subjects 1..=9).
pub fn bundled_references() -> Vec<ReferenceMethod> {
    vec![
        ReferenceMethod {
            name: "mCSP".into(),
            per_subject: vec![48.1, 27.3, 70.6, 21.4, 22.7, 32.4, 52.3, 65.8, 34.2],
            mean: 41.64,
        },
        ReferenceMethod {
            name: "ComplexCSP".into(),
            per_subject: vec![61.5, 32.1, 68.6, 27.1, 34.3, 35.3, 48.0, 65.6, 41.8],
            mean: 46.01,
        },
        ReferenceMethod {
            name: "CSP-SVM".into(),
            per_subject: vec![68.75, 41.67, 66.31, 37.98, 25.0, 36.62, 52.97, 65.55, 64.58],
            mean: 51.04,
        },
        ReferenceMethod {
            name: "CSP-SRIT2NFIS".into(),
            per_subject: vec![74.65, 45.48, 74.31, 39.58, 32.99, 37.9, 54.17, 66.32, 66.31],
            mean: 54.63,
        },
    ]
}

/// Spatial-filter stage diagnostics carried into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspSummary {
    /// `"two-class"` or `"multiclass"`.
    pub mode: String,
    pub converged: bool,
    pub iterations: usize,
    /// Final joint-diagonalization objective; absent on the two-class path,
    /// which diagonalizes exactly.
    pub final_objective: Option<f64>,
    /// Number of filters kept.
    pub filter_count: usize,
}

/// Hyperparameter-search outcome carried into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub params: HyperParams,
    /// Accuracy percent on the held-out validation split.
    pub validation_accuracy_pct: f64,
    pub iterations: usize,
}

/// Everything a pipeline run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub subject: String,
    /// Test accuracy in percent; equals `100 * trace(confusion) / sum`.
    pub accuracy_pct: f64,
    /// Rows indexed by true class, columns by predicted class (1-based).
    pub confusion: Vec<Vec<usize>>,
    pub n_test_trials: usize,
    /// Training trials flagged as artifacts, ascending ids.
    pub rejected_outlier_ids: Vec<u32>,
    /// Whether flagged trials were also excluded from features/training.
    pub outliers_dropped: bool,
    pub rule_count: usize,
    /// Rule-growth threshold after every processed training sample.
    pub add_threshold_trace: Vec<f64>,
    /// Update threshold after every processed training sample.
    pub update_threshold_trace: Vec<f64>,
    pub csp: CspSummary,
    pub tuned: Option<TuneSummary>,
    /// Bundled published accuracies for side-by-side display.
    pub references: Vec<ReferenceMethod>,
}

impl EvaluationReport {
    /// Checks the accuracy/confusion consistency invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.confusion.len();
        if self.confusion.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("confusion matrix is not square".into()));
        }
        let total: usize = self.confusion.iter().flatten().sum();
        let diag: usize = (0..n).map(|i| self.confusion[i][i]).sum();
        if total == 0 {
            return Err(Error::InvalidInput("confusion matrix is empty".into()));
        }
        if total != self.n_test_trials {
            return Err(Error::InvalidInput(format!(
                "confusion counts {total} but report says {} test trials",
                self.n_test_trials
            )));
        }
        let expect = 100.0 * diag as f64 / total as f64;
        if (self.accuracy_pct - expect).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "accuracy {} disagrees with confusion-derived {expect}",
                self.accuracy_pct
            )));
        }
        Ok(())
    }
}

/// Summary CSV over one or more reports: one row per subject.
pub fn reports_to_csv(reports: &[EvaluationReport]) -> String {
    let mut out =
        String::from("subject,accuracy_pct,n_test_trials,rule_count,n_rejected_outliers\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.subject,
            r.accuracy_pct,
            r.n_test_trials,
            r.rule_count,
            r.rejected_outlier_ids.len()
        ));
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::Io).map_err(|e| e.at_stage("persist"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))?;
    write_text(path, &(text + "\n"))
}

/// Splits features into (train, validation): per class, the last quarter of
/// its samples — at least one when the class has two or more — is held out.
/// Input order is preserved on both sides.
pub fn validation_split(
    features: &[FeatureVector],
) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    if features.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty feature set".into()));
    }
    let max_label = features.iter().map(|f| f.label).max().unwrap_or(0);
    let mut hold = vec![false; features.len()];
    for class in 1..=max_label {
        let idx: Vec<usize> =
            (0..features.len()).filter(|&i| features[i].label == class).collect();
        let n = idx.len();
        if n < 2 {
            continue;
        }
        let n_val = ((n as f64 * VALIDATION_FRACTION) as usize).max(1);
        for &i in &idx[n - n_val..] {
            hold[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, f) in features.iter().enumerate() {
        if hold[i] {
            val.push(f.clone());
        } else {
            train.push(f.clone());
        }
    }
    if val.is_empty() || train.is_empty() {
        return Err(Error::InvalidInput(
            "not enough samples per class to hold out a validation split".into(),
        ));
    }
    Ok((train, val))
}

fn subset_without(set: &TrialSet, mask: &[bool]) -> TrialSet {
    TrialSet {
        n_classes: set.n_classes,
        fs: set.fs,
        trials: set
            .trials
            .iter()
            .enumerate()
            .filter(|(i, _)| !mask[*i])
            .map(|(_, t)| t.clone())
            .collect(),
    }
}

/// Runs the full pipeline and writes all artifacts into `cfg.out_dir`:
/// `bank.cspw`, `train.cspf`, `test.cspf`, `model.cspn`, `report.json`,
/// `report.csv`, and — when tuning — `best_params.json` and `pso_trace.csv`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(Error::Io).map_err(|e| e.at_stage("persist"))?;

    let mut train = read_trialset(&cfg.train).map_err(|e| e.at_stage("load-train"))?;
    train.validate_for_training().map_err(|e| e.at_stage("load-train"))?;
    let mut test = read_trialset(&cfg.test).map_err(|e| e.at_stage("load-test"))?;
    test.validate().map_err(|e| e.at_stage("load-test"))?;
    if test.n_classes != train.n_classes {
        return Err(Error::InvalidInput(format!(
            "train has {} classes but test has {}",
            train.n_classes, test.n_classes
        ))
        .at_stage("load-test"));
    }
    if test.fs != train.fs {
        return Err(Error::FsMismatch { expected: train.fs, got: test.fs }
            .at_stage("load-test"));
    }

    if let Some((lo, hi)) = cfg.band {
        let filt =
            design_bandpass(cfg.order, lo, hi, train.fs).map_err(|e| e.at_stage("band-filter"))?;
        train = filter_set(&train, &filt, true).map_err(|e| e.at_stage("band-filter"))?;
        test = filter_set(&test, &filt, true).map_err(|e| e.at_stage("band-filter"))?;
    }
    if let Some((start, end)) = cfg.window {
        train = epoch_set(&train, start, end).map_err(|e| e.at_stage("epoch"))?;
        test = epoch_set(&test, start, end).map_err(|e| e.at_stage("epoch"))?;
    }

    let mask =
        detect_outliers(&train, cfg.z_threshold).map_err(|e| e.at_stage("artifact-detect"))?;
    let mut rejected: Vec<u32> = train
        .trials
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(t, _)| t.id)
        .collect();
    rejected.sort_unstable();

    let ccs = class_average(&train, &mask).map_err(|e| e.at_stage("covariance"))?;
    let working = if cfg.drop_outliers { subset_without(&train, &mask) } else { train.clone() };
    working.validate_for_training().map_err(|e| e.at_stage("artifact-detect"))?;

    let (bank, csp_summary): (SpatialFilterBank, CspSummary) = if train.n_classes == 2 {
        let mut bank = csp_two_class(&ccs.per_class[0].covariance, &ccs.per_class[1].covariance)
            .map_err(|e| e.at_stage("csp"))?;
        bank.selected =
            two_class_selection(bank.n_filters(), cfg.m).map_err(|e| e.at_stage("csp"))?;
        bank.validate().map_err(|e| e.at_stage("csp"))?;
        let filter_count = bank.selected.len();
        (
            bank,
            CspSummary {
                mode: "two-class".into(),
                converged: true,
                iterations: 0,
                final_objective: None,
                filter_count,
            },
        )
    } else {
        let res = multiclass_csp(&ccs, &working, cfg.k, cfg.mi_estimator, cfg.ffdiag)
            .map_err(|e| e.at_stage("csp"))?;
        let summary = CspSummary {
            mode: "multiclass".into(),
            converged: res.converged,
            iterations: res.iterations,
            final_objective: Some(res.final_objective),
            filter_count: res.bank.selected.len(),
        };
        (res.bank, summary)
    };
    write_filter_bank(&cfg.out_dir.join("bank.cspw"), &bank)
        .map_err(|e| e.at_stage("persist"))?;

    let train_features = extract_features_set(&working, &bank.w, &bank.selected)
        .map_err(|e| e.at_stage("features"))?;
    let test_features = extract_features_set(&test, &bank.w, &bank.selected)
        .map_err(|e| e.at_stage("features"))?;
    write_features(&cfg.out_dir.join("train.cspf"), &train_features, working.n_classes)
        .map_err(|e| e.at_stage("persist"))?;
    write_features(&cfg.out_dir.join("test.cspf"), &test_features, test.n_classes)
        .map_err(|e| e.at_stage("persist"))?;

    let (params, tuned) = match cfg.classifier {
        ClassifierMode::Fixed => (cfg.hyper, None),
        ClassifierMode::Tuned => {
            let (tr, val) = validation_split(&train_features).map_err(|e| e.at_stage("tune"))?;
            let pso_cfg = PsoConfig { seed: derive_seed(cfg.seed, "pso"), ..cfg.pso };
            let outcome: TuneOutcome =
                tune(&tr, &val, &pso_cfg).map_err(|e| e.at_stage("tune"))?;
            write_json(&cfg.out_dir.join("best_params.json"), &outcome)?;
            let mut trace_csv = String::from("iteration,best_validation_accuracy\n");
            for (i, v) in outcome.trace.iter().enumerate() {
                trace_csv.push_str(&format!("{},{}\n", i + 1, v));
            }
            write_text(&cfg.out_dir.join("pso_trace.csv"), &trace_csv)?;
            let summary = TuneSummary {
                params: outcome.params,
                validation_accuracy_pct: 100.0 * outcome.accuracy,
                iterations: pso_cfg.iterations,
            };
            (outcome.params, Some(summary))
        }
    };

    let mut model = Srit2nfisModel::new(train.n_classes, bank.selected.len(), params)
        .map_err(|e| e.at_stage("train"))?;
    let train_report =
        model.train(&train_features, cfg.train_passes).map_err(|e| e.at_stage("train"))?;
    write_model(&cfg.out_dir.join("model.cspn"), &model).map_err(|e| e.at_stage("persist"))?;

    let evaluation = model.evaluate(&test_features).map_err(|e| e.at_stage("evaluate"))?;

    let report = EvaluationReport {
        subject: cfg.subject.clone(),
        accuracy_pct: 100.0 * evaluation.accuracy,
        confusion: evaluation.confusion,
        n_test_trials: evaluation.n_total,
        rejected_outlier_ids: rejected,
        outliers_dropped: cfg.drop_outliers,
        rule_count: model.rules.len(),
        add_threshold_trace: train_report.add_threshold_trace,
        update_threshold_trace: train_report.update_threshold_trace,
        csp: csp_summary,
        tuned,
        references: bundled_references(),
    };
    report.validate()?;
    write_json(&cfg.out_dir.join("report.json"), &report)?;
    write_text(&cfg.out_dir.join("report.csv"), &reports_to_csv(std::slice::from_ref(&report)))?;
    Ok(report)
}

/// Extracts a subject index 1..=9 from a label like `A03`, `subject-7`, `9`.
pub fn parse_subject_index(subject: &str) -> Option<usize> {
    let digits: String = subject.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    match digits.parse::<usize>() {
        Ok(n) if (1..=9).contains(&n) => Some(n),
        _ => None,
    }
}

/// One row of a side-by-side comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub subject: String,
    /// Index 1..=9 when the subject label names a bundled reference column.
    pub subject_index: Option<usize>,
    pub measured_pct: f64,
    /// Reference accuracy per bundled method; `None` when the subject has no
    /// reference row.
    pub reference_pct: Vec<Option<f64>>,
}

/// Side-by-side comparison of measured accuracies against the bundled
/// reference results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub methods: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    /// Mean of the measured accuracies; absent for an empty table.
    pub measured_mean: Option<f64>,
    /// Published means of the bundled methods.
    pub reference_means: Vec<f64>,
}

impl ComparisonTable {
    /// CSV: header, one row per subject, and — when rows exist — a final
    /// `mean` row with the measured mean and the published means.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject,measured_pct");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
            out.push_str("_pct");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.subject, row.measured_pct));
            for r in &row.reference_pct {
                match r {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        if let Some(mean) = self.measured_mean {
            out.push_str(&format!("mean,{mean}"));
            for v in &self.reference_means {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the comparison table for a set of per-subject reports.
pub fn compare_report(reports: &[EvaluationReport]) -> ComparisonTable {
    let refs = bundled_references();
    let methods: Vec<String> = refs.iter().map(|r| r.name.clone()).collect();
    let reference_means: Vec<f64> = refs.iter().map(|r| r.mean).collect();
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|rep| {
            let idx = parse_subject_index(&rep.subject);
            let reference_pct = refs
                .iter()
                .map(|m| idx.map(|i| m.per_subject[i - 1]))
                .collect();
            ComparisonRow {
                subject: rep.subject.clone(),
                subject_index: idx,
                measured_pct: rep.accuracy_pct,
                reference_pct,
            }
        })
        .collect();
    let measured_mean = if rows.is_empty() {
        None
    } else {
        Some(rows.iter().map(|r| r.measured_pct).sum::<f64>() / rows.len() as f64)
    };
    ComparisonTable { methods, rows, measured_mean, reference_means }
}

fn resolve_relative(base: &Path, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

fn sanitize_component(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() {
        "subject".into()
    } else {
        cleaned
    }
}

/// Runs the pipeline once per manifest subject (paths resolved relative to
/// the manifest file), writing per-subject artifacts under
/// `<out_dir>/<subject>/`, then `comparison.csv`, `comparison.json`, and the
/// combined `reports.json` in `out_dir`. Each subject gets its own derived
/// seed, so adding or reordering subjects does not change the others'
/// results.
pub fn run_manifest(
    manifest_path: impl AsRef<Path>,
    base: &PipelineConfig,
) -> Result<(Vec<EvaluationReport>, ComparisonTable)> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    if manifest.subjects.is_empty() {
        return Err(Error::InvalidInput("manifest lists no subjects".into()));
    }
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut reports = Vec::with_capacity(manifest.subjects.len());
    for entry in &manifest.subjects {
        let mut cfg = base.clone();
        cfg.subject = entry.id.clone();
        cfg.train = resolve_relative(manifest_dir, &entry.train);
        cfg.test = resolve_relative(manifest_dir, &entry.test);
        cfg.out_dir = base.out_dir.join(sanitize_component(&entry.id));
        cfg.seed = derive_seed(base.seed, &format!("subject-{}", entry.id));
        reports.push(run_pipeline(&cfg)?);
    }
    let table = compare_report(&reports);
    fs::create_dir_all(&base.out_dir).map_err(Error::Io).map_err(|e| e.at_stage("persist"))?;
    write_text(&base.out_dir.join("comparison.csv"), &table.to_csv())?;
    write_json(&base.out_dir.join("comparison.json"), &table)?;
    write_json(&base.out_dir.join("reports.json"), &reports)?;
    write_text(&base.out_dir.join("report.csv"), &reports_to_csv(&reports))?;
    Ok((reports, table))
}
