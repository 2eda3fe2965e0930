//! `cspkit` — command-line driver for the spatial-filter + neuro-fuzzy
//! classification pipeline. Every stage is its own subcommand so artifacts
//! can be produced, inspected, and consumed independently; `run` chains them
//! end to end.
//!
//! Exit codes: 0 success, 1 invalid input/config, 2 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cspkit::covariance::{class_average, detect_outliers};
use cspkit::csp::ffdiag::FfdiagConfig;
use cspkit::csp::itfe::MiEstimator;
use cspkit::csp::{
    csp_two_class, extract_features_set, multiclass_csp, read_features, read_filter_bank,
    two_class_selection, write_features, write_filter_bank,
};
use cspkit::dataio::{read_trialset, write_trialset, TrialSet};
use cspkit::error::{Error, Result};
use cspkit::pipeline::{
    compare_report, run_manifest, run_pipeline, validation_split, EvaluationReport,
    PipelineConfig,
};
use cspkit::preprocess::{design_bandpass, epoch_set, filter_set};
use cspkit::pso::{sweep, tune, PsoConfig};
use cspkit::srit2nfis::io::{read_model, write_model};
use cspkit::srit2nfis::{HyperParams, Srit2nfisModel};
use cspkit::synth::{generate, read_ground_truth, write_ground_truth, SynthSpec};

#[derive(Parser)]
#[command(
    name = "cspkit",
    version,
    about = "Spatial-filter feature extraction and evolving neuro-fuzzy classification for multi-channel trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trial set with known ground truth.
    Synth(SynthArgs),
    /// Band-pass filter and/or epoch a trial set.
    Filter(FilterArgs),
    /// Detect covariance-norm artifact trials; optionally write a cleaned set.
    Covariance(CovarianceArgs),
    /// Fit spatial filters from a trial set and save the filter bank.
    Csp(CspArgs),
    /// Extract log-variance features with a saved filter bank.
    Features(FeaturesArgs),
    /// Train the classifier on a feature file.
    Train(TrainArgs),
    /// Swarm-search classifier hyperparameters on a validation split.
    Tune(TuneArgs),
    /// Evaluate a saved model on a feature file.
    Evaluate(EvaluateArgs),
    /// Run the full pipeline (single subject or manifest).
    Run(RunArgs),
    /// Compare evaluation reports against the bundled reference accuracies.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output trial file.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth sidecar path (default: <out>.truth.json).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 22)]
    channels: usize,
    #[arg(long, default_value_t = 4)]
    classes: u32,
    #[arg(long, default_value_t = 72)]
    trials_per_class: usize,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 250.0)]
    fs: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_variance: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_rate: f64,
    #[arg(long, default_value_t = 20.0)]
    outlier_gain: f64,
    /// Variance of the class-aligned source (others stay at 1).
    #[arg(long, default_value_t = 4.0)]
    elevated_variance: f64,
    /// Band-limit sources to 8-30 Hz.
    #[arg(long)]
    band_limited: bool,
    /// Reuse the mixing matrix from another set's ground-truth sidecar, so
    /// two generated sets share source geometry (e.g. a train/test pair).
    #[arg(long)]
    mixing_from: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Band edges LOW:HIGH in Hz, or `none` to skip filtering.
    #[arg(long, default_value = "8:40")]
    band: String,
    #[arg(long, default_value_t = 5)]
    order: usize,
    /// Epoch window START:END in seconds, or `none` to keep all samples.
    #[arg(long, default_value = "none")]
    window: String,
    /// Forward-only filtering instead of the zero-phase default.
    #[arg(long)]
    causal: bool,
}

#[derive(Args)]
struct CovarianceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2.5)]
    z_threshold: f64,
    /// Write the artifact report JSON here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the input minus flagged trials.
    #[arg(long)]
    drop_outliers: bool,
    /// Cleaned-set path for --drop-outliers (default: <input>.clean.cspk).
    #[arg(long)]
    cleaned: Option<PathBuf>,
}

#[derive(Args)]
struct CspArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output filter-bank file.
    #[arg(long)]
    out_bank: PathBuf,
    /// Filters kept in the multiclass path.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Filter pairs kept per side in the two-class path.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    ffdiag_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    ffdiag_tol: f64,
    /// gaussian | histogram
    #[arg(long, default_value = "gaussian")]
    mi_estimator: String,
    #[arg(long, default_value_t = 2.5)]
    z_threshold: f64,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training feature file.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long, default_value_t = 3)]
    passes: usize,
    #[arg(long, default_value_t = HyperParams::default().add_threshold_init)]
    add_threshold: f64,
    #[arg(long, default_value_t = HyperParams::default().novelty_threshold)]
    novelty_threshold: f64,
    #[arg(long, default_value_t = HyperParams::default().inter_overlap)]
    inter_overlap: f64,
    #[arg(long, default_value_t = HyperParams::default().update_threshold_init)]
    update_threshold: f64,
    /// Write the training report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Training feature file.
    #[arg(long)]
    train: PathBuf,
    /// Validation feature file; omitted = stratified hold-out from --train.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long, default_value_t = PsoConfig::default().iterations)]
    pso_iters: usize,
    #[arg(long, default_value_t = PsoConfig::default().parameter_width)]
    pso_width: f64,
    #[arg(long, default_value_t = PsoConfig::default().swarm_size)]
    pso_swarm: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "best_params.json")]
    out_params: PathBuf,
    #[arg(long, default_value = "pso_trace.csv")]
    out_trace: PathBuf,
    /// Comma-separated widths for a sensitivity sweep (with --sweep-iters).
    #[arg(long)]
    sweep_widths: Option<String>,
    /// Comma-separated iteration counts for the sweep.
    #[arg(long)]
    sweep_iters: Option<String>,
    /// Sweep CSV path (default: sweep.csv next to --out-trace).
    #[arg(long)]
    out_sweep: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Feature file to score.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Write the evaluation JSON here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run every subject of this manifest instead of a single train/test pair.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    subject: Option<String>,
    /// LOW:HIGH in Hz, or `none`.
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    /// START:END in seconds, or `none`.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    z_threshold: Option<f64>,
    /// Exclude flagged artifact trials from features and training (default).
    #[arg(long)]
    drop_outliers: bool,
    /// Keep flagged artifact trials in features and training.
    #[arg(long, conflicts_with = "drop_outliers")]
    keep_outliers: bool,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ffdiag_iters: Option<usize>,
    #[arg(long)]
    ffdiag_tol: Option<f64>,
    /// gaussian | histogram
    #[arg(long)]
    mi_estimator: Option<String>,
    /// fixed | tune
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    pso_iters: Option<usize>,
    #[arg(long)]
    pso_width: Option<f64>,
    #[arg(long)]
    pso_swarm: Option<usize>,
    #[arg(long)]
    train_passes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Report JSON files (single report or array each).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write the comparison CSV here (always printed to stdout too).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(flag: &str, value: &str) -> Result<Option<(f64, f64)>> {
    let v = value.trim();
    if v.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let (lo, hi) = v.split_once(':').ok_or_else(|| {
        Error::InvalidConfig(format!("--{flag}: expected LO:HI or none, got `{value}`"))
    })?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("--{flag}: bad number `{lo}`")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("--{flag}: bad number `{hi}`")))?;
    Ok(Some((lo, hi)))
}

fn write_json_to<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(Error::Io)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mixing = match &a.mixing_from {
        Some(path) => Some(read_ground_truth(path)?.mixing),
        None => None,
    };
    let spec = SynthSpec {
        mixing,
        n_channels: a.channels,
        n_classes: a.classes,
        trials_per_class: a.trials_per_class,
        samples_per_trial: a.samples,
        fs: a.fs,
        noise_variance: a.noise_variance,
        outlier_rate: a.outlier_rate,
        outlier_gain: a.outlier_gain,
        elevated_variance: a.elevated_variance,
        band_limited: a.band_limited,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let (set, truth) = generate(&spec)?;
    cspkit::dataio::write_trialset(&set, &a.out)?;
    let truth_path = a
        .truth
        .unwrap_or_else(|| PathBuf::from(format!("{}.truth.json", a.out.display())));
    write_ground_truth(&truth, &truth_path)?;
    println!(
        "wrote {} trials ({} classes, {} channels) to {}; ground truth at {}",
        set.trials.len(),
        set.n_classes,
        a.channels,
        a.out.display(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_filter(a: FilterArgs) -> Result<()> {
    let mut set = read_trialset(&a.input)?;
    set.validate()?;
    if let Some((lo, hi)) = parse_pair("band", &a.band)? {
        let spec = design_bandpass(a.order, lo, hi, set.fs)?;
        set = filter_set(&set, &spec, !a.causal)?;
    }
    if let Some((start, end)) = parse_pair("window", &a.window)? {
        set = epoch_set(&set, start, end)?;
    }
    write_trialset(&set, &a.output)?;
    println!("wrote {} filtered trials to {}", set.trials.len(), a.output.display());
    Ok(())
}

#[derive(Serialize)]
struct ClassArtifactReport {
    class: u32,
    n_trials: usize,
    n_rejected: usize,
    rejected_ids: Vec<u32>,
}

#[derive(Serialize)]
struct ArtifactReport {
    z_threshold: f64,
    n_trials: usize,
    n_rejected: usize,
    per_class: Vec<ClassArtifactReport>,
}

fn cmd_covariance(a: CovarianceArgs) -> Result<()> {
    let set = read_trialset(&a.input)?;
    set.validate()?;
    let mask = detect_outliers(&set, a.z_threshold)?;
    let mut per_class = Vec::new();
    for class in 1..=set.n_classes {
        let mut rejected_ids = Vec::new();
        let mut n_trials = 0usize;
        for (t, &m) in set.trials.iter().zip(&mask) {
            if t.label != class {
                continue;
            }
            n_trials += 1;
            if m {
                rejected_ids.push(t.id);
            }
        }
        rejected_ids.sort_unstable();
        per_class.push(ClassArtifactReport {
            class,
            n_trials,
            n_rejected: rejected_ids.len(),
            rejected_ids,
        });
    }
    let report = ArtifactReport {
        z_threshold: a.z_threshold,
        n_trials: set.trials.len(),
        n_rejected: mask.iter().filter(|&&m| m).count(),
        per_class,
    };
    match &a.report {
        Some(path) => write_json_to(path, &report)?,
        None => print_json(&report)?,
    }
    if a.drop_outliers || a.cleaned.is_some() {
        let cleaned = TrialSet {
            n_classes: set.n_classes,
            fs: set.fs,
            trials: set
                .trials
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| !m)
                .map(|(t, _)| t.clone())
                .collect(),
        };
        cleaned.validate_for_training()?;
        let path = a
            .cleaned
            .unwrap_or_else(|| PathBuf::from(format!("{}.clean.cspk", a.input.display())));
        write_trialset(&cleaned, &path)?;
        println!("wrote {} retained trials to {}", cleaned.trials.len(), path.display());
    }
    Ok(())
}

fn cmd_csp(a: CspArgs) -> Result<()> {
    let set = read_trialset(&a.input)?;
    set.validate_for_training()?;
    let mask = detect_outliers(&set, a.z_threshold)?;
    let ccs = class_average(&set, &mask)?;
    let estimator: MiEstimator = a.mi_estimator.parse()?;
    let config = FfdiagConfig { max_iter: a.ffdiag_iters, tol: a.ffdiag_tol };
    if set.n_classes == 2 {
        let mut bank = csp_two_class(&ccs.per_class[0].covariance, &ccs.per_class[1].covariance)?;
        bank.selected = two_class_selection(bank.n_filters(), a.m)?;
        bank.validate()?;
        write_filter_bank(&a.out_bank, &bank)?;
        println!(
            "two-class bank: {} filters, {} selected -> {}",
            bank.n_filters(),
            bank.selected.len(),
            a.out_bank.display()
        );
    } else {
        let res = multiclass_csp(&ccs, &set, a.k, estimator, config)?;
        write_filter_bank(&a.out_bank, &res.bank)?;
        println!(
            "multiclass bank: {} filters, {} selected, converged={} after {} iterations (objective {:.3e}) -> {}",
            res.bank.n_filters(),
            res.bank.selected.len(),
            res.converged,
            res.iterations,
            res.final_objective,
            a.out_bank.display()
        );
    }
    Ok(())
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let set = read_trialset(&a.input)?;
    set.validate()?;
    let bank = read_filter_bank(&a.bank)?;
    let features = extract_features_set(&set, &bank.w, &bank.selected)?;
    write_features(&a.out, &features, set.n_classes)?;
    println!(
        "wrote {} feature vectors ({} dims) to {}",
        features.len(),
        bank.selected.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let (features, n_classes) = read_features(&a.features)?;
    let dim = features
        .first()
        .map(|f| f.values.len())
        .ok_or_else(|| Error::InvalidInput("feature file is empty".into()))?;
    let hyper = HyperParams {
        add_threshold_init: a.add_threshold,
        novelty_threshold: a.novelty_threshold,
        inter_overlap: a.inter_overlap,
        update_threshold_init: a.update_threshold,
    };
    let mut model = Srit2nfisModel::new(n_classes, dim, hyper)?;
    let report = model.train(&features, a.passes)?;
    write_model(&a.out_model, &model)?;
    if let Some(path) = &a.report {
        write_json_to(path, &report)?;
    }
    println!(
        "trained on {} samples: {} rules after {} passes -> {}",
        features.len(),
        report.final_rule_count,
        report.passes_run,
        a.out_model.display()
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("--{flag}: bad entry `{p}`")))
        })
        .collect()
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    let (train_all, _) = read_features(&a.train)?;
    let (train_part, val_part) = match &a.val {
        Some(path) => {
            let (val, _) = read_features(path)?;
            (train_all, val)
        }
        None => validation_split(&train_all)?,
    };
    let cfg = PsoConfig {
        iterations: a.pso_iters,
        swarm_size: a.pso_swarm,
        parameter_width: a.pso_width,
        seed: a.seed,
        ..PsoConfig::default()
    };
    let outcome = tune(&train_part, &val_part, &cfg)?;
    write_json_to(&a.out_params, &outcome)?;
    let mut trace = String::from("iteration,best_validation_accuracy\n");
    for (i, v) in outcome.trace.iter().enumerate() {
        trace.push_str(&format!("{},{}\n", i + 1, v));
    }
    std::fs::write(&a.out_trace, trace).map_err(Error::Io)?;
    println!(
        "best validation accuracy {:.4} -> {} (trace: {})",
        outcome.accuracy,
        a.out_params.display(),
        a.out_trace.display()
    );
    if let (Some(w), Some(it)) = (&a.sweep_widths, &a.sweep_iters) {
        let widths: Vec<f64> = parse_list("sweep-widths", w)?;
        let iters: Vec<usize> = parse_list("sweep-iters", it)?;
        let grid = sweep(&train_part, &val_part, &widths, &iters, &cfg)?;
        let path = a.out_sweep.unwrap_or_else(|| PathBuf::from("sweep.csv"));
        std::fs::write(&path, grid.to_csv()).map_err(Error::Io)?;
        println!("sweep grid ({} cells) -> {}", grid.cells.len(), path.display());
    } else if a.sweep_widths.is_some() != a.sweep_iters.is_some() {
        return Err(Error::InvalidConfig(
            "--sweep-widths and --sweep-iters must be given together".into(),
        ));
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let (features, _) = read_features(&a.features)?;
    let evaluation = model.evaluate(&features)?;
    match &a.report {
        Some(path) => write_json_to(path, &evaluation)?,
        None => print_json(&evaluation)?,
    }
    println!(
        "accuracy {:.4} ({}/{} correct)",
        evaluation.accuracy, evaluation.n_correct, evaluation.n_total
    );
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = a.train {
        cfg.train = v;
    }
    if let Some(v) = a.test {
        cfg.test = v;
    }
    if let Some(v) = a.out_dir {
        cfg.out_dir = v;
    }
    if let Some(v) = a.subject {
        cfg.subject = v;
    }
    if let Some(v) = &a.band {
        cfg.apply("band", v)?;
    }
    if let Some(v) = a.order {
        cfg.order = v;
    }
    if let Some(v) = &a.window {
        cfg.apply("window", v)?;
    }
    if let Some(v) = a.z_threshold {
        cfg.z_threshold = v;
    }
    if a.drop_outliers {
        cfg.drop_outliers = true;
    }
    if a.keep_outliers {
        cfg.drop_outliers = false;
    }
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.ffdiag_iters {
        cfg.ffdiag.max_iter = v;
    }
    if let Some(v) = a.ffdiag_tol {
        cfg.ffdiag.tol = v;
    }
    if let Some(v) = &a.mi_estimator {
        cfg.mi_estimator = v.parse()?;
    }
    if let Some(v) = &a.classifier {
        cfg.classifier = v.parse()?;
    }
    if let Some(v) = a.pso_iters {
        cfg.pso.iterations = v;
    }
    if let Some(v) = a.pso_width {
        cfg.pso.parameter_width = v;
    }
    if let Some(v) = a.pso_swarm {
        cfg.pso.swarm_size = v;
    }
    if let Some(v) = a.train_passes {
        cfg.train_passes = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }

    match &a.manifest {
        Some(manifest) => {
            if cfg.out_dir.as_os_str().is_empty() {
                return Err(Error::InvalidConfig("`out_dir` path is not set".into()));
            }
            // Manifest entries supply train/test; placeholders satisfy the
            // per-subject validation until they are overwritten.
            let (reports, table) = run_manifest(manifest, &cfg)?;
            print!("{}", table.to_csv());
            println!(
                "ran {} subjects; artifacts under {}",
                reports.len(),
                cfg.out_dir.display()
            );
        }
        None => {
            let report = run_pipeline(&cfg)?;
            println!(
                "subject `{}`: accuracy {:.2}% on {} test trials ({} rules, {} artifacts rejected); report at {}",
                report.subject,
                report.accuracy_pct,
                report.n_test_trials,
                report.rule_count,
                report.rejected_outlier_ids.len(),
                cfg.out_dir.join("report.json").display()
            );
        }
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mut reports: Vec<EvaluationReport> = Vec::new();
    for path in &a.reports {
        let text = std::fs::read_to_string(path).map_err(Error::Io)?;
        if let Ok(many) = serde_json::from_str::<Vec<EvaluationReport>>(&text) {
            reports.extend(many);
        } else {
            let one: EvaluationReport =
                serde_json::from_str(&text).map_err(|e| Error::Format {
                    path: path.display().to_string(),
                    reason: format!("not an evaluation report: {e}"),
                })?;
            reports.push(one);
        }
    }
    for r in &reports {
        r.validate()?;
    }
    let table = compare_report(&reports);
    let csv = table.to_csv();
    print!("{csv}");
    if let Some(out) = &a.out {
        std::fs::write(out, &csv).map_err(Error::Io)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Filter(a) => cmd_filter(a),
        Command::Covariance(a) => cmd_covariance(a),
        Command::Csp(a) => cmd_csp(a),
        Command::Features(a) => cmd_features(a),
        Command::Train(a) => cmd_train(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
