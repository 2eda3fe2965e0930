//! End-to-end tests for the file-driven pipeline: artifact layout,
//! reproducibility, config parsing, reload consistency, and manifest runs.

use std::fs;
use std::path::{Path, PathBuf};

use cspkit::csp::{read_features, read_filter_bank};
use cspkit::dataio::{write_manifest, write_trialset, Manifest, ManifestEntry};
use cspkit::pipeline::{run_manifest, run_pipeline, ClassifierMode, PipelineConfig};
use cspkit::pso::{PsoConfig, TuneOutcome};
use cspkit::srit2nfis::io::read_model;
use cspkit::synth::{generate, SynthSpec};

struct Workspace {
    root: PathBuf,
}

impl Workspace {
    fn new(tag: &str) -> Self {
        let root = std::env::temp_dir().join(format!("cspkit-pipeline-{tag}-{}", std::process::id()));
        if root.exists() {
            fs::remove_dir_all(&root).unwrap();
        }
        fs::create_dir_all(&root).unwrap();
        Workspace { root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.root);
    }
}

/// Writes a small two-class train/test pair and returns their paths.
fn small_dataset(ws: &Workspace, outlier_rate: f64, seed: u64) -> (PathBuf, PathBuf) {
    let train_spec = SynthSpec {
        n_channels: 4,
        n_classes: 2,
        trials_per_class: 12,
        samples_per_trial: 160,
        outlier_rate,
        outlier_gain: 20.0,
        seed,
        ..SynthSpec::default()
    };
    let (train, truth) = generate(&train_spec).unwrap();
    let test_spec = SynthSpec {
        trials_per_class: 6,
        outlier_rate: 0.0,
        mixing: Some(truth.mixing.clone()),
        seed: seed + 1,
        ..train_spec
    };
    let (test, _) = generate(&test_spec).unwrap();
    let train_path = ws.path("train.trials");
    let test_path = ws.path("test.trials");
    write_trialset(&train, &train_path).unwrap();
    write_trialset(&test, &test_path).unwrap();
    (train_path, test_path)
}

fn base_config(train: &Path, test: &Path, out_dir: PathBuf) -> PipelineConfig {
    PipelineConfig {
        train: train.to_path_buf(),
        test: test.to_path_buf(),
        out_dir,
        subject: "it".into(),
        band: None,
        seed: 17,
        ..PipelineConfig::default()
    }
}

fn read_bytes(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

const ARTIFACTS: [&str; 6] =
    ["bank.cspw", "train.cspf", "test.cspf", "model.cspn", "report.json", "report.csv"];

#[test]
fn fixed_mode_artifacts_are_reproducible() {
    let ws = Workspace::new("repro");
    let (train, test) = small_dataset(&ws, 0.0, 40);

    let cfg_a = base_config(&train, &test, ws.path("out-a"));
    let cfg_b = base_config(&train, &test, ws.path("out-b"));
    let report_a = run_pipeline(&cfg_a).unwrap();
    let report_b = run_pipeline(&cfg_b).unwrap();
    report_a.validate().unwrap();

    assert_eq!(report_a.accuracy_pct, report_b.accuracy_pct);
    for name in ARTIFACTS {
        assert_eq!(
            read_bytes(&cfg_a.out_dir, name),
            read_bytes(&cfg_b.out_dir, name),
            "artifact {name} differs between identical runs"
        );
    }

    // Rerunning into an existing directory overwrites in place and stays
    // byte-identical.
    let report_c = run_pipeline(&cfg_a).unwrap();
    assert_eq!(report_a.accuracy_pct, report_c.accuracy_pct);
    for name in ARTIFACTS {
        assert_eq!(read_bytes(&cfg_a.out_dir, name), read_bytes(&cfg_b.out_dir, name));
    }
}

#[test]
fn tuned_mode_emits_search_artifacts() {
    let ws = Workspace::new("tuned");
    let (train, test) = small_dataset(&ws, 0.0, 41);

    let mut cfg = base_config(&train, &test, ws.path("out"));
    cfg.classifier = ClassifierMode::Tuned;
    cfg.pso = PsoConfig { iterations: 3, swarm_size: 3, ..PsoConfig::default() };
    let report = run_pipeline(&cfg).unwrap();
    report.validate().unwrap();

    let tuned = report.tuned.expect("tuned mode must fill the tuning summary");
    assert_eq!(tuned.iterations, 3);

    let outcome: TuneOutcome =
        serde_json::from_slice(&read_bytes(&cfg.out_dir, "best_params.json")).unwrap();
    outcome.params.validate().unwrap();
    assert_eq!(outcome.trace.len(), 3);
    assert_eq!(tuned.validation_accuracy_pct, 100.0 * outcome.accuracy);
    assert_eq!(tuned.params, outcome.params);

    let trace_csv = String::from_utf8(read_bytes(&cfg.out_dir, "pso_trace.csv")).unwrap();
    let mut lines = trace_csv.lines();
    assert_eq!(lines.next(), Some("iteration,best_validation_accuracy"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        let (idx, val) = row.split_once(',').unwrap();
        assert_eq!(idx.parse::<usize>().unwrap(), i + 1);
        assert_eq!(val.parse::<f64>().unwrap(), outcome.trace[i]);
    }
}

#[test]
fn config_file_drives_a_run() {
    let ws = Workspace::new("config");
    let (train, test) = small_dataset(&ws, 0.0, 42);
    let out_dir = ws.path("out");

    let text = format!(
        "# pipeline settings\n\
         train = {}\n\
         test = {}\n\
         out_dir = {}\n\
         subject = S01\n\
         band = none\n\
         window = none\n\
         z_threshold = 3.0\n\
         drop_outliers = yes\n\
         m = 2\n\
         classifier = fixed\n\
         train_passes = 2\n\
         seed = 5\n",
        train.display(),
        test.display(),
        out_dir.display()
    );
    let cfg_path = ws.path("run.conf");
    fs::write(&cfg_path, text).unwrap();

    let cfg = PipelineConfig::from_file(&cfg_path).unwrap();
    assert_eq!(cfg.band, None);
    assert_eq!(cfg.z_threshold, 3.0);
    assert_eq!(cfg.m, 2);
    assert_eq!(cfg.train_passes, 2);
    assert_eq!(cfg.seed, 5);
    cfg.validate().unwrap();

    let report = run_pipeline(&cfg).unwrap();
    report.validate().unwrap();
    assert_eq!(report.subject, "S01");

    // Unknown keys are rejected rather than silently ignored.
    fs::write(&cfg_path, "bogus_key = 1\n").unwrap();
    assert!(PipelineConfig::from_file(&cfg_path).is_err());
}

#[test]
fn saved_artifacts_reload_consistently() {
    let ws = Workspace::new("reload");
    let (train, test) = small_dataset(&ws, 0.0, 43);
    let cfg = base_config(&train, &test, ws.path("out"));
    let report = run_pipeline(&cfg).unwrap();

    let bank = read_filter_bank(&cfg.out_dir.join("bank.cspw")).unwrap();
    bank.validate().unwrap();
    assert_eq!(bank.selected.len(), report.csp.filter_count);

    let (train_feats, n_classes_train) = read_features(&cfg.out_dir.join("train.cspf")).unwrap();
    let (test_feats, n_classes_test) = read_features(&cfg.out_dir.join("test.cspf")).unwrap();
    assert_eq!(n_classes_train, 2);
    assert_eq!(n_classes_test, 2);
    assert_eq!(test_feats.len(), report.n_test_trials);
    assert!(train_feats.iter().all(|f| f.values.len() == bank.selected.len()));

    let model = read_model(&cfg.out_dir.join("model.cspn")).unwrap();
    model.validate().unwrap();
    assert_eq!(model.rules.len(), report.rule_count);

    // Scoring the stored test features with the stored model reproduces the
    // reported accuracy exactly.
    let eval = model.evaluate(&test_feats).unwrap();
    assert_eq!(100.0 * eval.accuracy, report.accuracy_pct);
}

#[test]
fn outlier_drop_toggle_changes_training_features_only() {
    let ws = Workspace::new("outliers");
    let (train, test) = small_dataset(&ws, 0.15, 44);

    let mut keep_cfg = base_config(&train, &test, ws.path("out-keep"));
    keep_cfg.drop_outliers = false;
    let mut drop_cfg = base_config(&train, &test, ws.path("out-drop"));
    drop_cfg.drop_outliers = true;

    let keep = run_pipeline(&keep_cfg).unwrap();
    let drop = run_pipeline(&drop_cfg).unwrap();

    // Detection is independent of the toggle; only the training set reacts.
    assert_eq!(keep.rejected_outlier_ids, drop.rejected_outlier_ids);
    assert!(!keep.rejected_outlier_ids.is_empty(), "gain-20 artifacts must be flagged");
    assert!(!keep.outliers_dropped);
    assert!(drop.outliers_dropped);

    let (kept_feats, _) = read_features(&keep_cfg.out_dir.join("train.cspf")).unwrap();
    let (dropped_feats, _) = read_features(&drop_cfg.out_dir.join("train.cspf")).unwrap();
    assert_eq!(kept_feats.len() - dropped_feats.len(), keep.rejected_outlier_ids.len());

    let (kept_test, _) = read_features(&keep_cfg.out_dir.join("test.cspf")).unwrap();
    let (dropped_test, _) = read_features(&drop_cfg.out_dir.join("test.cspf")).unwrap();
    assert_eq!(kept_test.len(), dropped_test.len());
}

#[test]
fn manifest_run_reports_every_subject() {
    let ws = Workspace::new("manifest");
    let mut subjects = Vec::new();
    for s in 0..2u64 {
        let sub_ws_train = ws.path(&format!("s{s}-train.trials"));
        let sub_ws_test = ws.path(&format!("s{s}-test.trials"));
        let spec = SynthSpec {
            n_channels: 4,
            n_classes: 2,
            trials_per_class: 10,
            samples_per_trial: 160,
            seed: 300 + s,
            ..SynthSpec::default()
        };
        let (train, truth) = generate(&spec).unwrap();
        let (test, _) = generate(&SynthSpec {
            trials_per_class: 5,
            mixing: Some(truth.mixing.clone()),
            seed: 400 + s,
            ..spec
        })
        .unwrap();
        write_trialset(&train, &sub_ws_train).unwrap();
        write_trialset(&test, &sub_ws_test).unwrap();
        subjects.push(ManifestEntry {
            id: format!("S{:02}", s + 1),
            session: None,
            // Relative paths resolve against the manifest's directory.
            train: format!("s{s}-train.trials"),
            test: format!("s{s}-test.trials"),
        });
    }
    let manifest_path = ws.path("subjects.manifest");
    write_manifest(&Manifest { subjects }, &manifest_path).unwrap();

    let mut base = base_config(Path::new("-"), Path::new("-"), ws.path("out"));
    base.seed = 11;
    let (reports, table) = run_manifest(&manifest_path, &base).unwrap();
    assert_eq!(reports.len(), 2);
    for (i, report) in reports.iter().enumerate() {
        report.validate().unwrap();
        assert_eq!(report.subject, format!("S{:02}", i + 1));
    }
    assert_eq!(table.rows.len(), 2);
    assert!(ws.path("out").join("comparison.csv").exists());
    assert!(ws.path("out").join("comparison.json").exists());
    assert!(ws.path("out").join("reports.json").exists());
    assert!(ws.path("out").join("report.csv").exists());

    // Distinct subjects get distinct sub-seeds, so equal data still yields
    // independent artifact directories.
    assert!(ws.path("out").join("S01").join("report.json").exists());
    assert!(ws.path("out").join("S02").join("report.json").exists());
}

#[test]
fn manifest_error_paths() {
    let ws = Workspace::new("manifest-err");
    let base = base_config(Path::new("-"), Path::new("-"), ws.path("out"));

    let empty = ws.path("empty.manifest");
    write_manifest(&Manifest { subjects: Vec::new() }, &empty).unwrap();
    assert!(run_manifest(&empty, &base).is_err());

    let broken = ws.path("broken.manifest");
    write_manifest(
        &Manifest {
            subjects: vec![ManifestEntry {
                id: "S01".into(),
                session: None,
                train: "missing-train.trials".into(),
                test: "missing-test.trials".into(),
            }],
        },
        &broken,
    )
    .unwrap();
    assert!(run_manifest(&broken, &base).is_err());

    assert!(run_manifest(ws.path("no-such.manifest"), &base).is_err());
}
