//! Minimal library walkthrough: synthesize trials, screen artifacts, fit
//! multiclass spatial filters, extract features, train and score the
//! classifier. Mirrors the README's library example, plus data generation.

use cspkit::covariance::{class_average, detect_outliers};
use cspkit::csp::ffdiag::FfdiagConfig;
use cspkit::csp::itfe::MiEstimator;
use cspkit::csp::{extract_features_set, multiclass_csp};
use cspkit::srit2nfis::{HyperParams, Srit2nfisModel};
use cspkit::synth::{generate, SynthSpec};

fn main() -> cspkit::Result<()> {
    let spec = SynthSpec {
        n_channels: 8,
        n_classes: 4,
        trials_per_class: 48,
        samples_per_trial: 250,
        noise_variance: 0.01,
        outlier_rate: 0.05,
        elevated_variance: 8.0,
        seed: 42,
        ..SynthSpec::default()
    };
    let (set, truth) = generate(&spec)?;
    let (test, _) = generate(&SynthSpec {
        trials_per_class: 8,
        outlier_rate: 0.0,
        mixing: Some(truth.mixing.clone()),
        seed: 43,
        ..spec
    })?;

    let flags = detect_outliers(&set, 2.5)?;
    let averages = class_average(&set, &flags)?;
    let csp = multiclass_csp(&averages, &set, 6,
                             MiEstimator::default(), FfdiagConfig::default())?;
    let features = extract_features_set(&set, &csp.bank.w, &csp.bank.selected)?;

    let mut model = Srit2nfisModel::new(set.n_classes, csp.bank.selected.len(),
                                        HyperParams::default())?;
    let report = model.train(&features, 3)?;
    println!("{} rules, {} passes", model.n_rules(), report.passes_run);

    let test_features = extract_features_set(&test, &csp.bank.w, &csp.bank.selected)?;
    let eval = model.evaluate(&test_features)?;
    println!("test accuracy {:.1}%", 100.0 * eval.accuracy);
    Ok(())
}
