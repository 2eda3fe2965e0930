//! Information-theoretic filter scoring: per-filter mutual information
//! between the scalar log-variance feature and the class label, plus
//! error-probability bounds derived from that information.
//!
//! Two estimators are provided. The primary one fits a Gaussian to each
//! class's feature values and computes I = H(mixture) - sum_c p_c H(class c),
//! with the mixture entropy integrated by a 512-point trapezoid rule over
//! +-6 mixture standard deviations. The secondary one is a 16-bin
//! equal-width histogram plug-in estimate, kept as a cross-check.
//! Both report in bits. A feature with (numerically) zero spread carries no
//! information and scores 0 rather than erroring.

use std::str::FromStr;

use crate::csp::FeatureVector;
use crate::error::{Error, Result};
use crate::par;

/// Strategy for estimating the feature/label mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MiEstimator {
    #[default]
    Gaussian,
    Histogram,
}

impl FromStr for MiEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MiEstimator::Gaussian),
            "histogram" => Ok(MiEstimator::Histogram),
            other => Err(Error::InvalidConfig(format!(
                "unknown mi estimator '{other}' (expected gaussian or histogram)"
            ))),
        }
    }
}

impl MiEstimator {
    pub fn name(self) -> &'static str {
        match self {
            MiEstimator::Gaussian => "gaussian",
            MiEstimator::Histogram => "histogram",
        }
    }
}

/// Error-probability bounds computed from a mutual information value.
/// The lower bound comes from an information inequality, the upper bound
/// from an exponential one; after clamping to [0, 1] neither implies the
/// other, so both are reported.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FanoBounds {
    pub lower: f64,
    pub upper: f64,
}

const QUADRATURE_POINTS: usize = 512;
const QUADRATURE_HALF_WIDTH: f64 = 6.0;
const HISTOGRAM_BINS: usize = 16;
/// Pooled variance at or below this is treated as a constant feature.
const DEGENERATE_POOLED_VAR: f64 = 1e-24;

fn validate_samples(values: &[f64], labels: &[u32], n_classes: u32) -> Result<Vec<usize>> {
    if n_classes < 2 {
        return Err(Error::InvalidInput("mutual information needs >= 2 classes".into()));
    }
    if values.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    let mut counts = vec![0usize; n_classes as usize];
    for &l in labels {
        if l < 1 || l > n_classes {
            return Err(Error::InvalidInput(format!(
                "label {l} outside 1..={n_classes}"
            )));
        }
        counts[(l - 1) as usize] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::EmptyClass { class: c as u32 + 1 });
    }
    Ok(counts)
}

/// Mutual information (bits) between a scalar feature and the class label
/// under a per-class Gaussian model.
pub fn gaussian_mi(values: &[f64], labels: &[u32], n_classes: u32) -> Result<f64> {
    let counts = validate_samples(values, labels, n_classes)?;
    let n = values.len() as f64;

    let pooled_mean = values.iter().sum::<f64>() / n;
    let pooled_var =
        values.iter().map(|v| (v - pooled_mean) * (v - pooled_mean)).sum::<f64>() / n;
    if pooled_var <= DEGENERATE_POOLED_VAR {
        return Ok(0.0);
    }
    let var_floor = pooled_var * 1e-12;

    let k = n_classes as usize;
    let mut priors = vec![0.0; k];
    let mut means = vec![0.0; k];
    let mut vars = vec![0.0; k];
    for c in 0..k {
        priors[c] = counts[c] as f64 / n;
        let class_vals: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l as usize == c + 1)
            .map(|(&v, _)| v)
            .collect();
        let m = class_vals.iter().sum::<f64>() / class_vals.len() as f64;
        let v = class_vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
            / class_vals.len() as f64;
        means[c] = m;
        vars[c] = v.max(var_floor);
    }

    // Conditional entropy: average of per-class Gaussian entropies.
    let ln2 = std::f64::consts::LN_2;
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let h_cond: f64 = (0..k)
        .map(|c| priors[c] * 0.5 * (two_pi_e * vars[c]).ln() / ln2)
        .sum();

    // Marginal entropy of the Gaussian mixture by trapezoid quadrature.
    let mu_mix: f64 = (0..k).map(|c| priors[c] * means[c]).sum();
    let second_moment: f64 =
        (0..k).map(|c| priors[c] * (vars[c] + means[c] * means[c])).sum();
    let var_mix = (second_moment - mu_mix * mu_mix).max(var_floor);
    let s_mix = var_mix.sqrt();
    let lo = mu_mix - QUADRATURE_HALF_WIDTH * s_mix;
    let hi = mu_mix + QUADRATURE_HALF_WIDTH * s_mix;
    let step = (hi - lo) / (QUADRATURE_POINTS as f64 - 1.0);
    let mut sum = 0.0;
    let mut first_last = 0.0;
    for i in 0..QUADRATURE_POINTS {
        let x = lo + step * i as f64;
        let mut pdf = 0.0;
        for c in 0..k {
            let z = x - means[c];
            pdf += priors[c] * (-z * z / (2.0 * vars[c])).exp()
                / (2.0 * std::f64::consts::PI * vars[c]).sqrt();
        }
        let integrand = if pdf > 0.0 { -pdf * pdf.log2() } else { 0.0 };
        sum += integrand;
        if i == 0 || i == QUADRATURE_POINTS - 1 {
            first_last += integrand;
        }
    }
    let h_mix = step * (sum - 0.5 * first_last);

    Ok((h_mix - h_cond).max(0.0))
}

/// Plug-in mutual information (bits) from a 16-bin equal-width histogram.
pub fn histogram_mi(values: &[f64], labels: &[u32], n_classes: u32) -> Result<f64> {
    validate_samples(values, labels, n_classes)?;
    let n = values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Ok(0.0);
    }
    let k = n_classes as usize;
    let width = (max - min) / HISTOGRAM_BINS as f64;
    let mut joint = vec![[0usize; HISTOGRAM_BINS]; k];
    for (&v, &l) in values.iter().zip(labels) {
        let bin = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
        joint[(l - 1) as usize][bin] += 1;
    }
    let mut p_bin = [0.0f64; HISTOGRAM_BINS];
    let mut p_class = vec![0.0f64; k];
    for c in 0..k {
        for b in 0..HISTOGRAM_BINS {
            let p = joint[c][b] as f64 / n;
            p_bin[b] += p;
            p_class[c] += p;
        }
    }
    let mut mi = 0.0;
    for c in 0..k {
        for b in 0..HISTOGRAM_BINS {
            let p = joint[c][b] as f64 / n;
            if p > 0.0 {
                mi += p * (p / (p_class[c] * p_bin[b])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Dispatches to the chosen estimator.
pub fn mutual_information(
    values: &[f64],
    labels: &[u32],
    n_classes: u32,
    estimator: MiEstimator,
) -> Result<f64> {
    match estimator {
        MiEstimator::Gaussian => gaussian_mi(values, labels, n_classes),
        MiEstimator::Histogram => histogram_mi(values, labels, n_classes),
    }
}

/// Scores every feature dimension by its mutual information with the label.
/// Requires at least 2 classes and at least 2 feature vectors per class.
pub fn itfe_scores(
    features: &[FeatureVector],
    n_classes: u32,
    estimator: MiEstimator,
) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(Error::InvalidInput("itfe_scores needs feature vectors".into()));
    }
    let dim = features[0].values.len();
    if dim == 0 {
        return Err(Error::InvalidInput("feature vectors are empty".into()));
    }
    if features.iter().any(|f| f.values.len() != dim) {
        return Err(Error::InvalidInput("feature vectors have mixed dimensions".into()));
    }
    let labels: Vec<u32> = features.iter().map(|f| f.label).collect();
    // Validate once up front so per-dimension workers cannot disagree.
    let first: Vec<f64> = features.iter().map(|f| f.values[0]).collect();
    validate_samples(&first, &labels, n_classes)?;

    let results = par::map_range(dim, |d| {
        let column: Vec<f64> = features.iter().map(|f| f.values[d]).collect();
        mutual_information(&column, &labels, n_classes, estimator)
    });
    results.into_iter().collect()
}

/// Error-probability bounds from mutual information `mi_bits` and the class
/// prior distribution. Logs are base 2; both bounds are clamped to [0, 1].
pub fn fano_bounds(mi_bits: f64, class_priors: &[f64]) -> Result<FanoBounds> {
    if class_priors.len() < 2 {
        return Err(Error::InvalidInput("fano_bounds needs >= 2 classes".into()));
    }
    if !(mi_bits >= 0.0) || !mi_bits.is_finite() {
        return Err(Error::InvalidInput(format!(
            "mutual information must be finite and >= 0, got {mi_bits}"
        )));
    }
    if class_priors.iter().any(|&p| !(0.0..=1.0).contains(&p) || !p.is_finite()) {
        return Err(Error::InvalidInput("class priors must lie in [0, 1]".into()));
    }
    let total: f64 = class_priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("class priors sum to {total}, not 1")));
    }
    let h: f64 = class_priors
        .iter()
        .map(|&p| if p > 0.0 { -p * p.log2() } else { 0.0 })
        .sum();
    let log_n = (class_priors.len() as f64).log2();
    let lower = ((h - mi_bits - 1.0) / log_n).clamp(0.0, 1.0);
    let upper = (1.0 - (mi_bits - h).exp2()).clamp(0.0, 1.0);
    Ok(FanoBounds { lower, upper })
}
