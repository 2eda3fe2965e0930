//! Spatial covariance estimation, Frobenius-norm outlier screening, and
//! per-class averaging.
//!
//! Screening operates on the norms of UN-normalized trial covariances EE':
//! normalization removes exactly the amplitude information that separates
//! artifact trials from clean ones. Norms are standardized per class
//! (zero mean, unit population standard deviation) and trials beyond the
//! z threshold are flagged. Flagged trials are excluded from filter
//! estimation only; whether they also leave the classifier's training set
//! is the caller's choice.

use nalgebra::DMatrix;

use crate::dataio::{Trial, TrialSet};
use crate::error::{Error, Result};
use crate::par;

/// A channels x channels second-moment matrix of one or more trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCovariance {
    pub matrix: DMatrix<f64>,
    /// True when scaled to unit trace.
    pub normalized: bool,
}

/// Per-class averaged covariances plus the screening record that produced them.
#[derive(Debug, Clone)]
pub struct ClassCovarianceSet {
    pub per_class: Vec<ClassCovariance>,
    /// Trial ids rejected by the mask, in trial order.
    pub outlier_ids: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ClassCovariance {
    pub class: u32,
    pub covariance: SpatialCovariance,
    pub n_retained: usize,
    pub n_rejected: usize,
}

impl ClassCovarianceSet {
    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn dim(&self) -> usize {
        self.per_class.first().map_or(0, |c| c.covariance.matrix.nrows())
    }
}

/// Computes EE' for one trial, optionally scaled to unit trace.
pub fn spatial_covariance(trial: &Trial, normalize: bool) -> Result<SpatialCovariance> {
    let c = &trial.data * trial.data.transpose();
    if !normalize {
        return Ok(SpatialCovariance { matrix: c, normalized: false });
    }
    let tr = c.trace();
    if !(tr > 0.0) {
        return Err(Error::ZeroTrace { trial_id: trial.id });
    }
    Ok(SpatialCovariance { matrix: c / tr, normalized: true })
}

/// Frobenius norm of each trial's UN-normalized covariance EE'.
pub fn trial_norms(trials: &[Trial]) -> Result<Vec<f64>> {
    if trials.is_empty() {
        return Err(Error::InvalidInput("trial_norms needs at least one trial".into()));
    }
    let n_ch = trials[0].n_channels();
    if trials.iter().any(|t| t.n_channels() != n_ch) {
        return Err(Error::InvalidInput("trials have mixed channel counts".into()));
    }
    Ok(par::map_slice(trials, |t| (&t.data * t.data.transpose()).norm()))
}

/// Flags outliers by z-score: mask[i] is true iff |(norm_i - mean)/std|
/// exceeds `z_threshold`, with the population standard deviation. A zero
/// standard deviation flags nothing.
pub fn outlier_mask(norms: &[f64], z_threshold: f64) -> Result<Vec<bool>> {
    if norms.len() < 2 {
        return Err(Error::InvalidInput("outlier_mask needs at least 2 norms".into()));
    }
    if !(z_threshold > 0.0) {
        return Err(Error::InvalidInput("z_threshold must be positive".into()));
    }
    let n = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let var = norms.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= 0.0 {
        return Ok(vec![false; norms.len()]);
    }
    Ok(norms.iter().map(|x| ((x - mean) / std).abs() > z_threshold).collect())
}

/// Per-class screening over a whole set: computes norms, standardizes within
/// each class, and returns a mask aligned with `set.trials`. Classes with
/// fewer than 2 trials are never flagged.
pub fn detect_outliers(set: &TrialSet, z_threshold: f64) -> Result<Vec<bool>> {
    set.validate()?;
    if set.trials.is_empty() {
        return Ok(vec![]);
    }
    let norms = trial_norms(&set.trials)?;
    let mut mask = vec![false; set.trials.len()];
    for class in 1..=set.n_classes {
        let idx: Vec<usize> = (0..set.trials.len())
            .filter(|&i| set.trials[i].label == class)
            .collect();
        if idx.len() < 2 {
            continue;
        }
        let class_norms: Vec<f64> = idx.iter().map(|&i| norms[i]).collect();
        let class_mask = outlier_mask(&class_norms, z_threshold)?;
        for (&i, flagged) in idx.iter().zip(class_mask) {
            mask[i] = flagged;
        }
    }
    Ok(mask)
}

/// Averages trace-normalized covariances per class over unmasked trials.
/// Summation order is trial order, so results are reproducible.
pub fn class_average(set: &TrialSet, mask: &[bool]) -> Result<ClassCovarianceSet> {
    set.validate()?;
    if mask.len() != set.trials.len() {
        return Err(Error::InvalidInput(format!(
            "mask length {} != trial count {}",
            mask.len(),
            set.trials.len()
        )));
    }
    let n_ch = set
        .n_channels()
        .ok_or_else(|| Error::InvalidInput("class_average needs at least one trial".into()))?;

    // Normalized covariances for retained trials, order preserved.
    let covs = par::map_slice(&set.trials, |t| spatial_covariance(t, true));

    let mut per_class = Vec::with_capacity(set.n_classes as usize);
    let mut outlier_ids = Vec::new();
    for (i, t) in set.trials.iter().enumerate() {
        if mask[i] {
            outlier_ids.push(t.id);
        }
    }
    for class in 1..=set.n_classes {
        let mut sum = DMatrix::<f64>::zeros(n_ch, n_ch);
        let mut n_retained = 0usize;
        let mut n_rejected = 0usize;
        for (i, t) in set.trials.iter().enumerate() {
            if t.label != class {
                continue;
            }
            if mask[i] {
                n_rejected += 1;
                continue;
            }
            match &covs[i] {
                Ok(c) => {
                    sum += &c.matrix;
                    n_retained += 1;
                }
                Err(e) => {
                    return Err(match e {
                        Error::ZeroTrace { trial_id } => Error::ZeroTrace { trial_id: *trial_id },
                        _ => Error::InvalidInput(format!("covariance of trial {} failed", t.id)),
                    })
                }
            }
        }
        if n_retained == 0 {
            if n_rejected > 0 {
                return Err(Error::ClassDepleted { class, rejected: n_rejected });
            }
            return Err(Error::EmptyClass { class });
        }
        sum /= n_retained as f64;
        per_class.push(ClassCovariance {
            class,
            covariance: SpatialCovariance { matrix: sum, normalized: true },
            n_retained,
            n_rejected,
        });
    }
    Ok(ClassCovarianceSet { per_class, outlier_ids })
}
