//! Spatial filter estimation and log-variance feature extraction.
//!
//! Two-class filters come from whitening the composite covariance and
//! diagonalizing one class in the whitened space, which simultaneously
//! diagonalizes both classes with complementary eigenvalues. Multiclass
//! filters come from joint approximate diagonalization of all class-average
//! covariances, ranked by the mutual information each filter's feature
//! carries about the label.

pub mod ffdiag;
pub mod itfe;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{ClassCovarianceSet, SpatialCovariance};
use crate::dataio::{Trial, TrialSet};
use crate::error::{Error, Result};
use crate::leio;
use crate::linalg;
use crate::par;

use ffdiag::{ffdiag, FfdiagConfig};
use itfe::MiEstimator;

/// Magic prefix of serialized filter banks.
pub const BANK_MAGIC: &[u8; 6] = b"CSPW1\0";
/// Magic prefix of serialized feature sets.
pub const FEATURES_MAGIC: &[u8; 6] = b"CSPF1\0";

/// Default number of filter pairs kept by the two-class selector.
pub const DEFAULT_FILTER_PAIRS: usize = 3;
/// Default number of filters kept by the multiclass selector.
pub const DEFAULT_MULTICLASS_FILTERS: usize = 6;

/// A bank of spatial filters. Rows of `w` are filters, applied to a trial
/// as Z = W * E.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFilterBank {
    pub w: DMatrix<f64>,
    /// Per-class diagonal of W * C_c * W', when the producing method has one.
    pub eigvals_per_class: Option<Vec<DVector<f64>>>,
    /// Per-filter quality scores (meaning depends on the producing method).
    pub scores: Vec<f64>,
    /// Ordered, distinct row indices chosen for feature extraction.
    pub selected: Vec<usize>,
}

impl SpatialFilterBank {
    pub fn n_filters(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.w.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_filters();
        if k == 0 || self.n_channels() == 0 {
            return Err(Error::InvalidInput("filter bank is empty".into()));
        }
        for i in 0..k {
            let row = self.w.row(i);
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("filter {i} has non-finite entries")));
            }
            if row.norm() == 0.0 {
                return Err(Error::InvalidInput(format!("filter {i} is all zeros")));
            }
        }
        if self.scores.len() != k {
            return Err(Error::InvalidInput(format!(
                "{} scores for {k} filters",
                self.scores.len()
            )));
        }
        let mut seen = vec![false; k];
        for &s in &self.selected {
            if s >= k {
                return Err(Error::InvalidInput(format!("selected index {s} out of range")));
            }
            if seen[s] {
                return Err(Error::InvalidInput(format!("selected index {s} repeated")));
            }
            seen[s] = true;
        }
        if let Some(per_class) = &self.eigvals_per_class {
            if per_class.iter().any(|v| v.len() != k) {
                return Err(Error::InvalidInput(
                    "per-class eigenvalue lengths disagree with filter count".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Log-variance features of one trial under a set of selected filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: u32,
    pub trial_id: u32,
}

/// Multiclass estimation outcome: the ranked filter bank plus the joint
/// diagonalization diagnostics.
#[derive(Debug, Clone)]
pub struct MulticlassCspResult {
    pub bank: SpatialFilterBank,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
}

/// Two-class spatial filters by whitening + simultaneous diagonalization.
///
/// Both inputs must be trace-normalized. Rows of the returned bank are
/// ordered by descending first-class eigenvalue and sign-fixed so each
/// row's largest-magnitude entry is positive; `selected` holds the default
/// top/bottom pairs.
pub fn csp_two_class(
    c1: &SpatialCovariance,
    c2: &SpatialCovariance,
) -> Result<SpatialFilterBank> {
    if !c1.normalized || !c2.normalized {
        return Err(Error::InvalidInput(
            "two-class filters need trace-normalized covariances".into(),
        ));
    }
    let n = c1.matrix.nrows();
    if n < 2 {
        return Err(Error::InvalidInput("covariances must be at least 2x2".into()));
    }
    if c2.matrix.nrows() != n || c1.matrix.ncols() != n || c2.matrix.ncols() != n {
        return Err(Error::InvalidInput("covariance dimensions disagree".into()));
    }

    let composite = linalg::symmetrize(&(&c1.matrix + &c2.matrix));
    let (vals, vecs) = linalg::sym_eigen_desc(&composite);
    let min_eig = vals[n - 1];
    if min_eig <= 1e-10 {
        return Err(Error::RankDeficient { min_eig });
    }

    // Whitening transform of the composite.
    let mut p = vecs.transpose();
    for i in 0..n {
        let s = 1.0 / vals[i].sqrt();
        for j in 0..n {
            p[(i, j)] *= s;
        }
    }

    let s1 = linalg::symmetrize(&(&p * &c1.matrix * p.transpose()));
    let (_, b) = linalg::sym_eigen_desc(&s1);
    let mut w = b.transpose() * &p;
    linalg::canonicalize_rows(&mut w);

    // Order rows by the realized first-class diagonal, largest first.
    let lam1_raw: Vec<f64> = (0..n)
        .map(|i| (w.row(i) * &c1.matrix * w.row(i).transpose())[(0, 0)])
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lam1_raw[b].partial_cmp(&lam1_raw[a]).unwrap());
    let w = DMatrix::from_fn(n, n, |i, j| w[(order[i], j)]);

    let lam1 = DVector::from_fn(n, |i, _| {
        (w.row(i) * &c1.matrix * w.row(i).transpose())[(0, 0)]
    });
    let lam2 = DVector::from_fn(n, |i, _| {
        (w.row(i) * &c2.matrix * w.row(i).transpose())[(0, 0)]
    });

    let bank = SpatialFilterBank {
        scores: lam1.iter().cloned().collect(),
        selected: two_class_selection(n, DEFAULT_FILTER_PAIRS)?,
        eigvals_per_class: Some(vec![lam1, lam2]),
        w,
    };
    bank.validate()?;
    Ok(bank)
}

/// Index set kept by the two-class selector: the `m` most first-class-heavy
/// filters plus the `m` least, with `m` clamped so the halves cannot overlap.
pub fn two_class_selection(n_filters: usize, m: usize) -> Result<Vec<usize>> {
    if n_filters < 2 {
        return Err(Error::InvalidInput("selection needs at least 2 filters".into()));
    }
    if m == 0 {
        return Err(Error::InvalidInput("filter pair count must be at least 1".into()));
    }
    let m_eff = m.min(n_filters / 2).max(1);
    Ok((0..m_eff).chain(n_filters - m_eff..n_filters).collect())
}

fn median(sorted_values: &mut [f64]) -> f64 {
    sorted_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted_values.len();
    if n % 2 == 1 {
        sorted_values[n / 2]
    } else {
        0.5 * (sorted_values[n / 2 - 1] + sorted_values[n / 2])
    }
}

/// Per-filter, per-class medians of the filtered trial power w * E * E' * w'.
fn class_median_powers(bank: &SpatialFilterBank, set: &TrialSet) -> Result<Vec<Vec<f64>>> {
    set.validate()?;
    set.validate_for_training()?;
    let n_ch = set
        .n_channels()
        .ok_or_else(|| Error::InvalidInput("median scoring needs trials".into()))?;
    if bank.n_channels() != n_ch {
        return Err(Error::InvalidInput(format!(
            "bank has {} channels but trials have {n_ch}",
            bank.n_channels()
        )));
    }
    let k = bank.n_filters();
    // powers[t][j] = squared norm of filter j applied to trial t.
    let powers: Vec<Vec<f64>> = par::map_slice(&set.trials, |t| {
        let z = &bank.w * &t.data;
        (0..k).map(|j| z.row(j).iter().map(|x| x * x).sum()).collect()
    });

    let mut medians = vec![vec![0.0; set.n_classes as usize]; k];
    for class in 1..=set.n_classes {
        let idx: Vec<usize> = (0..set.trials.len())
            .filter(|&i| set.trials[i].label == class)
            .collect();
        for j in 0..k {
            let mut vals: Vec<f64> = idx.iter().map(|&i| powers[i][j]).collect();
            medians[j][(class - 1) as usize] = median(&mut vals);
        }
    }
    Ok(medians)
}

/// Scores each filter by the first class's share of the per-class median
/// powers. Values lie in [0, 1]; extreme values mark discriminative filters.
pub fn median_score(bank: &SpatialFilterBank, set: &TrialSet) -> Result<Vec<f64>> {
    let medians = class_median_powers(bank, set)?;
    Ok(medians
        .iter()
        .map(|per_class| {
            let total: f64 = per_class.iter().sum();
            if total > 0.0 {
                per_class[0] / total
            } else {
                0.0
            }
        })
        .collect())
}

/// Class-symmetric variant: each filter is scored by how far any class's
/// share of the median power deviates from the uninformative value 1/C.
pub fn median_rank_scores(bank: &SpatialFilterBank, set: &TrialSet) -> Result<Vec<f64>> {
    let medians = class_median_powers(bank, set)?;
    let uniform = 1.0 / set.n_classes as f64;
    Ok(medians
        .iter()
        .map(|per_class| {
            let total: f64 = per_class.iter().sum();
            if total > 0.0 {
                per_class
                    .iter()
                    .map(|&m| (m / total - uniform).abs())
                    .fold(0.0, f64::max)
            } else {
                0.0
            }
        })
        .collect())
}

/// Extracts the normalized log-variance feature of one trial under the
/// `selected` rows of `w`. Every value is the log of that filter's share of
/// the total selected variance, so the exponentials sum to one.
pub fn extract_features(
    trial: &Trial,
    w: &DMatrix<f64>,
    selected: &[usize],
) -> Result<FeatureVector> {
    if selected.len() < 2 {
        return Err(Error::InvalidInput("feature extraction needs >= 2 filters".into()));
    }
    let mut seen = vec![false; w.nrows()];
    for &s in selected {
        if s >= w.nrows() {
            return Err(Error::InvalidInput(format!("selected filter {s} out of range")));
        }
        if seen[s] {
            return Err(Error::InvalidInput(format!("selected filter {s} repeated")));
        }
        seen[s] = true;
    }
    if w.ncols() != trial.n_channels() {
        return Err(Error::InvalidInput(format!(
            "filters expect {} channels but trial {} has {}",
            w.ncols(),
            trial.id,
            trial.n_channels()
        )));
    }
    let t = trial.n_samples() as f64;
    let mut variances = Vec::with_capacity(selected.len());
    for &j in selected {
        let z = w.row(j) * &trial.data;
        let mean = z.iter().sum::<f64>() / t;
        let var = z.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t;
        if !(var > 0.0) {
            return Err(Error::ZeroVarianceRow { filter: j, trial_id: trial.id });
        }
        variances.push(var);
    }
    let total: f64 = variances.iter().sum();
    let values: Vec<f64> = variances.iter().map(|v| (v / total).ln()).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "trial {}: feature underflow across selected filters",
            trial.id
        )));
    }
    Ok(FeatureVector { values, label: trial.label, trial_id: trial.id })
}

/// Extracts features for every trial in the set, in trial order.
pub fn extract_features_set(
    set: &TrialSet,
    w: &DMatrix<f64>,
    selected: &[usize],
) -> Result<Vec<FeatureVector>> {
    set.validate()?;
    par::map_slice(&set.trials, |t| extract_features(t, w, selected))
        .into_iter()
        .collect()
}

/// Multiclass spatial filters: jointly diagonalizes the class-average
/// covariances, scores every filter by the mutual information between its
/// feature and the label over `set`, and keeps the `k` best.
///
/// Rows of the returned bank are ordered by descending score, so `selected`
/// is always `0..k`. The per-class eigenvalues are the diagonals of
/// W * C_c * W' in that final row order.
pub fn multiclass_csp(
    ccs: &ClassCovarianceSet,
    set: &TrialSet,
    k: usize,
    estimator: MiEstimator,
    config: FfdiagConfig,
) -> Result<MulticlassCspResult> {
    let n_classes = ccs.n_classes();
    if n_classes < 2 {
        return Err(Error::InvalidInput("multiclass filters need >= 2 classes".into()));
    }
    if n_classes != set.n_classes as usize {
        return Err(Error::InvalidInput(format!(
            "covariance set has {n_classes} classes but trials have {}",
            set.n_classes
        )));
    }
    let n = ccs.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "filter count k = {k} must lie in 1..={n}"
        )));
    }
    if set.n_channels() != Some(n) {
        return Err(Error::InvalidInput(
            "trials and covariances disagree on channel count".into(),
        ));
    }

    let matrices: Vec<DMatrix<f64>> =
        ccs.per_class.iter().map(|c| c.covariance.matrix.clone()).collect();
    let ff = ffdiag(&matrices, config)?;
    let mut w = ff.w;
    linalg::canonicalize_rows(&mut w);

    let all: Vec<usize> = (0..n).collect();
    let features = extract_features_set(set, &w, &all)?;
    let raw_scores = itfe::itfe_scores(&features, set.n_classes, estimator)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_scores[b].partial_cmp(&raw_scores[a]).unwrap().then(a.cmp(&b))
    });
    let w = DMatrix::from_fn(n, n, |i, j| w[(order[i], j)]);
    let scores: Vec<f64> = order.iter().map(|&i| raw_scores[i]).collect();
    let eigvals_per_class: Vec<DVector<f64>> = matrices
        .iter()
        .map(|c| {
            DVector::from_fn(n, |i, _| (w.row(i) * c * w.row(i).transpose())[(0, 0)])
        })
        .collect();

    let bank = SpatialFilterBank {
        w,
        eigvals_per_class: Some(eigvals_per_class),
        scores,
        selected: (0..k).collect(),
    };
    bank.validate()?;
    Ok(MulticlassCspResult {
        bank,
        converged: ff.converged,
        iterations: ff.iterations,
        final_objective: *ff.objective_trace.last().expect("trace never empty"),
    })
}

#[derive(Serialize, Deserialize)]
struct BankHeader {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
    selected: Vec<usize>,
    eigvals_per_class: Option<Vec<Vec<f64>>>,
}

/// Writes a filter bank: magic, JSON metadata header, then the filter matrix
/// row-major as little-endian f64 bits.
pub fn write_filter_bank(path: &Path, bank: &SpatialFilterBank) -> Result<()> {
    bank.validate()?;
    let header = BankHeader {
        rows: bank.n_filters(),
        cols: bank.n_channels(),
        scores: bank.scores.clone(),
        selected: bank.selected.clone(),
        eigvals_per_class: bank
            .eigvals_per_class
            .as_ref()
            .map(|per| per.iter().map(|v| v.iter().cloned().collect()).collect()),
    };
    let json = serde_json::to_vec(&header)
        .map_err(|e| Error::InvalidInput(format!("metadata serialization failed: {e}")))?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(BANK_MAGIC)?;
    leio::write_u32(&mut out, json.len() as u32)?;
    out.write_all(&json)?;
    for i in 0..bank.n_filters() {
        for j in 0..bank.n_channels() {
            leio::write_f64(&mut out, bank.w[(i, j)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a filter bank written by [`write_filter_bank`].
pub fn read_filter_bank(path: &Path) -> Result<SpatialFilterBank> {
    let display = path.display().to_string();
    let fail = |reason: String| Error::Format { path: display.clone(), reason };
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != BANK_MAGIC {
        return Err(fail("bad magic: not a filter bank file".into()));
    }
    let json_len = leio::read_u32(&mut input)? as usize;
    if json_len == 0 || json_len > 64 << 20 {
        return Err(fail(format!("implausible metadata length {json_len}")));
    }
    let mut json = vec![0u8; json_len];
    input.read_exact(&mut json)?;
    let header: BankHeader = serde_json::from_slice(&json)
        .map_err(|e| fail(format!("metadata parse failed: {e}")))?;
    if header.rows == 0 || header.cols == 0 {
        return Err(fail("empty filter matrix".into()));
    }
    let data = leio::read_f64_vec(&mut input, header.rows * header.cols)?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(fail("trailing bytes after filter matrix".into()));
    }
    let bank = SpatialFilterBank {
        w: DMatrix::from_row_slice(header.rows, header.cols, &data),
        eigvals_per_class: header.eigvals_per_class.map(|per| {
            per.into_iter().map(DVector::from_vec).collect()
        }),
        scores: header.scores,
        selected: header.selected,
    };
    bank.validate().map_err(|e| fail(e.to_string()))?;
    Ok(bank)
}

/// Writes feature vectors with their class-count context.
pub fn write_features(path: &Path, features: &[FeatureVector], n_classes: u32) -> Result<()> {
    if features.is_empty() {
        return Err(Error::InvalidInput("no feature vectors to write".into()));
    }
    if n_classes < 2 {
        return Err(Error::InvalidInput("feature files need >= 2 classes".into()));
    }
    let dim = features[0].values.len();
    for (i, f) in features.iter().enumerate() {
        if f.values.len() != dim {
            return Err(Error::InvalidRecord {
                record: i,
                reason: format!("dimension {} != {dim}", f.values.len()),
            });
        }
        if f.label < 1 || f.label > n_classes {
            return Err(Error::InvalidRecord {
                record: i,
                reason: format!("label {} outside 1..={n_classes}", f.label),
            });
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                record: i,
                reason: "non-finite feature value".into(),
            });
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FEATURES_MAGIC)?;
    leio::write_u32(&mut out, n_classes)?;
    leio::write_u32(&mut out, dim as u32)?;
    leio::write_u32(&mut out, features.len() as u32)?;
    for f in features {
        leio::write_u32(&mut out, f.trial_id)?;
        leio::write_u32(&mut out, f.label)?;
        for &v in &f.values {
            leio::write_f64(&mut out, v)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a feature file, returning the vectors and the class count.
pub fn read_features(path: &Path) -> Result<(Vec<FeatureVector>, u32)> {
    let display = path.display().to_string();
    let fail = |reason: String| Error::Format { path: display.clone(), reason };
    let mut input = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != FEATURES_MAGIC {
        return Err(fail("bad magic: not a feature file".into()));
    }
    let n_classes = leio::read_u32(&mut input)?;
    let dim = leio::read_u32(&mut input)? as usize;
    let n_vectors = leio::read_u32(&mut input)? as usize;
    if n_classes < 2 {
        return Err(fail(format!("implausible class count {n_classes}")));
    }
    if dim == 0 || dim > 1 << 20 {
        return Err(fail(format!("implausible feature dimension {dim}")));
    }
    if n_vectors == 0 {
        return Err(fail("feature file holds no vectors".into()));
    }
    let mut features = Vec::with_capacity(n_vectors);
    for record in 0..n_vectors {
        let trial_id = leio::read_u32(&mut input)?;
        let label = leio::read_u32(&mut input)?;
        if label < 1 || label > n_classes {
            return Err(Error::InvalidRecord {
                record,
                reason: format!("label {label} outside 1..={n_classes}"),
            });
        }
        let values = leio::read_f64_vec(&mut input, dim)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                record,
                reason: "non-finite feature value".into(),
            });
        }
        features.push(FeatureVector { values, label, trial_id });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(fail("trailing bytes after last record".into()));
    }
    Ok((features, n_classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normalized(m: DMatrix<f64>) -> SpatialCovariance {
        let tr = m.trace();
        SpatialCovariance { matrix: m / tr, normalized: true }
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                for i in 0..n {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        q
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let q = random_orthogonal(n, rng);
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.2 + rng.random::<f64>()
            } else {
                0.0
            }
        });
        crate::linalg::symmetrize(&(&q * d * q.transpose()))
    }

    /// Gaussian trials whose sources have per-class standard deviations
    /// `profiles[class-1]`, mixed by `a`.
    fn synth_trials(
        a: &DMatrix<f64>,
        profiles: &[Vec<f64>],
        per_class: usize,
        samples: usize,
        seed: u64,
    ) -> TrialSet {
        let n = a.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trials = Vec::new();
        let mut id = 0u32;
        for (c, profile) in profiles.iter().enumerate() {
            for _ in 0..per_class {
                let s = DMatrix::from_fn(n, samples, |i, _| {
                    profile[i] * rng.sample::<f64, _>(StandardNormal)
                });
                trials.push(Trial { id, label: c as u32 + 1, fs: 250.0, data: a * s });
                id += 1;
            }
        }
        TrialSet { n_classes: profiles.len() as u32, fs: 250.0, trials }
    }

    fn class_set(set: &TrialSet) -> ClassCovarianceSet {
        let mask = vec![false; set.trials.len()];
        crate::covariance::class_average(set, &mask).unwrap()
    }

    /// Largest principal angle (radians) between the row spans of `a` and `b`.
    fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let qa = a.transpose().qr().q();
        let qb = b.transpose().qr().q();
        let svd = (qa.transpose() * qb).svd(false, false);
        let min_sv = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        min_sv.min(1.0).acos()
    }

    #[test]
    fn indistinguishable_classes_split_evenly() {
        let c = normalized(DMatrix::<f64>::identity(4, 4));
        let bank = csp_two_class(&c, &c).unwrap();
        let eig = bank.eigvals_per_class.as_ref().unwrap();
        for i in 0..4 {
            assert_relative_eq!(eig[0][i], 0.5, epsilon = 1e-10);
            assert_relative_eq!(eig[1][i], 0.5, epsilon = 1e-10);
        }
        let d1 = &bank.w * &c.matrix * bank.w.transpose();
        assert!(crate::linalg::off_diag_sq(&d1).sqrt() < 1e-10);
    }

    #[test]
    fn complementary_diagonal_pair_yields_identity_filters() {
        let c1 = SpatialCovariance {
            matrix: DMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.2]),
            normalized: true,
        };
        let c2 = SpatialCovariance {
            matrix: DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.8]),
            normalized: true,
        };
        let bank = csp_two_class(&c1, &c2).unwrap();
        assert!((&bank.w - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        let eig = bank.eigvals_per_class.as_ref().unwrap();
        assert_relative_eq!(eig[0][0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(eig[0][1], 0.2, epsilon = 1e-12);
        assert_eq!(bank.selected, vec![0, 1]);
    }

    #[test]
    fn random_pairs_diagonalize_with_complementary_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        for _ in 0..10 {
            let c1 = normalized(random_spd(6, &mut rng));
            let c2 = normalized(random_spd(6, &mut rng));
            let bank = csp_two_class(&c1, &c2).unwrap();
            let d1 = &bank.w * &c1.matrix * bank.w.transpose();
            let d2 = &bank.w * &c2.matrix * bank.w.transpose();
            for i in 0..6 {
                for j in 0..6 {
                    if i == j {
                        assert!((d1[(i, i)] + d2[(i, i)] - 1.0).abs() < 1e-8);
                    } else {
                        assert!(d1[(i, j)].abs() < 1e-8);
                        assert!(d2[(i, j)].abs() < 1e-8);
                    }
                }
            }
            // Rows ordered by descending first-class eigenvalue.
            for i in 1..6 {
                assert!(d1[(i, i)] <= d1[(i - 1, i - 1)] + 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_composite_is_rejected() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let c = SpatialCovariance { matrix: m, normalized: true };
        match csp_two_class(&c, &c.clone()) {
            Err(Error::RankDeficient { min_eig }) => assert!(min_eig <= 1e-10),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
        let un = SpatialCovariance { matrix: DMatrix::identity(2, 2), normalized: false };
        assert!(csp_two_class(&un, &un.clone()).is_err());
    }

    #[test]
    fn selection_clamps_to_available_pairs() {
        assert_eq!(two_class_selection(22, 3).unwrap(), vec![0, 1, 2, 19, 20, 21]);
        assert_eq!(two_class_selection(4, 3).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(two_class_selection(2, 3).unwrap(), vec![0, 1]);
        assert_eq!(two_class_selection(3, 3).unwrap(), vec![0, 2]);
        assert!(two_class_selection(1, 1).is_err());
        assert!(two_class_selection(4, 0).is_err());
    }

    #[test]
    fn median_score_symmetric_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut trials = Vec::new();
        for i in 0..10u32 {
            let data = DMatrix::from_fn(2, 40, |_, _| rng.sample::<f64, _>(StandardNormal));
            trials.push(Trial { id: 2 * i, label: 1, fs: 250.0, data: data.clone() });
            trials.push(Trial { id: 2 * i + 1, label: 2, fs: 250.0, data });
        }
        let set = TrialSet { n_classes: 2, fs: 250.0, trials };
        let bank = SpatialFilterBank {
            w: DMatrix::identity(2, 2),
            eigvals_per_class: None,
            scores: vec![0.0; 2],
            selected: vec![0, 1],
        };
        let scores = median_score(&bank, &set).unwrap();
        for s in &scores {
            assert_relative_eq!(*s, 0.5, epsilon = 1e-12);
        }
        let ranks = median_rank_scores(&bank, &set).unwrap();
        for r in &ranks {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn median_score_flags_class_specific_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut trials = Vec::new();
        let mut id = 0u32;
        for label in [1u32, 2] {
            for _ in 0..9 {
                let data = DMatrix::from_fn(2, 64, |ch, _| {
                    let scale = if ch == 0 && label == 1 { 10.0 } else { 0.1 };
                    scale * rng.sample::<f64, _>(StandardNormal)
                });
                trials.push(Trial { id, label, fs: 250.0, data });
                id += 1;
            }
        }
        let set = TrialSet { n_classes: 2, fs: 250.0, trials };
        let bank = SpatialFilterBank {
            w: DMatrix::identity(2, 2),
            eigvals_per_class: None,
            scores: vec![0.0; 2],
            selected: vec![0, 1],
        };
        let scores = median_score(&bank, &set).unwrap();
        assert!(scores[0] > 0.99, "channel-0 filter passes only class 1: {scores:?}");
        assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
        let ranks = median_rank_scores(&bank, &set).unwrap();
        assert!(ranks[0] > 0.45);
    }

    #[test]
    fn uniform_variances_give_log_one_over_count() {
        let trial = Trial { id: 0, label: 1, fs: 250.0, data: DMatrix::identity(6, 6) * 3.0 };
        let w = DMatrix::<f64>::identity(6, 6);
        let f = extract_features(&trial, &w, &[0, 1, 2, 3, 4, 5]).unwrap();
        for v in &f.values {
            assert_relative_eq!(*v, (1.0f64 / 6.0).ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn hand_computed_feature_ratio() {
        // Row variances 3 and 1 -> shares 0.75 and 0.25.
        let s3 = 3f64.sqrt();
        let data = DMatrix::from_row_slice(2, 2, &[-s3, s3, -1.0, 1.0]);
        let trial = Trial { id: 0, label: 1, fs: 250.0, data };
        let f = extract_features(&trial, &DMatrix::identity(2, 2), &[0, 1]).unwrap();
        assert_relative_eq!(f.values[0], 0.75f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(f.values[1], 0.25f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn feature_exponentials_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let w = random_orthogonal(5, &mut rng);
        for id in 0..50u32 {
            let data = DMatrix::from_fn(5, 80, |_, _| rng.sample::<f64, _>(StandardNormal));
            let trial = Trial { id, label: 1 + id % 3, fs: 250.0, data };
            let f = extract_features(&trial, &w, &[0, 1, 2, 3, 4]).unwrap();
            let total: f64 = f.values.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(f.values.iter().all(|&v| v <= 1e-12));
            assert_eq!(f.label, trial.label);
            assert_eq!(f.trial_id, id);
        }
    }

    #[test]
    fn zero_variance_row_names_filter_and_trial() {
        let data = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 2.0, 0.5, 3.0, 3.0, 3.0, 3.0]);
        let trial = Trial { id: 9, label: 1, fs: 250.0, data };
        match extract_features(&trial, &DMatrix::identity(2, 2), &[0, 1]) {
            Err(Error::ZeroVarianceRow { filter: 1, trial_id: 9 }) => {}
            other => panic!("expected ZeroVarianceRow, got {other:?}"),
        }
    }

    #[test]
    fn multiclass_keep_all_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let a = random_orthogonal(4, &mut rng);
        let profiles = vec![
            vec![2.0, 1.0, 1.0, 0.5],
            vec![0.5, 2.0, 1.0, 1.0],
            vec![1.0, 0.5, 2.0, 1.0],
        ];
        let set = synth_trials(&a, &profiles, 20, 100, 42);
        let ccs = class_set(&set);
        let r = multiclass_csp(&ccs, &set, 4, MiEstimator::Gaussian, FfdiagConfig::default())
            .unwrap();
        assert_eq!(r.bank.selected, vec![0, 1, 2, 3]);
        assert_eq!(r.bank.scores.len(), 4);
        for pair in r.bank.scores.windows(2) {
            assert!(pair[0] >= pair[1], "scores must be sorted descending");
        }
        let eig = r.bank.eigvals_per_class.as_ref().unwrap();
        assert_eq!(eig.len(), 3);
    }

    #[test]
    fn multiclass_finds_planted_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 8;
        let a = random_orthogonal(n, &mut rng);
        // Sources 0..4 are elevated by classes 1..4 respectively; 4..8 flat.
        let mut profiles = Vec::new();
        for c in 0..4 {
            let mut p = vec![1.0; n];
            p[c] = 4.0;
            profiles.push(p);
        }
        let set = synth_trials(&a, &profiles, 30, 150, 777);
        let ccs = class_set(&set);
        let r = multiclass_csp(
            &ccs,
            &set,
            6,
            MiEstimator::Gaussian,
            FfdiagConfig { max_iter: 300, tol: 1e-11 },
        )
        .unwrap();
        // Which source does each selected filter capture?
        let wa = &r.bank.w * &a;
        let mut captured = std::collections::HashSet::new();
        for &j in &r.bank.selected {
            let row = wa.row(j);
            let mut best = 0usize;
            for s in 0..n {
                if row[s].abs() > row[best].abs() {
                    best = s;
                }
            }
            captured.insert(best);
        }
        for planted in 0..4 {
            assert!(captured.contains(&planted), "source {planted} missing: {captured:?}");
        }
    }

    #[test]
    fn multiclass_selection_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let a = random_orthogonal(5, &mut rng);
        let profiles = vec![
            vec![3.0, 1.0, 1.0, 1.0, 0.4],
            vec![1.0, 3.0, 1.0, 1.0, 0.4],
            vec![1.0, 1.0, 3.0, 1.0, 0.4],
        ];
        let set = synth_trials(&a, &profiles, 25, 120, 2024);
        let mut scaled = set.clone();
        for t in &mut scaled.trials {
            t.data *= 37.5;
        }
        let r1 = multiclass_csp(
            &class_set(&set),
            &set,
            3,
            MiEstimator::Gaussian,
            FfdiagConfig::default(),
        )
        .unwrap();
        let r2 = multiclass_csp(
            &class_set(&scaled),
            &scaled,
            3,
            MiEstimator::Gaussian,
            FfdiagConfig::default(),
        )
        .unwrap();
        assert_eq!(r1.bank.selected, r2.bank.selected);
        assert!((&r1.bank.w - &r2.bank.w).norm() < 1e-9);
        for (s1, s2) in r1.bank.scores.iter().zip(&r2.bank.scores) {
            assert_relative_eq!(s1, s2, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_class_multiclass_agreement_on_filter_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = random_orthogonal(6, &mut rng);
        let profiles = vec![
            vec![4.0, 3.0, 1.0, 1.0, 0.5, 0.33],
            vec![0.33, 0.5, 1.0, 1.0, 3.0, 4.0],
        ];
        let set = synth_trials(&a, &profiles, 40, 200, 909);
        let ccs = class_set(&set);
        let two = csp_two_class(&ccs.per_class[0].covariance, &ccs.per_class[1].covariance)
            .unwrap();
        let selection = two_class_selection(6, 2).unwrap();
        let w_two = DMatrix::from_fn(4, 6, |i, j| two.w[(selection[i], j)]);

        let multi = multiclass_csp(
            &ccs,
            &set,
            4,
            MiEstimator::Gaussian,
            FfdiagConfig { max_iter: 500, tol: 1e-12 },
        )
        .unwrap();
        assert!(multi.converged);
        let w_multi = DMatrix::from_fn(4, 6, |i, j| multi.bank.w[(i, j)]);
        let angle = max_principal_angle(&w_two, &w_multi);
        assert!(angle < 1e-3, "span angle {angle} rad");
    }

    #[test]
    fn bank_file_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.cspw");
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let w = DMatrix::from_fn(4, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let bank = SpatialFilterBank {
            w,
            eigvals_per_class: Some(vec![
                DVector::from_vec(vec![0.9, 0.5, 0.3, 0.1]),
                DVector::from_vec(vec![0.1, 0.5, 0.7, 0.9]),
            ]),
            scores: vec![1.5, 0.75, 0.2, 0.05],
            selected: vec![0, 1, 3],
        };
        write_filter_bank(&path, &bank).unwrap();
        let back = read_filter_bank(&path).unwrap();
        assert_eq!(back.w, bank.w);
        assert_eq!(back.scores, bank.scores);
        assert_eq!(back.selected, bank.selected);
        assert_eq!(back.eigvals_per_class, bank.eigvals_per_class);
    }

    #[test]
    fn bank_file_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.cspw");
        let bank = SpatialFilterBank {
            w: DMatrix::identity(2, 2),
            eigvals_per_class: None,
            scores: vec![1.0, 0.5],
            selected: vec![0],
        };
        write_filter_bank(&path, &bank).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_filter_bank(&path), Err(Error::Format { .. })));

        write_filter_bank(&path, &bank).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_filter_bank(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn feature_file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.cspf");
        let features = vec![
            FeatureVector { values: vec![-1.5, -0.25], label: 1, trial_id: 0 },
            FeatureVector { values: vec![-0.1, -3.25], label: 4, trial_id: 7 },
        ];
        write_features(&path, &features, 4).unwrap();
        let (back, n_classes) = read_features(&path).unwrap();
        assert_eq!(n_classes, 4);
        assert_eq!(back, features);

        assert!(write_features(&path, &features, 3).is_err()); // label 4 out of range
        assert!(write_features(&path, &[], 4).is_err());

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'Q';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_features(&path), Err(Error::Format { .. })));
    }
}
