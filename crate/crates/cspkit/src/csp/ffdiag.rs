//! Orthogonality-free joint approximate diagonalization of a set of
//! symmetric matrices.
//!
//! The demixing matrix W is refined multiplicatively: each iteration solves,
//! for every index pair, the least-squares problem obtained by linearizing
//! the congruence transform around the current W, assembles the per-pair
//! solutions into a zero-diagonal update U, and applies W <- (I + U) W.
//! Rows of W are rescaled to unit norm after every step so the iteration
//! cannot drift in scale, and the update norm is capped so I + U stays
//! well conditioned. A step-halving line search over both signs of the
//! update enforces a strictly decreasing, hence monotone, objective.
//!
//! The objective is the summed squared off-diagonal mass of the transformed
//! matrices. Its absolute convergence tolerance assumes inputs of roughly
//! unit scale, such as trace-normalized covariances.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Iteration controls for [`ffdiag`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FfdiagConfig {
    pub max_iter: usize,
    /// Absolute threshold on the summed squared off-diagonal mass.
    pub tol: f64,
}

impl Default for FfdiagConfig {
    fn default() -> Self {
        FfdiagConfig { max_iter: 100, tol: 1e-9 }
    }
}

/// Outcome of a joint diagonalization run.
#[derive(Debug, Clone)]
pub struct FfdiagResult {
    /// Demixing matrix; rows are filters with unit Euclidean norm.
    pub w: DMatrix<f64>,
    /// Objective before the first update and after each accepted update.
    /// Non-increasing by construction.
    pub objective_trace: Vec<f64>,
    /// True when the final objective is at or below the tolerance.
    pub converged: bool,
    /// Number of accepted multiplicative updates.
    pub iterations: usize,
}

impl FfdiagResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Largest number of times a rejected step is halved before the iteration
/// is declared stalled.
const MAX_HALVINGS: u32 = 30;
/// Cap on the Frobenius norm of the zero-diagonal update.
const MAX_UPDATE_NORM: f64 = 0.9;

/// Jointly diagonalizes `matrices`, returning a single demixing matrix W
/// such that W * C_k * W' is as diagonal as possible for every input C_k.
pub fn ffdiag(matrices: &[DMatrix<f64>], config: FfdiagConfig) -> Result<FfdiagResult> {
    let cs = validate_inputs(matrices)?;
    if config.max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    if !(config.tol > 0.0) {
        return Err(Error::InvalidConfig("tol must be positive".into()));
    }
    let n = cs[0].nrows();

    let mut w = initial_demixing(&cs);
    let mut transformed: Vec<DMatrix<f64>> = cs.iter().map(|c| congruence(&w, c)).collect();
    let mut objective = total_off_diag(&transformed);
    let mut trace = vec![objective];
    let mut iterations = 0usize;

    for iter in 0..config.max_iter {
        if objective <= config.tol {
            break;
        }
        let mut update = pairwise_update(&transformed, iter)?;
        let norm = update.norm();
        if norm > MAX_UPDATE_NORM {
            update *= MAX_UPDATE_NORM / norm;
        }

        // Line search on the measured objective: the linearized direction
        // ignores the row renormalization, which can turn it uphill, so each
        // scale tries the mirrored step too before halving. Only a strict
        // decrease is accepted, keeping the trace monotone.
        let mut accepted = None;
        let mut step = update;
        'search: for _ in 0..=MAX_HALVINGS {
            for dir in [1.0, -1.0] {
                let mut candidate = (DMatrix::identity(n, n) + &step * dir) * &w;
                normalize_rows(&mut candidate);
                let cand_transformed: Vec<DMatrix<f64>> =
                    cs.iter().map(|c| congruence(&candidate, c)).collect();
                let cand_objective = total_off_diag(&cand_transformed);
                if cand_objective < objective {
                    accepted = Some((candidate, cand_transformed, cand_objective));
                    break 'search;
                }
            }
            step /= 2.0;
        }
        let Some((new_w, new_transformed, new_objective)) = accepted else {
            break; // stalled: no scale of the step helps in either direction
        };
        w = new_w;
        transformed = new_transformed;
        objective = new_objective;
        trace.push(objective);
        iterations += 1;
    }

    let converged = objective <= config.tol;
    Ok(FfdiagResult { w, objective_trace: trace, converged, iterations })
}

fn validate_inputs(matrices: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
    if matrices.len() < 2 {
        return Err(Error::InvalidInput(
            "joint diagonalization needs at least 2 matrices".into(),
        ));
    }
    let n = matrices[0].nrows();
    if n < 2 {
        return Err(Error::InvalidInput("matrices must be at least 2x2".into()));
    }
    let mut out = Vec::with_capacity(matrices.len());
    for (k, c) in matrices.iter().enumerate() {
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "matrix {k} is {}x{}, expected {n}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("matrix {k} has non-finite entries")));
        }
        let asym = (c - c.transpose()).norm();
        if asym > 1e-8 * (1.0 + c.norm()) {
            return Err(Error::InvalidInput(format!("matrix {k} is not symmetric")));
        }
        out.push(linalg::symmetrize(c));
    }
    Ok(out)
}

/// Whitening transform of the mean input matrix (eigenvalues floored to keep
/// it finite on rank-deficient means) composed with the eigenbasis of a fixed
/// generic combination of the whitened inputs, rows scaled to unit norm.
///
/// After whitening, a joint diagonalizer of the inputs is orthogonal, and any
/// combination of the whitened matrices with pairwise-distinct eigenvalues
/// shares its eigenvectors with that diagonalizer. Starting from this basis
/// puts exactly diagonalizable inputs numerically at the solution and noisy
/// ones inside its basin, out of reach of the spurious local minima a bare
/// whitening start can fall into.
fn initial_demixing(cs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = cs[0].nrows();
    let mut mean = DMatrix::<f64>::zeros(n, n);
    for c in cs {
        mean += c;
    }
    mean /= cs.len() as f64;
    let (vals, vecs) = linalg::sym_eigen_desc(&mean);
    let floor = vals[0].max(f64::MIN_POSITIVE) * 1e-12;
    let mut w = vecs.transpose();
    for i in 0..n {
        let s = 1.0 / vals[i].max(floor).sqrt();
        for j in 0..n {
            w[(i, j)] *= s;
        }
    }

    // Deterministic, decaying weights: ties across all inputs at once are
    // non-generic, and an eigen-degenerate combination merely reproduces the
    // bare whitening start.
    let mut combo = DMatrix::<f64>::zeros(n, n);
    for (k, c) in cs.iter().enumerate() {
        combo += congruence(&w, c) / (k + 1) as f64;
    }
    let (_, q) = linalg::sym_eigen_desc(&combo);
    let mut w = q.transpose() * w;
    normalize_rows(&mut w);
    w
}

fn congruence(w: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::symmetrize(&(w * c * w.transpose()))
}

fn total_off_diag(ds: &[DMatrix<f64>]) -> f64 {
    ds.iter().map(linalg::off_diag_sq).sum()
}

/// Solves the per-pair 2x2 least-squares systems on the current transformed
/// matrices and assembles the zero-diagonal update.
///
/// A pair whose diagonal profiles are parallel across the set has a singular
/// system: when its off-diagonal mass is negligible the pair is simply left
/// untouched, otherwise no descent direction exists and the run fails.
fn pairwise_update(ds: &[DMatrix<f64>], iteration: usize) -> Result<DMatrix<f64>> {
    let n = ds[0].nrows();
    let mut u = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut z_ii = 0.0;
            let mut z_jj = 0.0;
            let mut z_ij = 0.0;
            let mut y_ij = 0.0;
            let mut y_ji = 0.0;
            let mut off_mass = 0.0;
            for d in ds {
                let dii = d[(i, i)];
                let djj = d[(j, j)];
                let dij = d[(i, j)];
                z_ii += dii * dii;
                z_jj += djj * djj;
                z_ij += dii * djj;
                y_ij += djj * dij;
                y_ji += dii * dij;
                off_mass += dij * dij;
            }
            let det = z_ii * z_jj - z_ij * z_ij;
            if det.abs() <= 1e-14 * z_ii * z_jj {
                if off_mass > 1e-9 * (z_ii + z_jj + f64::MIN_POSITIVE) {
                    return Err(Error::SingularUpdate { iteration, i, j });
                }
                continue;
            }
            u[(i, j)] = (z_ij * y_ji - z_ii * y_ij) / det;
            u[(j, i)] = (z_ij * y_ij - z_jj * y_ji) / det;
        }
    }
    Ok(u)
}

fn normalize_rows(w: &mut DMatrix<f64>) {
    let n = w.nrows();
    for i in 0..n {
        let norm = w.row(i).norm();
        if norm > 0.0 {
            for j in 0..w.ncols() {
                w[(i, j)] /= norm;
            }
        }
    }
}
