//! Small dense linear-algebra helpers shared by the covariance and filter
//! modules. Everything is f64 and sized for channel counts in the tens.

use nalgebra::{DMatrix, DVector};

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Returns (values, vectors); vectors are columns matching the values.
pub(crate) fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues of a symmetric real matrix are finite")
    });
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Sum of squared off-diagonal entries.
pub(crate) fn off_diag_sq(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s
}

/// The exactly symmetric part (m + m') / 2 of a matrix that is symmetric up
/// to rounding.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Flip each row's sign so its largest-magnitude entry is positive.
/// Resolves the sign indeterminacy of eigenvector-derived filters.
pub(crate) fn canonicalize_rows(w: &mut DMatrix<f64>) {
    for r in 0..w.nrows() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for c in 0..w.ncols() {
            let a = w[(r, c)].abs();
            if a > best_abs {
                best_abs = a;
                best = c;
            }
        }
        if w[(r, best)] < 0.0 {
            for c in 0..w.ncols() {
                w[(r, c)] = -w[(r, c)];
            }
        }
    }
}
