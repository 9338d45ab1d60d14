//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::types::C64;

/// The `n` points `exp(2 pi i m / n)`, `m = 0..n`.
pub fn unit_roots(n: usize) -> Vec<C64> {
    (0..n)
        .map(|m| C64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64))
        .collect()
}

/// Coefficients `c_0..c_{n-1}` of the polynomial taking `values[m]` at
/// `unit_roots(n)[m]` (inverse DFT).
pub fn interpolate_on_unit_roots(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    let roots = unit_roots(n);
    (0..n)
        .map(|j| {
            let s: C64 = values
                .iter()
                .enumerate()
                .map(|(m, v)| v * roots[(m * j) % n].conj())
                .sum();
            s / n as f64
        })
        .collect()
}

/// Eigenpairs of a real symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
pub fn herm_eigen_desc(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = a.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn herm_eigenvalues_desc(a: &DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Eigenvalues of a real symmetric matrix, descending.
pub fn sym_eigenvalues_desc(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Singular values of a complex matrix, descending.
pub fn singular_values_desc(a: &DMatrix<C64>) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Cholesky factor of a Gram matrix restricted to a greedily chosen set of
/// linearly independent columns.
///
/// Columns are visited in order; a column whose pivot falls below
/// `rel_tol * max diag` is dropped.
#[derive(Debug, Clone)]
pub struct PivotedGram {
    /// Indices of retained columns (into the original Gram matrix).
    pub kept: Vec<usize>,
    /// Indices of dropped (collinear) columns.
    pub dropped: Vec<usize>,
    chol: DMatrix<f64>,
}

impl PivotedGram {
    pub fn new(gram: &DMatrix<f64>, cols: &[usize], rel_tol: f64) -> Self {
        let scale = cols.iter().fold(0.0_f64, |a, &c| a.max(gram[(c, c)]));
        let tol = rel_tol * scale.max(f64::MIN_POSITIVE);
        let mut kept: Vec<usize> = Vec::with_capacity(cols.len());
        let mut dropped = Vec::new();
        let mut l = DMatrix::<f64>::zeros(cols.len(), cols.len());
        for &c in cols {
            let k = kept.len();
            // candidate row of L
            let mut row = vec![0.0; k];
            for j in 0..k {
                let mut s = gram[(c, kept[j])];
                for m in 0..j {
                    s -= row[m] * l[(j, m)];
                }
                row[j] = s / l[(j, j)];
            }
            let pivot = gram[(c, c)] - row.iter().map(|v| v * v).sum::<f64>();
            if pivot > tol {
                for (m, v) in row.into_iter().enumerate() {
                    l[(k, m)] = v;
                }
                l[(k, k)] = pivot.sqrt();
                kept.push(c);
            } else {
                dropped.push(c);
            }
        }
        let k = kept.len();
        let chol = l.view((0, 0), (k, k)).into_owned();
        Self { kept, dropped, chol }
    }

    /// Solve `G[kept, kept] b = rhs` where `rhs` rows correspond to `kept`.
    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let y = self
            .chol
            .solve_lower_triangular(rhs)
            .expect("pivots are positive");
        self.chol
            .transpose()
            .solve_upper_triangular(&y)
            .expect("pivots are positive")
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }
}

/// Least-squares fit of each column of `y` (obs x k) on the columns of
/// `x` (obs x p), dropping collinear regressors.
#[derive(Debug, Clone)]
pub struct LstsqFit {
    /// Coefficients (kept regressors x k).
    pub coef: DMatrix<f64>,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub fitted: DMatrix<f64>,
}

pub fn lstsq(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<LstsqFit> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape("regressor and target rows differ".into()));
    }
    let gram = x.tr_mul(x);
    let cols: Vec<usize> = (0..x.ncols()).collect();
    let piv = PivotedGram::new(&gram, &cols, 1e-12);
    if piv.rank() == 0 {
        return Err(Error::Conditioning("no usable regressors".into()));
    }
    let xk = x.select_columns(&piv.kept);
    let coef = piv.solve(&xk.tr_mul(y));
    let fitted = &xk * &coef;
    Ok(LstsqFit {
        coef,
        kept: piv.kept,
        dropped: piv.dropped,
        fitted,
    })
}

/// Subtract column means in place.
pub fn center_columns(m: &mut DMatrix<f64>) {
    for mut c in m.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
}

/// Subtract row means.
pub fn center_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut r in out.row_iter_mut() {
        let mean = r.mean();
        r.add_scalar_mut(-mean);
    }
    out
}

/// Inverse square root of a symmetric positive definite matrix.
fn inv_sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(a);
    let top = vals.first().copied().unwrap_or(0.0);
    if vals.iter().any(|&v| v <= 1e-14 * top.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegeneratePanel);
    }
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| 1.0 / v.sqrt()),
    ));
    Ok(&vecs * d * vecs.transpose())
}

/// Canonical correlations between the rows of `a` (p x T) and `b` (r x T),
/// descending. Both inputs are centred first.
pub fn canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape("canonical correlation inputs differ in length".into()));
    }
    let t = a.ncols() as f64;
    let ac = center_rows(a);
    let bc = center_rows(b);
    let saa = &ac * ac.transpose() / t;
    let sbb = &bc * bc.transpose() / t;
    let sab = &ac * bc.transpose() / t;
    let m = inv_sqrt_spd(&saa)? * sab * inv_sqrt_spd(&sbb)?;
    let mut sv: Vec<f64> = m.singular_values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// Pearson correlation of two equal-length slices.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Ordinary least-squares slope of `ys` on `xs` with its standard error.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, se)
}

/// Sample variance with divisor `n`.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
}
