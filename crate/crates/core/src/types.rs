//! Domain types shared by every module.
//!
//! All types are immutable value objects after construction; constructors
//! validate their invariants and return [`Error`] on violation.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// An `n x T` panel of observations: one row per series, one column per time.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: DMatrix<f64>,
    series_ids: Vec<String>,
    t0: i64,
}

impl Panel {
    pub fn new(values: DMatrix<f64>, series_ids: Vec<String>, t0: i64) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Shape(format!(
                "panel must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if series_ids.len() != values.nrows() {
            return Err(Error::Shape(format!(
                "{} series ids for {} rows",
                series_ids.len(),
                values.nrows()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("panel contains non-finite values".into()));
        }
        Ok(Self {
            values,
            series_ids,
            t0,
        })
    }

    /// Panel with default ids `prefix1..prefixN` and time origin 0.
    pub fn from_values(values: DMatrix<f64>, prefix: &str) -> Result<Self> {
        let ids = (1..=values.nrows()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(values, ids, 0)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    /// Number of series.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last time index.
    pub fn t_end(&self) -> i64 {
        self.t0 + self.len() as i64
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Subtract each row's sample mean. The input is left untouched.
    pub fn demean(&self) -> Result<Self> {
        if self.len() < 2 {
            return Err(Error::DegenerateInput(
                "demeaning needs at least two time points".into(),
            ));
        }
        let mut values = self.values.clone();
        for mut row in values.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        Ok(Self {
            values,
            series_ids: self.series_ids.clone(),
            t0: self.t0,
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::Shape(format!("row {bad} out of range for n = {}", self.n())));
        }
        let values = self.values.select_rows(rows);
        let ids = rows.iter().map(|&r| self.series_ids[r].clone()).collect();
        Self::new(values, ids, self.t0)
    }

    /// Columns for absolute times `start..end`.
    pub fn time_range(&self, start: i64, end: i64) -> Result<Self> {
        if start < self.t0 || end > self.t_end() || start >= end {
            return Err(Error::Shape(format!(
                "time range {start}..{end} outside {}..{}",
                self.t0,
                self.t_end()
            )));
        }
        let off = (start - self.t0) as usize;
        let len = (end - start) as usize;
        let values = self.values.columns(off, len).into_owned();
        Self::new(values, self.series_ids.clone(), start)
    }

    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::new(values, self.series_ids.clone(), self.t0)
    }
}

/// A finite matrix polynomial `K(0) + K(1) z + ... + K(p) z^p` in the lag operator.
///
/// Trailing all-zero coefficients are trimmed so the degree is canonical; the
/// zero polynomial keeps a single zero coefficient and has degree 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<Vec<f64>>>", try_from = "Vec<Vec<Vec<f64>>>")]
pub struct MatrixPolynomial {
    coeffs: Vec<DMatrix<f64>>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Shape("matrix polynomial needs a coefficient".into()))?;
        let (r, c) = first.shape();
        if r == 0 || c == 0 {
            return Err(Error::Shape("coefficient matrices must be non-empty".into()));
        }
        if coeffs.iter().any(|m| m.shape() != (r, c)) {
            return Err(Error::Shape("coefficient matrices differ in shape".into()));
        }
        if coeffs.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::DegenerateInput("non-finite coefficient".into()));
        }
        Ok(Self::from_coeffs_unchecked(coeffs))
    }

    fn from_coeffs_unchecked(mut coeffs: Vec<DMatrix<f64>>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|m| m.iter().all(|&v| v == 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// Scalar polynomial from coefficients in increasing lag order.
    pub fn scalar(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Shape("scalar polynomial needs a coefficient".into()));
        }
        Self::new(coeffs.iter().map(|&c| DMatrix::from_element(1, 1, c)).collect())
    }

    /// `1 x q` row polynomial from `[lag][shock]` coefficients.
    pub fn row_from_lags(lags: &[Vec<f64>]) -> Result<Self> {
        let q = lags.first().map(Vec::len).unwrap_or(0);
        if lags.iter().any(|l| l.len() != q) {
            return Err(Error::Shape("lags disagree on the number of shocks".into()));
        }
        Self::new(lags.iter().map(|l| DMatrix::from_row_slice(1, q, l)).collect())
    }

    pub fn constant(m: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![m])
    }

    pub fn identity(q: usize) -> Self {
        Self::from_coeffs_unchecked(vec![DMatrix::identity(q, q)])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_coeffs_unchecked(vec![DMatrix::zeros(rows, cols)])
    }

    pub fn rows(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Coefficient at `lag`, zero beyond the degree.
    pub fn coeff(&self, lag: usize) -> DMatrix<f64> {
        self.coeffs
            .get(lag)
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.rows(), self.cols()))
    }

    pub fn is_scalar(&self) -> bool {
        self.rows() == 1 && self.cols() == 1
    }

    /// Coefficients of a `1 x 1` polynomial.
    pub fn scalar_coeffs(&self) -> Result<Vec<f64>> {
        if !self.is_scalar() {
            return Err(Error::Shape(format!(
                "expected a scalar polynomial, got {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        Ok(self.coeffs.iter().map(|m| m[(0, 0)]).collect())
    }

    /// Whether every coefficient is below `tol` in absolute value.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|m| m.iter().all(|v| v.abs() < tol))
    }

    /// Re-apply canonical trimming; a no-op for polynomials built through
    /// the public constructors.
    pub fn normalized(&self) -> Self {
        Self::from_coeffs_unchecked(self.coeffs.clone())
    }

    /// Drop trailing coefficients whose entries are all below `rel * max|entry|`.
    pub fn trimmed(&self, rel: f64) -> Self {
        let scale = self.max_abs();
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1
            && coeffs
                .last()
                .is_some_and(|m| m.iter().all(|v| v.abs() <= rel * scale))
        {
            coeffs.pop();
        }
        Self::from_coeffs_unchecked(coeffs)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Sum of squared coefficient entries.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|m| m.norm_squared()).sum()
    }

    /// Evaluate `sum_j K(j) z^j` by Horner's rule.
    pub fn eval(&self, z: C64) -> DMatrix<C64> {
        let mut acc = self.coeffs[self.degree()].map(|v| C64::new(v, 0.0));
        for k in self.coeffs[..self.degree()].iter().rev() {
            acc *= z;
            acc += k.map(|v| C64::new(v, 0.0));
        }
        acc
    }

    /// Frequency response `k(e^{-i theta})`.
    pub fn eval_freq(&self, theta: f64) -> DMatrix<C64> {
        self.eval(C64::from_polar(1.0, -theta))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_coeffs_unchecked(self.coeffs.iter().map(|m| m * a).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::Shape("cannot add polynomials of different shapes".into()));
        }
        let len = self.coeffs.len().max(other.coeffs.len());
        Ok(Self::from_coeffs_unchecked(
            (0..len).map(|j| self.coeff(j) + other.coeff(j)).collect(),
        ))
    }

    pub fn transpose(&self) -> Self {
        Self::from_coeffs_unchecked(self.coeffs.iter().map(|m| m.transpose()).collect())
    }

    /// Row `i` as a `1 x cols` polynomial.
    pub fn row(&self, i: usize) -> Self {
        Self::from_coeffs_unchecked(self.coeffs.iter().map(|m| m.rows(i, 1).into_owned()).collect())
    }

    /// Vertical concatenation of polynomials sharing a column count.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("nothing to stack".into()))?;
        let cols = first.cols();
        if parts.iter().any(|p| p.cols() != cols) {
            return Err(Error::Shape("stacked polynomials differ in columns".into()));
        }
        let rows: usize = parts.iter().map(|p| p.rows()).sum();
        let len = parts.iter().map(|p| p.coeffs.len()).max().unwrap_or(1);
        let coeffs = (0..len)
            .map(|j| {
                let mut m = DMatrix::zeros(rows, cols);
                let mut r0 = 0;
                for p in parts {
                    m.view_mut((r0, 0), (p.rows(), cols)).copy_from(&p.coeff(j));
                    r0 += p.rows();
                }
                m
            })
            .collect();
        Ok(Self::from_coeffs_unchecked(coeffs))
    }

    /// Truncate to lags `0..=degree`.
    pub fn truncated(&self, degree: usize) -> Self {
        Self::from_coeffs_unchecked(self.coeffs.iter().take(degree + 1).cloned().collect())
    }

    /// Nested `[lag][row][col]` arrays.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        self.coeffs
            .iter()
            .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect()
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let coeffs = nested
            .iter()
            .map(|lag| {
                let rows = lag.len();
                let cols = lag.first().map(Vec::len).unwrap_or(0);
                if lag.iter().any(|r| r.len() != cols) {
                    return Err(Error::Shape("ragged coefficient matrix".into()));
                }
                let flat: Vec<f64> = lag.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(rows, cols, &flat))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }
}

impl From<MatrixPolynomial> for Vec<Vec<Vec<f64>>> {
    fn from(p: MatrixPolynomial) -> Self {
        p.to_nested()
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for MatrixPolynomial {
    type Error = Error;

    fn try_from(v: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::from_nested(&v)
    }
}

/// `M` frequencies `theta_m = -pi + 2 pi m / M`, `m = 1..=M`.
///
/// For even `M` the grid contains `0` and `pi` and is symmetric about zero
/// (with `-pi` identified with `pi`).
pub fn frequency_grid(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|k| -PI + 2.0 * PI * k as f64 / m as f64)
        .collect()
}

/// Hermitian positive semi-definite matrices on a frequency grid.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    freqs: Vec<f64>,
    mats: Vec<DMatrix<C64>>,
}

impl SpectralGrid {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const PSD_TOL: f64 = -1e-8;

    /// Validate and store. Matrices are symmetrised as `(A + A*) / 2` after
    /// the Hermitian check, so stored matrices are exactly Hermitian.
    pub fn new(freqs: Vec<f64>, mats: Vec<DMatrix<C64>>) -> Result<Self> {
        if freqs.len() != mats.len() || freqs.is_empty() {
            return Err(Error::Shape(format!(
                "{} frequencies for {} matrices",
                freqs.len(),
                mats.len()
            )));
        }
        if freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("frequencies must be strictly increasing".into()));
        }
        if freqs.iter().any(|&f| f <= -PI || f > PI) {
            return Err(Error::Config("frequencies must lie in (-pi, pi]".into()));
        }
        let n = mats[0].nrows();
        let mut out = Vec::with_capacity(mats.len());
        for m in mats {
            if m.shape() != (n, n) {
                return Err(Error::Shape("spectral matrices must be square and equal".into()));
            }
            let scale = m.iter().fold(1.0_f64, |a, v| a.max(v.norm()));
            let asym = (&m - m.adjoint()).iter().fold(0.0_f64, |a, v| a.max(v.norm()));
            if asym > Self::HERMITIAN_TOL * scale {
                return Err(Error::DegenerateInput(format!(
                    "matrix not Hermitian (deviation {asym:.3e})"
                )));
            }
            let h = (&m + m.adjoint()).scale(0.5);
            let min_eig = h
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::INFINITY, |a, &v| a.min(v));
            if min_eig < Self::PSD_TOL * scale {
                return Err(Error::DegenerateInput(format!(
                    "matrix not positive semi-definite (min eigenvalue {min_eig:.3e})"
                )));
            }
            out.push(h);
        }
        Ok(Self { freqs, mats: out })
    }

    /// Store matrices known to be Hermitian PSD by construction, after
    /// exact symmetrisation.
    pub(crate) fn from_hermitian_parts(freqs: Vec<f64>, mats: Vec<DMatrix<C64>>) -> Self {
        let mats = mats.into_iter().map(|m| (&m + m.adjoint()).scale(0.5)).collect();
        Self { freqs, mats }
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn mats(&self) -> &[DMatrix<C64>] {
        &self.mats
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Top-left `n x n` sub-grid (the spectrum of the first `n` series).
    pub fn leading(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.dim() {
            return Err(Error::Shape(format!("cannot take {n} of {} series", self.dim())));
        }
        Ok(Self {
            freqs: self.freqs.clone(),
            mats: self
                .mats
                .iter()
                .map(|m| m.view((0, 0), (n, n)).into_owned())
                .collect(),
        })
    }
}

/// A `q x T` series of shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSeries {
    values: DMatrix<f64>,
    normalized: bool,
    t0: i64,
}

impl ShockSeries {
    pub fn new(values: DMatrix<f64>, normalized: bool, t0: i64) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Shape("shock series must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("shock series has non-finite values".into()));
        }
        Ok(Self {
            values,
            normalized,
            t0,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn q(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn t_end(&self) -> i64 {
        self.t0 + self.len() as i64
    }

    /// Whether the series targets `V[eps_t] = I_q`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn as_panel(&self, prefix: &str) -> Panel {
        let ids = (1..=self.q()).map(|i| format!("{prefix}{i}")).collect();
        Panel::new(self.values.clone(), ids, self.t0).expect("validated on construction")
    }

    pub fn from_panel(panel: &Panel, normalized: bool) -> Self {
        Self {
            values: panel.values().clone(),
            normalized,
            t0: panel.t0(),
        }
    }

    /// Columns for absolute times `start..end`.
    pub fn time_range(&self, start: i64, end: i64) -> Result<Self> {
        if start < self.t0 || end > self.t_end() || start >= end {
            return Err(Error::Shape(format!(
                "time range {start}..{end} outside {}..{}",
                self.t0,
                self.t_end()
            )));
        }
        let off = (start - self.t0) as usize;
        Self::new(
            self.values.columns(off, (end - start) as usize).into_owned(),
            self.normalized,
            start,
        )
    }
}

/// A per-series parameter: one value for every series, or one per series
/// (recycled cyclically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSeries {
    Scalar(f64),
    Each(Vec<f64>),
}

impl PerSeries {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            PerSeries::Scalar(v) => *v,
            PerSeries::Each(v) => v[i % v.len()],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            PerSeries::Scalar(v) => vec![*v],
            PerSeries::Each(v) => v.clone(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        match self {
            PerSeries::Scalar(v) => PerSeries::Scalar(v * a),
            PerSeries::Each(v) => PerSeries::Each(v.iter().map(|x| x * a).collect()),
        }
    }
}

/// Idiosyncratic generator: per-series AR(1) with optional one-neighbour
/// cross-sectional MA coupling of the innovations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdioSpec {
    pub ar: PerSeries,
    pub sigma: PerSeries,
    #[serde(default)]
    pub coupling: f64,
}

impl IdioSpec {
    pub fn off() -> Self {
        Self {
            ar: PerSeries::Scalar(0.0),
            sigma: PerSeries::Scalar(0.0),
            coupling: 0.0,
        }
    }

    pub fn ar1(ar: f64, sigma: f64) -> Self {
        Self {
            ar: PerSeries::Scalar(ar),
            sigma: PerSeries::Scalar(sigma),
            coupling: 0.0,
        }
    }
}

/// Generating spec for a simulated GDFM panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GdfmSpecFile", into = "GdfmSpecFile")]
pub struct GdfmSpec {
    pub q: usize,
    /// One `1 x q` filter per series.
    pub common_filters: Vec<MatrixPolynomial>,
    pub idio: IdioSpec,
    pub seed: u64,
}

impl GdfmSpec {
    pub fn new(q: usize, common_filters: Vec<MatrixPolynomial>, idio: IdioSpec, seed: u64) -> Result<Self> {
        let spec = Self {
            q,
            common_filters,
            idio,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check every structural invariant. An all-zero filter family is
    /// accepted here (it simulates a purely idiosyncratic panel) and
    /// rejected later by blocking.
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Spec("q must be at least 1".into()));
        }
        if self.common_filters.is_empty() {
            return Err(Error::Spec("at least one filter row is required".into()));
        }
        for (i, f) in self.common_filters.iter().enumerate() {
            if f.rows() != 1 || f.cols() != self.q {
                return Err(Error::Spec(format!(
                    "filter {i} is {}x{}, expected 1x{}",
                    f.rows(),
                    f.cols(),
                    self.q
                )));
            }
        }
        let ar = self.idio.ar.values();
        let sigma = self.idio.sigma.values();
        if ar.is_empty() || sigma.is_empty() {
            return Err(Error::Spec("idiosyncratic parameters must be non-empty".into()));
        }
        if let Some(a) = ar.iter().find(|a| !(a.abs() < 1.0)) {
            return Err(Error::Spec(format!("AR coefficient {a} must lie in (-1, 1)")));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::Spec(format!("innovation std {s} must be finite and >= 0")));
        }
        if !self.idio.coupling.is_finite() {
            return Err(Error::Spec("coupling must be finite".into()));
        }
        Ok(())
    }

    /// Filter for series `i`, recycling rows cyclically.
    pub fn filter(&self, i: usize) -> &MatrixPolynomial {
        &self.common_filters[i % self.common_filters.len()]
    }

    pub fn max_degree(&self) -> usize {
        self.common_filters.iter().map(|f| f.degree()).max().unwrap_or(0)
    }

    /// The filters for the first `n` series.
    pub fn filters_for(&self, n: usize) -> Vec<MatrixPolynomial> {
        (0..n).map(|i| self.filter(i).clone()).collect()
    }
}

/// On-disk JSON layout of [`GdfmSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdfmSpecFile {
    pub q: usize,
    /// `[series][lag][shock]`.
    pub filters: Vec<Vec<Vec<f64>>>,
    pub idio: IdioSpec,
    #[serde(default)]
    pub seed: u64,
}

impl TryFrom<GdfmSpecFile> for GdfmSpec {
    type Error = Error;

    fn try_from(f: GdfmSpecFile) -> Result<Self> {
        let filters = f
            .filters
            .iter()
            .enumerate()
            .map(|(i, lags)| {
                if lags.is_empty() {
                    return Err(Error::Spec(format!("filter {i} has no lags")));
                }
                if let Some(l) = lags.iter().find(|l| l.len() != f.q) {
                    return Err(Error::Spec(format!(
                        "filter {i} has {} shock coefficients, q = {}",
                        l.len(),
                        f.q
                    )));
                }
                MatrixPolynomial::row_from_lags(lags)
            })
            .collect::<Result<Vec<_>>>()?;
        GdfmSpec::new(f.q, filters, f.idio, f.seed)
    }
}

impl From<GdfmSpec> for GdfmSpecFile {
    fn from(s: GdfmSpec) -> Self {
        Self {
            q: s.q,
            filters: s
                .common_filters
                .iter()
                .map(|f| f.coeffs().iter().map(|m| m.iter().copied().collect()).collect())
                .collect(),
            idio: s.idio,
            seed: s.seed,
        }
    }
}
