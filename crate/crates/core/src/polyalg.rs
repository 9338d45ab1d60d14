//! Matrix-polynomial algebra: products, determinants, adjugates, roots,
//! causal inversion, zero mirroring and unit-circle factoring.
//!
//! Polynomials are in the lag operator, `k(z) = sum_j K(j) z^j`. A zero of a
//! scalar polynomial inside the unit disc (`|z| < 1`) makes the associated
//! filter non-invertible in the causal direction; zeros outside the disc are
//! harmless. Frequency responses use `z = exp(-i theta)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{interpolate_on_unit_roots, singular_values_desc, unit_roots};
use crate::types::{frequency_grid, MatrixPolynomial, C64};

/// Default half-width of the band around the unit circle treated as "on" it.
pub const DEFAULT_RHO: f64 = 1e-6;

/// Largest square size accepted by [`poly_det`] and [`poly_adjugate`].
pub const MAX_DET_DIM: usize = 6;

/// Coefficient convolution `a(z) b(z)`.
pub fn poly_mul(a: &MatrixPolynomial, b: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    if a.cols() != b.rows() {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let deg = a.degree() + b.degree();
    let mut out = vec![DMatrix::zeros(a.rows(), b.cols()); deg + 1];
    for (i, ai) in a.coeffs().iter().enumerate() {
        for (j, bj) in b.coeffs().iter().enumerate() {
            out[i + j].gemm(1.0, ai, bj, 1.0);
        }
    }
    MatrixPolynomial::new(out)
}

fn require_square(p: &MatrixPolynomial) -> Result<usize> {
    if p.rows() != p.cols() {
        return Err(Error::Shape(format!(
            "expected a square polynomial, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }
    if p.rows() > MAX_DET_DIM {
        return Err(Error::Precondition(format!(
            "determinants are limited to {MAX_DET_DIM}x{MAX_DET_DIM} blocks"
        )));
    }
    Ok(p.rows())
}

/// Real scalar polynomial from values at `n` unit roots, with tiny trailing
/// coefficients (relative `1e-13`) trimmed.
fn scalar_from_samples(values: &[C64]) -> Result<MatrixPolynomial> {
    let coeffs: Vec<f64> = interpolate_on_unit_roots(values).iter().map(|c| c.re).collect();
    Ok(MatrixPolynomial::scalar(&coeffs)?.trimmed(1e-13))
}

/// Determinant of a square matrix polynomial as a `1 x 1` polynomial.
///
/// The determinant has degree at most `q * deg(p)`; it is evaluated at
/// `q * deg(p) + 1` roots of unity and interpolated.
pub fn poly_det(p: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let q = require_square(p)?;
    if q == 1 {
        return Ok(p.clone());
    }
    let npts = q * p.degree() + 1;
    let values: Vec<C64> = unit_roots(npts)
        .iter()
        .map(|&z| p.eval(z).determinant())
        .collect();
    scalar_from_samples(&values)
}

/// Adjugate `adj k(z)` so that `adj(k) k = det(k) I`.
pub fn poly_adjugate(p: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let q = require_square(p)?;
    if q == 1 {
        return Ok(MatrixPolynomial::identity(1));
    }
    let npts = (q - 1) * p.degree() + 1;
    let samples: Vec<DMatrix<C64>> = unit_roots(npts)
        .iter()
        .map(|&z| cofactor_transpose(&p.eval(z)))
        .collect();
    let mut coeffs: Vec<DMatrix<f64>> = vec![DMatrix::zeros(q, q); npts];
    for r in 0..q {
        for c in 0..q {
            let vals: Vec<C64> = samples.iter().map(|m| m[(r, c)]).collect();
            for (j, v) in interpolate_on_unit_roots(&vals).iter().enumerate() {
                coeffs[j][(r, c)] = v.re;
            }
        }
    }
    Ok(MatrixPolynomial::new(coeffs)?.trimmed(1e-13))
}

fn cofactor_transpose(m: &DMatrix<C64>) -> DMatrix<C64> {
    let q = m.nrows();
    DMatrix::from_fn(q, q, |r, c| {
        // adj[r][c] = (-1)^{r+c} * minor(c, r)
        let minor = m.clone().remove_row(c).remove_column(r);
        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
        minor.determinant() * sign
    })
}

fn eval_scalar(coeffs: &[f64], z: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_scalar_derivative(coeffs: &[f64], z: C64) -> C64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, (j, &c)| acc * z + c * j as f64)
}

/// All complex roots (with multiplicity) of a scalar polynomial.
///
/// Roots are eigenvalues of the companion matrix, each polished by one
/// Newton step when that step reduces the residual. A non-zero constant has
/// no roots.
pub fn scalar_roots(p: &MatrixPolynomial) -> Result<Vec<C64>> {
    let c = p.scalar_coeffs()?;
    if c.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroPolynomial);
    }
    let deg = c.len() - 1;
    match deg {
        0 => Ok(Vec::new()),
        1 => Ok(vec![C64::new(-c[0] / c[1], 0.0)]),
        _ => {
            let lead = c[deg];
            let mut companion = DMatrix::<f64>::zeros(deg, deg);
            for i in 1..deg {
                companion[(i, i - 1)] = 1.0;
            }
            for i in 0..deg {
                companion[(i, deg - 1)] = -c[i] / lead;
            }
            let eig = companion.complex_eigenvalues();
            Ok(eig.iter().map(|&z| newton_polish(&c, z)).collect())
        }
    }
}

fn newton_polish(c: &[f64], z: C64) -> C64 {
    let f = eval_scalar(c, z);
    let df = eval_scalar_derivative(c, z);
    if df.norm() == 0.0 || !df.norm().is_finite() {
        return z;
    }
    let cand = z - f / df;
    if eval_scalar(c, cand).norm() < f.norm() {
        cand
    } else {
        z
    }
}

/// Roots of a scalar polynomial partitioned by modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroClassification {
    /// `|z| < 1 - rho`.
    pub inside: Vec<[f64; 2]>,
    /// `1 - rho <= |z| <= 1 + rho`.
    pub on_circle: Vec<[f64; 2]>,
    /// `|z| > 1 + rho`.
    pub outside: Vec<[f64; 2]>,
    pub rho: f64,
}

impl ZeroClassification {
    pub fn inside_roots(&self) -> Vec<C64> {
        self.inside.iter().map(|z| C64::new(z[0], z[1])).collect()
    }

    pub fn on_circle_roots(&self) -> Vec<C64> {
        self.on_circle.iter().map(|z| C64::new(z[0], z[1])).collect()
    }

    pub fn outside_roots(&self) -> Vec<C64> {
        self.outside.iter().map(|z| C64::new(z[0], z[1])).collect()
    }

    /// No zeros inside or on the unit circle.
    pub fn is_strictly_minimum_phase(&self) -> bool {
        self.inside.is_empty() && self.on_circle.is_empty()
    }

    pub fn len(&self) -> usize {
        self.inside.len() + self.on_circle.len() + self.outside.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Partition the roots of `p` into inside / on / outside the unit circle.
pub fn classify_zeros(p: &MatrixPolynomial, rho: f64) -> Result<ZeroClassification> {
    if !(rho > 0.0) {
        return Err(Error::Precondition("ring tolerance must be positive".into()));
    }
    let roots = scalar_roots(p)?;
    Ok(classify_roots(&roots, rho))
}

pub(crate) fn classify_roots(roots: &[C64], rho: f64) -> ZeroClassification {
    let mut out = ZeroClassification {
        inside: Vec::new(),
        on_circle: Vec::new(),
        outside: Vec::new(),
        rho,
    };
    for z in roots {
        let m = z.norm();
        let pair = [z.re, z.im];
        if m < 1.0 - rho {
            out.inside.push(pair);
        } else if m <= 1.0 + rho {
            out.on_circle.push(pair);
        } else {
            out.outside.push(pair);
        }
    }
    out
}

/// Divide `p(z)` (coefficients low to high) by `(z - r)`, dropping the remainder.
fn deflate(p: &[C64], r: C64) -> Vec<C64> {
    let n = p.len() - 1;
    let mut q = vec![C64::new(0.0, 0.0); n];
    let mut carry = p[n];
    for k in (0..n).rev() {
        q[k] = carry;
        carry = p[k] + r * carry;
    }
    q
}

fn mul_linear(p: &[C64], c0: C64, c1: C64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); p.len() + 1];
    for (k, &v) in p.iter().enumerate() {
        out[k] += v * c0;
        out[k + 1] += v * c1;
    }
    out
}

/// Reflect every zero inside the unit disc to `1 / conj(z)`.
///
/// The result has the same magnitude response as `p` on the unit circle and
/// no zeros inside the disc. The sign is chosen so that the constant term
/// keeps the sign of `p(0)`.
pub fn mirror_inside_zeros(p: &MatrixPolynomial, rho: f64) -> Result<MatrixPolynomial> {
    let cls = classify_zeros(p, rho)?;
    if let Some(z) = cls.on_circle.first() {
        return Err(Error::OnCircleZero {
            modulus: C64::new(z[0], z[1]).norm(),
        });
    }
    if cls.inside.is_empty() {
        return Ok(p.clone());
    }
    let c = p.scalar_coeffs()?;
    let mut work: Vec<C64> = c.iter().map(|&v| C64::new(v, 0.0)).collect();
    for r in cls.inside_roots() {
        // (z - r) has the same modulus as (1 - conj(r) z) on |z| = 1
        work = deflate(&work, r);
        work = mul_linear(&work, C64::new(1.0, 0.0), -r.conj());
    }
    let mut out: Vec<f64> = work.iter().map(|v| v.re).collect();
    let sign_ref = if c[0] != 0.0 { c[0].signum() } else { 1.0 };
    if out[0] * sign_ref < 0.0 {
        out.iter_mut().for_each(|v| *v = -*v);
    }
    MatrixPolynomial::scalar(&out)
}

/// Group roots lying within `tol` of each other and replace each group by its
/// mean; multiple roots come back from the eigen-solver as small clusters.
fn merge_clusters(roots: &[C64], tol: f64) -> Vec<C64> {
    let mut used = vec![false; roots.len()];
    let mut out = Vec::with_capacity(roots.len());
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        used[i] = true;
        for j in i + 1..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() < tol {
                used[j] = true;
                members.push(j);
            }
        }
        let mean = members.iter().map(|&k| roots[k]).sum::<C64>() / members.len() as f64;
        out.extend(std::iter::repeat_n(mean, members.len()));
    }
    out
}

/// Polynomial long division `p / g` for scalar coefficient vectors; returns
/// the quotient.
fn long_divide(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dp = p.len() - 1;
    let dg = g.len() - 1;
    if dp < dg {
        return vec![0.0];
    }
    let mut rem = p.to_vec();
    let mut quot = vec![0.0; dp - dg + 1];
    for k in (0..=dp - dg).rev() {
        let coef = rem[k + dg] / g[dg];
        quot[k] = coef;
        for (j, &gj) in g.iter().enumerate() {
            rem[k + j] -= coef * gj;
        }
    }
    quot
}

/// Split `p = g h` where `g` collects the zeros on the unit circle.
///
/// `g(z) = prod_k (1 - z / z_k)^{m_k}` is normalised to `g(0) = 1`; `h` is
/// obtained by polynomial division and has no zeros on the circle.
pub fn factor_unit_circle_zeros(
    p: &MatrixPolynomial,
    rho: f64,
) -> Result<(MatrixPolynomial, MatrixPolynomial)> {
    let cls = classify_zeros(p, rho)?;
    if cls.on_circle.is_empty() {
        return Ok((MatrixPolynomial::identity(1), p.clone()));
    }
    let on = merge_clusters(&cls.on_circle_roots(), 1e-5);
    let mut g = vec![C64::new(1.0, 0.0)];
    for z in &on {
        g = mul_linear(&g, C64::new(1.0, 0.0), -z.inv());
    }
    let g: Vec<f64> = g.iter().map(|v| v.re).collect();
    let h = long_divide(&p.scalar_coeffs()?, &g);
    Ok((MatrixPolynomial::scalar(&g)?, MatrixPolynomial::scalar(&h)?))
}

/// Options for [`causal_inverse_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseOptions {
    /// Initial truncation length of the inverse series.
    pub l_max: usize,
    /// Square case: the series is lengthened (doubling) until the residual
    /// energy of `inverse * k - I` drops below this.
    pub tail_tol: f64,
    /// Hard cap on the series length.
    pub max_len: usize,
    /// Residual energy above which no causal left inverse is deemed to
    /// exist (stacked case, or a square series capped at `max_len`).
    pub residual_tol: f64,
    /// Ring tolerance for zeros on the unit circle.
    pub rho: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            l_max: 64,
            tail_tol: 1e-8,
            max_len: 4096,
            residual_tol: 1e-6,
            rho: DEFAULT_RHO,
        }
    }
}

/// How a causal inverse was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseKind {
    /// Adjugate times the power series of `1 / det`.
    Square,
    /// Shortest exact FIR left inverse (minimum norm at that length).
    StackedExact,
    /// Least-squares truncated left inverse (IIR left inverse exists).
    StackedApprox,
}

impl InverseOptions {
    /// Zeros of modulus up to this radius decay too slowly for a series of
    /// `max_len` lags to reach `tail_tol`.
    pub fn slow_radius(&self) -> f64 {
        self.tail_tol.powf(-1.0 / (2.0 * self.max_len as f64))
    }
}

/// A truncated causal (left) inverse series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalInverse {
    pub series: MatrixPolynomial,
    pub kind: InverseKind,
    /// Max abs deviation of lag 0 of `series * k` from the identity.
    pub lag0_error: f64,
    /// Energy of lags `>= 1` of `series * k`.
    pub residual_energy: f64,
}

/// Deviation of `c * k` from the identity: (max abs error at lag 0, energy
/// at lags >= 1).
pub fn inverse_residual(c: &MatrixPolynomial, k: &MatrixPolynomial) -> Result<(f64, f64)> {
    let prod = poly_mul(c, k)?;
    let q = prod.rows();
    let lag0 = prod.coeff(0) - DMatrix::<f64>::identity(q, prod.cols());
    let lag0_err = lag0.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let rest: f64 = prod.coeffs().iter().skip(1).map(|m| m.norm_squared()).sum();
    Ok((lag0_err, rest))
}

/// Power series of `1 / d(z)` up to lag `len - 1`. Requires `d(0) != 0`.
pub fn series_reciprocal(d: &[f64], len: usize) -> Vec<f64> {
    let mut a = vec![0.0; len];
    if len == 0 {
        return a;
    }
    a[0] = 1.0 / d[0];
    for n in 1..len {
        let s: f64 = (1..=n.min(d.len() - 1)).map(|j| d[j] * a[n - j]).sum();
        a[n] = -s / d[0];
    }
    a
}

/// Normalised Gram determinants of `k` on `m` grid frequencies: for each
/// frequency `det(G) / max_theta prod diag(G)` with `G = k* k` (or `k k*`
/// when `k` has fewer rows than columns).
pub fn gram_det_profile(k: &MatrixPolynomial, m: usize) -> Vec<(f64, f64)> {
    let freqs = frequency_grid(m);
    let raw: Vec<(f64, f64)> = freqs
        .iter()
        .map(|&th| {
            let v = k.eval_freq(th);
            let g = if v.nrows() >= v.ncols() {
                v.adjoint() * &v
            } else {
                &v * v.adjoint()
            };
            let hadamard: f64 = g.diagonal().iter().map(|d| d.re).product();
            (g.determinant().re.max(0.0), hadamard)
        })
        .collect();
    let scale = raw.iter().fold(0.0_f64, |a, r| a.max(r.1));
    freqs
        .iter()
        .zip(raw)
        .map(|(&th, (det, _))| (th, if scale > 0.0 { det / scale } else { 0.0 }))
        .collect()
}

/// Smallest `min(r, c)`-th singular value of `k(e^{-i theta})` over `m` grid points.
pub fn min_singular_on_grid(k: &MatrixPolynomial, m: usize) -> f64 {
    let rank = k.rows().min(k.cols());
    frequency_grid(m)
        .iter()
        .map(|&th| singular_values_desc(&k.eval_freq(th))[rank - 1])
        .fold(f64::INFINITY, f64::min)
}

/// Largest spectral norm of `k(e^{-i theta})` over `m` grid points.
pub fn max_gain_on_grid(k: &MatrixPolynomial, m: usize) -> f64 {
    frequency_grid(m)
        .iter()
        .map(|&th| singular_values_desc(&k.eval_freq(th))[0])
        .fold(0.0, f64::max)
}

/// Truncated causal left inverse of a `q_j x q` block (`q_j >= q`).
///
/// Square blocks: `adj(k) / det(k)` with `1 / det` expanded as a power
/// series, which requires every zero of `det k` to lie strictly outside the
/// closed unit disc. Stacked blocks: the shortest FIR left inverse, found by
/// solving the block-Toeplitz identity `sum_a C(a) K(m - a) = [m = 0] I`
/// for increasing lengths; if no FIR inverse up to `l_max` exists, the
/// least-squares solution is accepted when its residual is below
/// `residual_tol`.
pub fn causal_inverse_series(k: &MatrixPolynomial, opts: &InverseOptions) -> Result<CausalInverse> {
    let (r, q) = (k.rows(), k.cols());
    if r < q {
        return Err(Error::Shape(format!("block is {r}x{q}; need at least {q} rows")));
    }
    if opts.l_max < k.degree() {
        return Err(Error::Precondition(format!(
            "truncation length {} is below the block degree {}",
            opts.l_max,
            k.degree()
        )));
    }
    let profile = gram_det_profile(k, 64);
    if profile.iter().all(|&(_, d)| d < 1e-10) {
        return Err(Error::RankDeficient);
    }
    if r == q {
        square_inverse(k, opts)
    } else {
        stacked_inverse(k, opts)
    }
}

fn square_inverse(k: &MatrixPolynomial, opts: &InverseOptions) -> Result<CausalInverse> {
    let det = poly_det(k)?;
    let roots = scalar_roots(&det)?;
    if let Some(z) = roots
        .iter()
        .filter(|z| z.norm() <= 1.0 + opts.rho)
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
    {
        return Err(Error::NotMinimumPhase { modulus: z.norm() });
    }
    let adj = poly_adjugate(k)?;
    let d = det.scalar_coeffs()?;
    let mut len = opts.l_max;
    loop {
        let recip = MatrixPolynomial::scalar(&series_reciprocal(&d, len + 1))?;
        let series = scale_poly(&adj, &recip)?.truncated(len);
        let (lag0_error, residual_energy) = inverse_residual(&series, k)?;
        if len >= opts.max_len && residual_energy > opts.residual_tol {
            // a zero this close to the circle needs a longer series than allowed
            return Err(Error::NotCausallyInvertible {
                residual: residual_energy,
            });
        }
        if residual_energy < opts.tail_tol || len >= opts.max_len {
            return Ok(CausalInverse {
                series,
                kind: InverseKind::Square,
                lag0_error,
                residual_energy,
            });
        }
        len = (len * 2).min(opts.max_len);
    }
}

/// Multiply a matrix polynomial by a scalar polynomial.
fn scale_poly(m: &MatrixPolynomial, s: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    let c = s.scalar_coeffs()?;
    let deg = m.degree() + c.len() - 1;
    let mut out = vec![DMatrix::zeros(m.rows(), m.cols()); deg + 1];
    for (i, mi) in m.coeffs().iter().enumerate() {
        for (j, &cj) in c.iter().enumerate() {
            if cj != 0.0 {
                out[i + j] += mi * cj;
            }
        }
    }
    MatrixPolynomial::new(out)
}

/// Min-norm least-squares solution of the length-`len` left-inverse system;
/// returns the series and the residual energy `||X T - E||^2`.
fn fir_left_inverse(k: &MatrixPolynomial, len: usize) -> Result<(MatrixPolynomial, f64)> {
    let (r, q, p) = (k.rows(), k.cols(), k.degree());
    let n_unknown = r * (len + 1);
    let n_eq = q * (len + p + 1);
    // T^T X^T = E^T, with block (m, a) of T^T equal to K(m - a)^T
    let mut tt = DMatrix::<f64>::zeros(n_eq, n_unknown);
    for a in 0..=len {
        for (j, kj) in k.coeffs().iter().enumerate() {
            let m = a + j;
            tt.view_mut((m * q, a * r), (q, r)).copy_from(&kj.transpose());
        }
    }
    let mut et = DMatrix::<f64>::zeros(n_eq, q);
    et.view_mut((0, 0), (q, q)).fill_with_identity();
    let svd = tt.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let xt = svd
        .solve(&et, 1e-12 * smax)
        .map_err(|e| Error::Conditioning(e.to_string()))?;
    let resid = (&tt * &xt - &et).norm_squared();
    let coeffs = (0..=len)
        .map(|a| xt.view((a * r, 0), (r, q)).transpose())
        .collect();
    Ok((MatrixPolynomial::new(coeffs)?, resid))
}

fn stacked_inverse(k: &MatrixPolynomial, opts: &InverseOptions) -> Result<CausalInverse> {
    const EXACT: f64 = 1e-20;
    const STACKED_CAP: usize = 512;
    let exact = |len: usize| -> Result<Option<MatrixPolynomial>> {
        let (s, res) = fir_left_inverse(k, len)?;
        Ok((res < EXACT).then_some(s))
    };
    // exponential probe, then bisection for the shortest exact length
    let mut hi = None;
    let mut lo = 0usize;
    let mut len = 0usize;
    loop {
        if let Some(s) = exact(len)? {
            hi = Some((len, s));
            break;
        }
        lo = len + 1;
        if len >= opts.l_max {
            break;
        }
        len = if len == 0 { 1 } else { (len * 2).min(opts.l_max) };
    }
    if let Some((mut best_len, mut best)) = hi {
        while lo < best_len {
            let mid = (lo + best_len) / 2;
            match exact(mid)? {
                Some(s) => {
                    best_len = mid;
                    best = s;
                }
                None => lo = mid + 1,
            }
        }
        let (lag0_error, residual_energy) = inverse_residual(&best, k)?;
        return Ok(CausalInverse {
            series: best,
            kind: InverseKind::StackedExact,
            lag0_error,
            residual_energy,
        });
    }
    let cap = STACKED_CAP.min(opts.max_len).max(opts.l_max);
    let mut len = opts.l_max;
    let mut previous = f64::INFINITY;
    loop {
        let (series, _) = fir_left_inverse(k, len)?;
        let (lag0_error, residual_energy) = inverse_residual(&series, k)?;
        if residual_energy < opts.residual_tol && lag0_error < 1e-6 {
            return Ok(CausalInverse {
                series,
                kind: InverseKind::StackedApprox,
                lag0_error,
                residual_energy,
            });
        }
        // a common zero in the closed disc keeps the residual from decaying
        let stalled = residual_energy > 0.5 * previous;
        if stalled || len >= cap {
            return Err(Error::NotCausallyInvertible {
                residual: residual_energy,
            });
        }
        previous = residual_energy;
        len = (len * 2).min(cap);
    }
}

/// Lead coefficients `c_j = -a^{-j}`, `j = 1..=leads`, of the anticausal
/// inverse of `1 - a z` for `|a| > 1`: `eps_t = sum_j c_j x_{t+j}`.
pub fn noncausal_inverse_demo(a: f64, leads: usize) -> Result<Vec<f64>> {
    if !(a.abs() > 1.0) {
        return Err(Error::Precondition(format!(
            "anticausal inversion of 1 - a z needs |a| > 1, got {a}"
        )));
    }
    Ok((1..=leads).map(|j| -(1.0 / a).powi(j as i32)).collect())
}

/// Apply lead coefficients: `out_t = sum_j c_j x_{t+j}`; `None` where leads
/// run past the end of `x`.
pub fn apply_leads(coeffs: &[f64], x: &[f64]) -> Vec<Option<f64>> {
    (0..x.len())
        .map(|t| {
            (t + coeffs.len() < x.len())
                .then(|| coeffs.iter().enumerate().map(|(j, c)| c * x[t + j + 1]).sum())
        })
        .collect()
}

/// Causal filtering `out_t = sum_a C(a) x_{t-a}` with zero pre-sample values.
pub fn filter_causal(c: &MatrixPolynomial, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.cols() != x.nrows() {
        return Err(Error::Shape(format!(
            "filter expects {} inputs, got {}",
            c.cols(),
            x.nrows()
        )));
    }
    let t = x.ncols();
    let mut out = DMatrix::zeros(c.rows(), t);
    for (a, ca) in c.coeffs().iter().enumerate() {
        if a >= t || ca.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut dst = out.columns_mut(a, t - a);
        dst.gemm(1.0, ca, &x.columns(0, t - a), 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(c: &[f64]) -> MatrixPolynomial {
        MatrixPolynomial::scalar(c).unwrap()
    }

    fn random_poly(rng: &mut ChaCha8Rng, r: usize, c: usize, deg: usize) -> MatrixPolynomial {
        MatrixPolynomial::new(
            (0..=deg)
                .map(|_| DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0))
                .collect(),
        )
        .unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn telescoping_product() {
        let p = poly_mul(&scalar(&[1.0, -1.0]), &scalar(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(p.scalar_coeffs().unwrap(), vec![1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn identity_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_poly(&mut rng, 2, 2, 3);
        assert_eq!(poly_mul(&MatrixPolynomial::identity(2), &p).unwrap(), p);
    }

    #[test]
    fn product_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_poly(&mut rng, 2, 3, 3);
        let b = random_poly(&mut rng, 3, 1, 3);
        let ab = poly_mul(&a, &b).unwrap();
        for _ in 0..20 {
            let z = random_point(&mut rng);
            let diff = ab.eval(z) - a.eval(z) * b.eval(z);
            assert!(diff.iter().all(|v| v.norm() < 1e-10));
        }
    }

    #[test]
    fn product_shape_error() {
        let a = MatrixPolynomial::zeros(2, 3);
        let b = MatrixPolynomial::zeros(2, 1);
        assert!(matches!(poly_mul(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn diagonal_determinant() {
        let p = MatrixPolynomial::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, -2.0]),
        ])
        .unwrap();
        let d = poly_det(&p).unwrap().scalar_coeffs().unwrap();
        assert_eq!(d.len(), 3);
        for (a, b) in d.iter().zip([1.0, -5.0, 6.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn scalar_determinant_is_identity() {
        let p = scalar(&[2.0, 0.5, -1.0]);
        assert_eq!(poly_det(&p).unwrap(), p);
    }

    #[test]
    fn determinant_rejects_non_square() {
        assert!(matches!(
            poly_det(&MatrixPolynomial::zeros(2, 1)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn adjugate_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = random_poly(&mut rng, 3, 3, 2);
        let adj = poly_adjugate(&k).unwrap();
        let det = poly_det(&k).unwrap();
        let prod = poly_mul(&adj, &k).unwrap();
        for _ in 0..10 {
            let z = random_point(&mut rng);
            let lhs = prod.eval(z);
            let d = det.eval(z)[(0, 0)];
            let rhs = DMatrix::<C64>::identity(3, 3) * d;
            assert!((lhs - rhs).iter().all(|v| v.norm() < 1e-9));
        }
    }

    #[test]
    fn linear_roots() {
        let r = scalar_roots(&scalar(&[1.0, -3.0])).unwrap();
        assert_eq!(r, vec![C64::new(1.0 / 3.0, 0.0)]);
        let r = scalar_roots(&scalar(&[1.0, -0.5])).unwrap();
        assert_eq!(r, vec![C64::new(2.0, 0.0)]);
        let r = scalar_roots(&scalar(&[1.0, -1.0])).unwrap();
        assert_eq!(r[0].norm(), 1.0);
    }

    #[test]
    fn roots_of_zero_polynomial() {
        assert!(matches!(
            scalar_roots(&scalar(&[0.0])),
            Err(Error::ZeroPolynomial)
        ));
    }

    #[test]
    fn quadratic_complex_roots() {
        // 1 + z^2 has roots +-i
        let mut r = scalar_roots(&scalar(&[1.0, 0.0, 1.0])).unwrap();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_abs_diff_eq!((r[0] - C64::new(0.0, -1.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((r[1] - C64::new(0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn classification_examples() {
        let c = classify_zeros(&scalar(&[1.0, -3.0]), DEFAULT_RHO).unwrap();
        assert_eq!(c.inside.len(), 1);
        assert_abs_diff_eq!(c.inside[0][0], 1.0 / 3.0, epsilon = 1e-15);
        let c = classify_zeros(&scalar(&[1.0, -0.5]), DEFAULT_RHO).unwrap();
        assert_eq!(c.outside, vec![[2.0, 0.0]]);
        let p = poly_mul(&scalar(&[1.0, -1.0]), &scalar(&[1.0, -0.5])).unwrap();
        let c = classify_zeros(&p, DEFAULT_RHO).unwrap();
        assert_eq!(c.on_circle.len(), 1);
        assert_eq!(c.outside.len(), 1);
        assert_abs_diff_eq!(c.on_circle[0][0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.outside[0][0], 2.0, epsilon = 1e-10);
        assert!(classify_zeros(&scalar(&[1.0, -1.0]), 0.0).is_err());
    }

    #[test]
    fn mirror_worked_example() {
        let m = mirror_inside_zeros(&scalar(&[1.0, -3.0]), DEFAULT_RHO).unwrap();
        assert_eq!(m.scalar_coeffs().unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn mirror_leaves_minimum_phase_alone() {
        let p = scalar(&[1.0, -0.5]);
        assert_eq!(mirror_inside_zeros(&p, DEFAULT_RHO).unwrap(), p);
    }

    #[test]
    fn mirror_preserves_magnitude() {
        let p = poly_mul(&scalar(&[1.0, -3.0]), &scalar(&[1.0, -0.5])).unwrap();
        let m = mirror_inside_zeros(&p, DEFAULT_RHO).unwrap();
        for th in frequency_grid(64) {
            let a = p.eval_freq(th)[(0, 0)].norm();
            let b = m.eval_freq(th)[(0, 0)].norm();
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let c = classify_zeros(&m, DEFAULT_RHO).unwrap();
        assert!(c.inside.is_empty());
    }

    #[test]
    fn mirror_rejects_circle_zero() {
        assert!(matches!(
            mirror_inside_zeros(&scalar(&[1.0, -1.0]), DEFAULT_RHO),
            Err(Error::OnCircleZero { .. })
        ));
    }

    #[test]
    fn factor_examples() {
        let p = poly_mul(&scalar(&[1.0, -1.0]), &scalar(&[1.0, -0.5])).unwrap();
        let (g, h) = factor_unit_circle_zeros(&p, DEFAULT_RHO).unwrap();
        let gc = g.scalar_coeffs().unwrap();
        let hc = h.scalar_coeffs().unwrap();
        assert_abs_diff_eq!(gc[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gc[1], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hc[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(hc[1], -0.5, epsilon = 1e-10);

        let p = scalar(&[1.0, -0.5]);
        let (g, h) = factor_unit_circle_zeros(&p, DEFAULT_RHO).unwrap();
        assert_eq!(g, MatrixPolynomial::identity(1));
        assert_eq!(h, p);

        let (g, h) = factor_unit_circle_zeros(&scalar(&[1.0, -1.0]), DEFAULT_RHO).unwrap();
        assert_eq!(g.scalar_coeffs().unwrap(), vec![1.0, -1.0]);
        assert_eq!(h.scalar_coeffs().unwrap(), vec![1.0]);
    }

    #[test]
    fn factor_double_unit_root() {
        // (1 - z)^2 (1 + 0.3 z)
        let p = poly_mul(
            &poly_mul(&scalar(&[1.0, -1.0]), &scalar(&[1.0, -1.0])).unwrap(),
            &scalar(&[1.0, 0.3]),
        )
        .unwrap();
        let (g, h) = factor_unit_circle_zeros(&p, 1e-6).unwrap();
        assert_eq!(g.degree(), 2);
        let back = poly_mul(&g, &h).unwrap().scalar_coeffs().unwrap();
        for (a, b) in back.iter().zip(p.scalar_coeffs().unwrap()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert!(classify_zeros(&h, 1e-6).unwrap().on_circle.is_empty());
    }

    #[test]
    fn geometric_inverse() {
        let inv = causal_inverse_series(
            &scalar(&[1.0, -0.5]),
            &InverseOptions {
                l_max: 20,
                tail_tol: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        let c = inv.series.scalar_coeffs().unwrap();
        assert_eq!(c.len(), 21);
        for (j, v) in c.iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.5f64.powi(j as i32), epsilon = 1e-15);
        }
    }

    #[test]
    fn stacked_inverse_worked_example() {
        let k = MatrixPolynomial::stack(&[&scalar(&[1.0, -3.0]), &scalar(&[1.0, -2.0])]).unwrap();
        let inv = causal_inverse_series(&k, &InverseOptions::default()).unwrap();
        assert_eq!(inv.kind, InverseKind::StackedExact);
        assert_eq!(inv.series.degree(), 0);
        let c = inv.series.coeff(0);
        assert_abs_diff_eq!(c[(0, 0)], -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[(0, 1)], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn inside_zero_is_not_minimum_phase() {
        let r = causal_inverse_series(&scalar(&[1.0, -3.0]), &InverseOptions::default());
        assert!(matches!(r, Err(Error::NotMinimumPhase { .. })));
    }

    #[test]
    fn common_inside_zero_blocks_stacked_inverse() {
        let row = scalar(&[1.0, -3.0]);
        let k = MatrixPolynomial::stack(&[&row, &row.scale(2.0)]).unwrap();
        let r = causal_inverse_series(&k, &InverseOptions::default());
        assert!(matches!(r, Err(Error::NotCausallyInvertible { .. })));
    }

    #[test]
    fn common_outside_zero_gives_iir_left_inverse() {
        // common zero at 1/0.9: the FIR residual decays like 0.81^len
        let a = scalar(&[1.0, -0.9]);
        let k = MatrixPolynomial::stack(&[&a, &poly_mul(&a, &scalar(&[1.0, 0.4])).unwrap()]).unwrap();
        let inv = causal_inverse_series(&k, &InverseOptions::default()).unwrap();
        assert_eq!(inv.kind, InverseKind::StackedApprox);
        assert!(inv.residual_energy < 1e-6);
    }

    #[test]
    fn rank_deficient_block() {
        let k = MatrixPolynomial::zeros(2, 2);
        assert!(matches!(
            causal_inverse_series(&k, &InverseOptions::default()),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn square_inverse_matches_recursion() {
        // independent route: C_0 = K_0^{-1}, C_n = -(sum_j C_{n-j} K_j) K_0^{-1}
        let k = MatrixPolynomial::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.1, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.25]),
        ])
        .unwrap();
        let inv = causal_inverse_series(&k, &InverseOptions::default()).unwrap();
        let k0inv = k.coeff(0).try_inverse().unwrap();
        let mut rec: Vec<DMatrix<f64>> = vec![k0inv.clone()];
        for n in 1..=inv.series.degree() {
            let mut s = DMatrix::zeros(2, 2);
            for j in 1..=n.min(k.degree()) {
                s += &rec[n - j] * k.coeff(j);
            }
            rec.push(-s * &k0inv);
        }
        for (a, b) in inv.series.coeffs().iter().zip(&rec) {
            assert!((a - b).iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn noncausal_demo_coefficients() {
        let c = noncausal_inverse_demo(3.0, 3).unwrap();
        for (a, b) in c.iter().zip([-1.0 / 3.0, -1.0 / 9.0, -1.0 / 27.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(noncausal_inverse_demo(2.0, 1).unwrap(), vec![-0.5]);
        assert!(matches!(
            noncausal_inverse_demo(0.5, 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn filter_matches_direct_sum() {
        let c = scalar(&[1.0, -3.0]);
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let y = filter_causal(&c, &x).unwrap();
        assert_eq!(y.iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0, -3.0, -5.0]);
    }

    #[test]
    fn near_circle_zero_exceeds_series_cap() {
        // zero at z = 1.0005: the series decays like 0.9995^L
        let k = scalar(&[1.0, -1.0 / 1.0005]);
        let opts = InverseOptions::default();
        assert!(1.0005 < opts.slow_radius());
        assert!(matches!(
            causal_inverse_series(&k, &opts),
            Err(Error::NotCausallyInvertible { .. })
        ));
        let longer = InverseOptions {
            max_len: 1 << 16,
            ..opts
        };
        assert!(causal_inverse_series(&k, &longer).is_ok());
    }
}
