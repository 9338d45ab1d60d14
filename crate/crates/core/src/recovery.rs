//! One-sided shock recovery: causal block inversion, static principal
//! components, the aggregation path for unit-circle zeros, and the
//! diagnostics that check the result.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blocking::{BlockPlan, Innovation, Strategy};
use crate::error::{Error, Result};
use crate::linalg::{canonical_correlations, lstsq, sym_eigen_desc, PivotedGram};
use crate::par;
use crate::polyalg::{filter_causal, max_gain_on_grid};
use crate::spectral::{
    autocov_zero, default_bandwidth, dynamic_eigen, spectral_density, DEFAULT_GRID,
};
use crate::types::{MatrixPolynomial, Panel, ShockSeries};

fn check_rows(panel: &Panel, plan: &BlockPlan) -> Result<()> {
    if let Some(&r) = plan.block_rows().iter().find(|&&r| r >= panel.n()) {
        return Err(Error::Shape(format!(
            "plan uses row {r} but the panel has {} series",
            panel.n()
        )));
    }
    Ok(())
}

/// Apply each block's causal inverse to its rows; the first
/// `max inverse degree` samples (pre-sample burn-in) are dropped.
fn apply_inverses(panel: &Panel, plan: &BlockPlan, factored: bool) -> Result<Panel> {
    check_rows(panel, plan)?;
    let blocks: Vec<_> = plan
        .blocks
        .iter()
        .filter(|b| (b.strategy == Strategy::Factored) == factored)
        .collect();
    if blocks.is_empty() {
        return Err(Error::Routing("no blocks on this recovery path".into()));
    }
    let burn = plan.max_inverse_degree();
    if panel.len() <= burn {
        return Err(Error::Precondition(format!(
            "T = {} does not exceed the inverse length {burn}",
            panel.len()
        )));
    }
    let keep = panel.len() - burn;
    let outs: Vec<Result<DMatrix<f64>>> = par::map_slice(&blocks, |b| {
        let rows = panel.values().select_rows(&b.rows);
        Ok(filter_causal(&b.inverse, &rows)?.columns(burn, keep).into_owned())
    });
    let q = plan.q;
    let mut values = DMatrix::zeros(q * blocks.len(), keep);
    for (j, o) in outs.into_iter().enumerate() {
        values.rows_mut(j * q, q).copy_from(&o?);
    }
    let ids = (1..=values.nrows()).map(|i| format!("phi{i}")).collect();
    Panel::new(values, ids, panel.t0() + burn as i64)
}

/// Stack `phi^(j)_t = inverse_j(L) y^(j)_t` over blocks (`q J` rows).
///
/// Factored blocks cannot be routed here; use [`build_phi_factored`].
pub fn build_phi(panel: &Panel, plan: &BlockPlan) -> Result<Panel> {
    if plan.has_strategy(Strategy::Factored) {
        return Err(Error::Routing(
            "factored blocks must go through the aggregation path".into(),
        ));
    }
    apply_inverses(panel, plan, false)
}

/// `h`-inverted rows of the factored blocks: `g(L) eps_t` plus noise.
pub fn build_phi_factored(panel: &Panel, plan: &BlockPlan) -> Result<Panel> {
    apply_inverses(panel, plan, true)
}

/// Output of [`static_pca_recover`].
#[derive(Debug, Clone)]
pub struct PcaRecovery {
    pub eps_hat: ShockSeries,
    /// `q x n` orthonormal rows `P`.
    pub loadings: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Static rank-`q` approximation `P' P phi_t`.
    pub slra: Panel,
}

/// Top-`q` normalised principal components of the demeaned panel.
///
/// `eps_hat = M^{-1/2} P phi_t` has identity sample covariance. Each
/// component is signed so that its largest-magnitude loading is positive.
pub fn static_pca_recover(phi: &Panel, q: usize) -> Result<PcaRecovery> {
    if q == 0 || q > phi.n() {
        return Err(Error::Config(format!(
            "cannot extract {q} components from {} series",
            phi.n()
        )));
    }
    let d = phi.demean()?;
    let g = autocov_zero(phi)?;
    let (vals, vecs) = sym_eigen_desc(&g);
    let top = vals[0];
    if !(top > 0.0) || !(vals[q - 1] > 1e-12 * top) {
        return Err(Error::DegeneratePanel);
    }
    let mut p = vecs.columns(0, q).transpose();
    for mut row in p.row_iter_mut() {
        let (idx, _) = row
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if row[idx] < 0.0 {
            row.neg_mut();
        }
    }
    let scores = &p * d.values();
    let mut eps = scores.clone();
    for (k, mut row) in eps.row_iter_mut().enumerate() {
        row /= vals[k].sqrt();
    }
    let slra = p.transpose() * &scores;
    Ok(PcaRecovery {
        eps_hat: ShockSeries::new(eps, true, phi.t0())?,
        loadings: p,
        eigenvalues: vals[..q].to_vec(),
        slra: d.with_values(slra)?,
    })
}

/// Output of [`aggregate_zeta`].
#[derive(Debug, Clone)]
pub struct Aggregation {
    /// Weighted cross-sectional average (`1 x T`).
    pub zeta: Panel,
    pub weights: Vec<f64>,
    /// `sum_i c_i^2`.
    pub weight_norm_sq: f64,
    pub g: MatrixPolynomial,
}

/// Static average `zeta_t = sum_i c_i phi_it` of the `h`-inverted rows.
///
/// All blocks must share the same unit-circle factor `g` and carry a single
/// shock. Default weights are `1 / n`.
pub fn aggregate_zeta(
    phi_factored: &Panel,
    g_polys: &[MatrixPolynomial],
    weights: Option<&[f64]>,
) -> Result<Aggregation> {
    let n = phi_factored.n();
    if g_polys.len() != n {
        return Err(Error::Shape(format!("{} factors for {n} rows", g_polys.len())));
    }
    let g = g_polys[0].clone();
    if !g.is_scalar() {
        return Err(Error::Unsupported("aggregation needs a single shock".into()));
    }
    let same = |a: &MatrixPolynomial| {
        a.degree() == g.degree()
            && a.coeffs().iter().zip(g.coeffs()).all(|(x, y)| (x - y).abs().max() < 1e-8)
    };
    if !g_polys.iter().all(same) {
        return Err(Error::Unsupported(
            "unit-circle factors differ across blocks".into(),
        ));
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == n => w.to_vec(),
        Some(w) => return Err(Error::Shape(format!("{} weights for {n} rows", w.len()))),
        None => vec![1.0 / n as f64; n],
    };
    let wv = DMatrix::from_row_slice(1, n, &w);
    let zeta = wv * phi_factored.values();
    Ok(Aggregation {
        zeta: Panel::new(zeta, vec!["zeta".into()], phi_factored.t0())?,
        weight_norm_sq: w.iter().map(|c| c * c).sum(),
        weights: w,
        g,
    })
}

/// Standardised one-step residuals of a least-squares AR(`p_ar`) fit with
/// intercept. The first `p_ar` samples are consumed.
pub fn wold_innovations(zeta: &Panel, g: &MatrixPolynomial, p_ar: usize) -> Result<ShockSeries> {
    if zeta.n() != 1 {
        return Err(Error::Unsupported("innovations of a single series only".into()));
    }
    let t = zeta.len();
    if p_ar == 0 || t < 10 * p_ar {
        return Err(Error::Precondition(format!(
            "AR order {p_ar} needs 1 <= p and T >= 10 p, T = {t}"
        )));
    }
    if p_ar < g.degree() {
        return Err(Error::Precondition(format!(
            "AR order {p_ar} is below the unit-circle factor degree {}",
            g.degree()
        )));
    }
    let z = zeta.row(0);
    let nobs = t - p_ar;
    let x = DMatrix::from_fn(nobs, p_ar + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            z[p_ar + r - c]
        }
    });
    let y = DMatrix::from_fn(nobs, 1, |r, _| z[p_ar + r]);
    let fit = lstsq(&x, &y)?;
    if !fit.dropped.is_empty() {
        return Err(Error::Conditioning(format!(
            "AR({p_ar}) design is rank deficient ({} collinear lags)",
            fit.dropped.len()
        )));
    }
    let mut resid: Vec<f64> = (0..nobs).map(|r| y[(r, 0)] - fit.fitted[(r, 0)]).collect();
    let mean = resid.iter().sum::<f64>() / nobs as f64;
    let sd = (resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nobs as f64).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Conditioning("AR fit leaves no residual variance".into()));
    }
    resid.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    ShockSeries::new(
        DMatrix::from_row_slice(1, nobs, &resid),
        true,
        zeta.t0() + p_ar as i64,
    )
}

/// Settings for [`subordination_score`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationOptions {
    pub p_lags: usize,
    pub n_leads: usize,
    /// At most this many leading series are used as regressors.
    pub max_series: usize,
}

impl Default for SubordinationOptions {
    fn default() -> Self {
        Self {
            p_lags: 20,
            n_leads: 5,
            max_series: 64,
        }
    }
}

/// Pooled R^2 of the shocks on current-and-past regressors, and with leads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinationScores {
    pub r2_past: f64,
    pub r2_two_sided: f64,
    /// `r2_two_sided - r2_past`.
    pub lead_gain: f64,
    pub n_series: usize,
    pub n_obs: usize,
    /// Collinear regressor columns left out.
    pub dropped_columns: usize,
    pub options: SubordinationOptions,
}

/// Centred cross products of lagged regressors, built from lag sums over a
/// common core window plus short edge corrections.
struct LaggedGram {
    gram: DMatrix<f64>,
    xty: DMatrix<f64>,
    tss: f64,
}

/// Offsets `a` (regressor value `x_i(t - a)`): lags `0..=p`, then leads.
fn offsets(p: usize, l: usize) -> Vec<isize> {
    (0..=p as isize).chain((1..=l as isize).map(|k| -k)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `rows[i]` are regressor series; `targets[k]` are aligned with
/// `rows[..][lo..hi]`. Requires `lo >= p` and `hi + l <= len`.
fn lagged_gram(rows: &[Vec<f64>], targets: &[Vec<f64>], lo: usize, hi: usize, p: usize, l: usize) -> LaggedGram {
    let n = rows.len();
    let offs = offsets(p, l);
    let k = offs.len();
    let ncol = n * k;
    let nobs = (hi - lo) as f64;
    let col = |ai: usize, i: usize| ai * n + i;
    let (pi, li) = (p as isize, l as isize);
    let (lo_i, hi_i) = (lo as isize, hi as isize);
    let span = pi + li;
    // core window for s = t - a, valid for every offset
    let (core_lo, core_hi) = ((lo_i + li) as usize, (hi_i - pi) as usize);

    let core: Vec<Vec<f64>> = par::map_indexed(n * n, |ij| {
        let (i, j) = (ij / n, ij % n);
        (-span..=span)
            .map(|d| {
                let a = &rows[i][core_lo..core_hi];
                let s0 = (core_lo as isize + d) as usize;
                dot(a, &rows[j][s0..s0 + (core_hi - core_lo)])
            })
            .collect()
    });

    let mut gram = DMatrix::zeros(ncol, ncol);
    for (ai, &a) in offs.iter().enumerate() {
        for (bi, &b) in offs.iter().enumerate() {
            let d = a - b;
            let di = (d + span) as usize;
            for i in 0..n {
                let yi = &rows[i];
                for j in 0..n {
                    let yj = &rows[j];
                    let mut s = core[i * n + j][di];
                    // sum over s in [lo - a, hi - a) of y_i(s) y_j(s + d)
                    for sidx in (lo_i - a)..(core_lo as isize) {
                        s += yi[sidx as usize] * yj[(sidx + d) as usize];
                    }
                    for sidx in (core_hi as isize)..(hi_i - a) {
                        s += yi[sidx as usize] * yj[(sidx + d) as usize];
                    }
                    gram[(col(ai, i), col(bi, j))] = s;
                }
            }
        }
    }
    let means: Vec<f64> = (0..ncol)
        .map(|c| {
            let (ai, i) = (c / n, c % n);
            let a = offs[ai];
            let start = (lo_i - a) as usize;
            rows[i][start..start + (hi - lo)].iter().sum::<f64>() / nobs
        })
        .collect();
    for r in 0..ncol {
        for c in 0..ncol {
            gram[(r, c)] -= nobs * means[r] * means[c];
        }
    }
    let mut xty = DMatrix::zeros(ncol, targets.len());
    let mut tss = 0.0;
    for (kk, y) in targets.iter().enumerate() {
        let ym = y.iter().sum::<f64>() / nobs;
        tss += y.iter().map(|v| (v - ym).powi(2)).sum::<f64>();
        for c in 0..ncol {
            let (ai, i) = (c / n, c % n);
            let start = (lo_i - offs[ai]) as usize;
            let s = dot(&rows[i][start..start + (hi - lo)], y);
            xty[(c, kk)] = s - nobs * means[c] * ym;
        }
    }
    LaggedGram { gram, xty, tss }
}

/// Residual sum of squares from regressing the targets on `cols`.
fn rss_on(lg: &LaggedGram, cols: &[usize]) -> (f64, usize) {
    let piv = PivotedGram::new(&lg.gram, cols, 1e-10);
    if piv.rank() == 0 {
        return (lg.tss, cols.len());
    }
    let rhs = lg.xty.select_rows(&piv.kept);
    let b = piv.solve(&rhs);
    let explained: f64 = rhs.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    ((lg.tss - explained).max(0.0), piv.dropped.len())
}

/// Regress each shock coordinate on current and `p_lags` past values of the
/// first `min(n, max_series)` series (with intercept), then again adding
/// `n_leads` future values. R^2 is pooled over coordinates, so it is
/// invariant under orthogonal rotation of the shocks.
pub fn subordination_score(
    eps_hat: &ShockSeries,
    panel: &Panel,
    opts: &SubordinationOptions,
) -> Result<SubordinationScores> {
    let (p, l) = (opts.p_lags, opts.n_leads);
    let n_reg = panel.n().min(opts.max_series.max(1));
    let start = eps_hat.t0().max(panel.t0() + p as i64);
    let end = eps_hat.t_end().min(panel.t_end() - l as i64);
    if end <= start {
        return Err(Error::Precondition("shocks and panel do not overlap".into()));
    }
    let nobs = (end - start) as usize;
    let needed = 10 * (p + l).max(1) * n_reg;
    if nobs < needed {
        return Err(Error::Precondition(format!(
            "{nobs} aligned observations, need at least {needed}"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n_reg).map(|i| panel.row(i)).collect();
    let e0 = (start - eps_hat.t0()) as usize;
    let targets: Vec<Vec<f64>> = (0..eps_hat.q())
        .map(|k| eps_hat.values().row(k).columns(e0, nobs).iter().copied().collect())
        .collect();
    let lo = (start - panel.t0()) as usize;
    let lg = lagged_gram(&rows, &targets, lo, lo + nobs, p, l);
    if !(lg.tss > 0.0) {
        return Err(Error::DegenerateInput("shocks have zero variance".into()));
    }
    let n_past = n_reg * (p + 1);
    let past: Vec<usize> = (0..n_past).collect();
    let all: Vec<usize> = (0..n_reg * (p + 1 + l)).collect();
    let (rss_past, _) = rss_on(&lg, &past);
    let (rss_all, dropped) = rss_on(&lg, &all);
    let r2_past = 1.0 - rss_past / lg.tss;
    let r2_two_sided = 1.0 - rss_all / lg.tss;
    Ok(SubordinationScores {
        r2_past,
        r2_two_sided,
        lead_gain: r2_two_sided - r2_past,
        n_series: n_reg,
        n_obs: nobs,
        dropped_columns: dropped,
        options: *opts,
    })
}

/// Comparison of the idiosyncratic part of `phi` with its eigenvalue bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Largest eigenvalue of the sample covariance of `e^phi`.
    pub mu1_e_phi: f64,
    /// `max_theta mu_1(f_xi(theta))`.
    pub m_xi: f64,
    pub delta: f64,
    /// `2 pi M_xi delta^{-2}`.
    pub bound: f64,
    pub slack: f64,
    /// `mu1_e_phi <= bound (1 + slack)`.
    pub satisfied: bool,
    /// `2 pi M_xi max_j sup_theta ||C_j(e^{-i theta})||^2` with `C_j` the
    /// stored inverses.
    pub inverse_gain_bound: f64,
    pub inverse_gain_satisfied: bool,
}

/// `max_theta mu_1` of the Bartlett estimate of the spectrum of `xi`.
pub fn xi_spectrum_sup(xi: &Panel, grid: usize, bandwidth: Option<usize>) -> Result<f64> {
    let b = bandwidth.unwrap_or_else(|| default_bandwidth(xi.len()));
    let eig = dynamic_eigen(&spectral_density(xi, grid, b)?, 1)?;
    Ok(eig.curve(0).into_iter().fold(0.0, f64::max))
}

/// Check `mu_1(Gamma_{e^phi}) <= 2 pi M_xi delta^{-2} (1 + slack)`.
pub fn bound_check(plan: &BlockPlan, m_xi: f64, e_phi: &Panel, slack: f64) -> Result<BoundReport> {
    let delta = plan.delta;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::BoundUndefined);
    }
    let mu1 = sym_eigen_desc(&autocov_zero(e_phi)?).0[0].max(0.0);
    let bound = 2.0 * PI * m_xi / (delta * delta);
    let gain = plan
        .blocks
        .iter()
        .map(|b| max_gain_on_grid(&b.inverse, plan.config.grid_size))
        .fold(0.0, f64::max);
    let inverse_gain_bound = 2.0 * PI * m_xi * gain * gain;
    Ok(BoundReport {
        mu1_e_phi: mu1,
        m_xi,
        delta,
        bound,
        slack,
        satisfied: mu1 <= bound * (1.0 + slack),
        inverse_gain_bound,
        inverse_gain_satisfied: mu1 <= inverse_gain_bound * (1.0 + slack),
    })
}

/// Per-series least-squares projection of `y_it` on `eps_hat_{t-j}`,
/// `j = 0..=p_lags`, with intercept. Fitted values are returned over the
/// window where all lags are available.
pub fn reconstruct_chi(panel: &Panel, eps_hat: &ShockSeries, p_lags: usize) -> Result<Panel> {
    let q = eps_hat.q();
    let start = panel.t0().max(eps_hat.t0() + p_lags as i64);
    let end = panel.t_end().min(eps_hat.t_end());
    if end <= start {
        return Err(Error::Precondition("panel and shocks do not overlap".into()));
    }
    let nobs = (end - start) as usize;
    if nobs < 10 * q * (p_lags + 1) {
        return Err(Error::Precondition(format!(
            "{nobs} observations for {} regressors",
            q * (p_lags + 1)
        )));
    }
    let e = eps_hat.values();
    let e0 = (start - eps_hat.t0()) as usize;
    let x = DMatrix::from_fn(nobs, 1 + q * (p_lags + 1), |r, c| {
        if c == 0 {
            1.0
        } else {
            let (j, k) = ((c - 1) / q, (c - 1) % q);
            e[(k, e0 + r - j)]
        }
    });
    let p0 = (start - panel.t0()) as usize;
    let y = panel.values().columns(p0, nobs).transpose();
    let fit = lstsq(&x, &y)?;
    if fit.dropped.iter().any(|&c| c > 0) {
        return Err(Error::Conditioning("shock lags are collinear".into()));
    }
    Panel::new(fit.fitted.transpose(), panel.series_ids().to_vec(), start)
}

/// Mean canonical correlation between `eps_hat` and `reference` over their
/// common window.
pub fn rotation_metric(eps_hat: &ShockSeries, reference: &ShockSeries) -> Result<f64> {
    let start = eps_hat.t0().max(reference.t0());
    let end = eps_hat.t_end().min(reference.t_end());
    if end - start < 2 {
        return Err(Error::Precondition("series do not overlap".into()));
    }
    let a = eps_hat.time_range(start, end)?;
    let b = reference.time_range(start, end)?;
    let cc = canonical_correlations(a.values(), b.values())?;
    let k = a.q().min(b.q());
    Ok(cc[..k].iter().sum::<f64>() / k as f64)
}

/// Mean over rows of the squared correlation between fitted and true series.
pub fn mean_r2(fitted: &Panel, truth: &Panel) -> Result<f64> {
    let start = fitted.t0().max(truth.t0());
    let end = fitted.t_end().min(truth.t_end());
    if end - start < 2 || fitted.n() > truth.n() {
        return Err(Error::Precondition("panels do not overlap".into()));
    }
    let f = fitted.time_range(start, end)?;
    let t = truth.time_range(start, end)?;
    let r2: f64 = (0..f.n())
        .map(|i| {
            let c = crate::linalg::correlation(&f.row(i), &t.row(i));
            if c.is_finite() {
                c * c
            } else {
                0.0
            }
        })
        .sum();
    Ok(r2 / f.n() as f64)
}

/// Largest absolute sample autocorrelation over lags `1..=max_lag` and rows.
pub fn max_autocorrelation(series: &ShockSeries, max_lag: usize) -> f64 {
    let v = series.values();
    let t = v.ncols();
    (0..v.nrows())
        .map(|k| {
            let x: Vec<f64> = v.row(k).iter().copied().collect();
            let m = x.iter().sum::<f64>() / t as f64;
            let c0: f64 = x.iter().map(|a| (a - m).powi(2)).sum();
            (1..=max_lag.min(t - 1))
                .map(|l| {
                    let c: f64 = (l..t).map(|s| (x[s] - m) * (x[s - l] - m)).sum();
                    (c / c0).abs()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Settings for [`recover`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub subordination: SubordinationOptions,
    /// Shock lags used to reconstruct the common component.
    pub chi_lags: usize,
    /// AR order for the aggregation path.
    pub p_ar: usize,
    /// Relative slack of the eigenvalue bound.
    pub slack: f64,
    pub grid_size: usize,
    /// Bartlett bandwidth for `M_xi`; `None` uses `floor(sqrt(T))`.
    pub bandwidth: Option<usize>,
    /// Lags checked for whiteness of the recovered shocks.
    pub whiteness_lags: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            subordination: SubordinationOptions::default(),
            chi_lags: 4,
            p_ar: 50,
            slack: 0.25,
            grid_size: DEFAULT_GRID,
            bandwidth: None,
            whiteness_lags: 10,
        }
    }
}

/// Known ground truth of a simulated run.
#[derive(Debug, Clone, Default)]
pub struct Truth {
    pub eps: Option<ShockSeries>,
    pub chi: Option<Panel>,
    pub xi: Option<Panel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryPath {
    /// Block inversion followed by static principal components.
    Pca,
    /// Static averaging of `h`-inverted rows, then a long autoregression.
    Aggregation,
}

/// What the rotation metric compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// The simulated shocks.
    Shocks,
    /// The Wold innovations obtained by applying the same inverses to the
    /// true common component.
    WoldInnovations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whiteness {
    pub max_abs_autocorrelation: f64,
    pub lags: usize,
    /// `4 / sqrt(T)`.
    pub threshold: f64,
    pub white: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub rows: Vec<usize>,
    pub strategy: Strategy,
    pub innovation: Innovation,
    pub delta: f64,
    pub flagged: bool,
    pub inverse_degree: usize,
}

/// Scores and diagnostics of one recovery run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub path: RecoveryPath,
    pub innovation: Innovation,
    pub q: usize,
    /// Rows of `phi` (or of the aggregated panel).
    pub n_phi: usize,
    pub t0: i64,
    pub n_obs: usize,
    pub eigenvalues: Vec<f64>,
    pub subordination: SubordinationScores,
    pub whiteness: Whiteness,
    pub rotation_metric: Option<f64>,
    pub reference: Option<ReferenceKind>,
    pub chi_r2: Option<f64>,
    pub bound: Option<BoundReport>,
    /// `var(zeta_hat - zeta)` on the aggregation path.
    pub zeta_error_variance: Option<f64>,
    pub weight_norm_sq: Option<f64>,
    pub blocks: Vec<BlockSummary>,
    pub options: RecoveryOptions,
    #[serde(skip)]
    pub eps_hat: Option<ShockSeries>,
    #[serde(skip)]
    pub chi_hat: Option<Panel>,
}

fn block_summaries(plan: &BlockPlan) -> Vec<BlockSummary> {
    plan.blocks
        .iter()
        .map(|b| BlockSummary {
            rows: b.rows.clone(),
            strategy: b.strategy,
            innovation: b.innovation,
            delta: b.delta,
            flagged: b.flagged,
            inverse_degree: b.inverse.degree(),
        })
        .collect()
}

/// Full recovery: route by strategy, recover the shocks, reconstruct the
/// common component and score everything the truth allows.
pub fn recover(panel: &Panel, plan: &BlockPlan, opts: &RecoveryOptions, truth: &Truth) -> Result<RecoveryReport> {
    let factored = plan.has_strategy(Strategy::Factored);
    if factored && plan.blocks.iter().any(|b| b.strategy != Strategy::Factored) {
        return Err(Error::Routing(
            "plans mixing factored and other blocks are not supported".into(),
        ));
    }
    let (eps_hat, eigenvalues, n_phi, zeta_err, wnorm) = if factored {
        let phi = build_phi_factored(panel, plan)?;
        let gs: Vec<_> = plan.blocks.iter().map(|b| b.g.clone()).collect();
        let agg = aggregate_zeta(&phi, &gs, None)?;
        let eps = wold_innovations(&agg.zeta, &agg.g, opts.p_ar)?;
        let zeta_err = match &truth.chi {
            Some(chi) => {
                let phi_true = build_phi_factored(chi, plan)?;
                let zt = aggregate_zeta(&phi_true, &gs, None)?;
                let d: Vec<f64> = agg
                    .zeta
                    .row(0)
                    .iter()
                    .zip(zt.zeta.row(0))
                    .map(|(a, b)| a - b)
                    .collect();
                Some(crate::linalg::variance(&d))
            }
            None => None,
        };
        (eps, Vec::new(), phi.n(), zeta_err, Some(agg.weight_norm_sq))
    } else {
        let phi = build_phi(panel, plan)?;
        let pca = static_pca_recover(&phi, plan.q)?;
        (pca.eps_hat, pca.eigenvalues, phi.n(), None, None)
    };

    let subordination = subordination_score(&eps_hat, panel, &opts.subordination)?;
    let acf = max_autocorrelation(&eps_hat, opts.whiteness_lags);
    let threshold = 4.0 / (eps_hat.len() as f64).sqrt();
    let whiteness = Whiteness {
        max_abs_autocorrelation: acf,
        lags: opts.whiteness_lags,
        threshold,
        white: acf < threshold,
    };
    let chi_hat = reconstruct_chi(panel, &eps_hat, opts.chi_lags)?;

    let (rotation, reference) = match (plan.innovation(), &truth.eps, &truth.chi) {
        (Innovation::Wold, _, Some(chi)) => {
            let eta = build_phi(chi, plan)?;
            let first = ShockSeries::from_panel(&eta.select_rows(&(0..plan.q).collect::<Vec<_>>())?, true);
            (Some(rotation_metric(&eps_hat, &first)?), Some(ReferenceKind::WoldInnovations))
        }
        (Innovation::Original, Some(eps), _) => {
            (Some(rotation_metric(&eps_hat, eps)?), Some(ReferenceKind::Shocks))
        }
        _ => (None, None),
    };
    let chi_r2 = match &truth.chi {
        Some(chi) => Some(mean_r2(&chi_hat, chi)?),
        None => None,
    };
    let bound = match (&truth.xi, factored) {
        (Some(xi), false) => {
            let m_xi = xi_spectrum_sup(xi, opts.grid_size, opts.bandwidth)?;
            let e_phi = build_phi(xi, plan)?;
            Some(bound_check(plan, m_xi, &e_phi, opts.slack)?)
        }
        _ => None,
    };

    Ok(RecoveryReport {
        path: if factored { RecoveryPath::Aggregation } else { RecoveryPath::Pca },
        innovation: plan.innovation(),
        q: plan.q,
        n_phi,
        t0: eps_hat.t0(),
        n_obs: eps_hat.len(),
        eigenvalues,
        subordination,
        whiteness,
        rotation_metric: rotation,
        reference,
        chi_r2,
        bound,
        zeta_error_variance: zeta_err,
        weight_norm_sq: wnorm,
        blocks: block_summaries(plan),
        options: *opts,
        eps_hat: Some(eps_hat),
        chi_hat: Some(chi_hat),
    })
}
