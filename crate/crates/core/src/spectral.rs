//! Autocovariances, Bartlett lag-window spectral estimates and the
//! eigenvalue diagnostics separating common from idiosyncratic parts.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen_desc, herm_eigenvalues_desc, ols_slope, sym_eigen_desc};
use crate::par;
use crate::types::{frequency_grid, Panel, SpectralGrid, C64};

/// Default number of grid frequencies.
pub const DEFAULT_GRID: usize = 128;

/// Default Bartlett bandwidth `floor(sqrt(T))`.
pub fn default_bandwidth(t: usize) -> usize {
    (t as f64).sqrt().floor() as usize
}

fn check_bandwidth(bandwidth: usize, len: usize) -> Result<()> {
    if 4 * bandwidth >= len {
        return Err(Error::Bandwidth { bandwidth, len });
    }
    Ok(())
}

/// Dot product with a fixed summation order, so an entry of `Gamma(l)`
/// depends only on its two series (nested panels share entries exactly).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Sample autocovariances `Gamma(l) = T^{-1} sum_t y_t y_{t-l}'` for
/// `l = 0..=max_lag`. The panel is used as given (demean it first).
pub fn autocov(panel: &Panel, max_lag: usize) -> Result<Vec<DMatrix<f64>>> {
    let t = panel.len();
    check_bandwidth(max_lag, t)?;
    let n = panel.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| panel.row(i)).collect();
    Ok(par::map_indexed(max_lag + 1, |l| {
        DMatrix::from_fn(n, n, |i, j| dot(&rows[i][l..], &rows[j][..t - l]) / t as f64)
    }))
}

/// Bartlett-window estimate on `m` grid frequencies with bandwidth `bandwidth`.
///
/// `f(theta) = (2 pi)^{-1} sum_{|l| <= B} (1 - |l| / (B + 1)) Gamma(l) e^{-i l theta}`,
/// computed on the demeaned panel.
pub fn spectral_density(panel: &Panel, m: usize, bandwidth: usize) -> Result<SpectralGrid> {
    if m < 16 {
        return Err(Error::Config(format!("grid size {m} is below 16")));
    }
    check_bandwidth(bandwidth, panel.len())?;
    let gammas = autocov(&panel.demean()?, bandwidth)?;
    Ok(spectral_from_autocov(&gammas, m))
}

/// Bartlett-window spectral grid from autocovariances `Gamma(0..=B)`.
pub fn spectral_from_autocov(gammas: &[DMatrix<f64>], m: usize) -> SpectralGrid {
    let b = gammas.len() - 1;
    // Gamma e^{-i phi} + Gamma' e^{i phi} = S cos(phi) - i D sin(phi)
    let parts: Vec<(f64, DMatrix<f64>, DMatrix<f64>)> = (1..=b)
        .map(|l| {
            let w = 1.0 - l as f64 / (b + 1) as f64;
            let g = &gammas[l];
            (w, g + g.transpose(), g - g.transpose())
        })
        .collect();
    let freqs = frequency_grid(m);
    let mats = par::map_slice(&freqs, |&th| {
        let mut re = gammas[0].clone();
        let mut im = DMatrix::zeros(re.nrows(), re.ncols());
        for (l, (w, s, d)) in parts.iter().enumerate() {
            let phi = (l + 1) as f64 * th;
            re += s * (w * phi.cos());
            im -= d * (w * phi.sin());
        }
        DMatrix::from_fn(re.nrows(), re.ncols(), |r, c| {
            C64::new(re[(r, c)], im[(r, c)]) / (2.0 * PI)
        })
    });
    SpectralGrid::from_hermitian_parts(freqs, mats)
}

/// Leading eigenvalues and eigenvectors of a spectral grid, per frequency.
#[derive(Debug, Clone)]
pub struct DynamicEigen {
    pub freqs: Vec<f64>,
    /// `values[m][j]` is `mu_{j+1}(theta_m)`, descending in `j`.
    pub values: Vec<Vec<f64>>,
    /// `n x k` orthonormal eigenvectors per frequency.
    pub vectors: Vec<DMatrix<C64>>,
}

impl DynamicEigen {
    /// The curve `theta -> mu_{j+1}(theta)`.
    pub fn curve(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    /// Median over the grid of `mu_{j+1}`.
    pub fn median(&self, j: usize) -> f64 {
        median(&self.curve(j))
    }
}

/// Per-frequency Hermitian eigendecomposition, keeping the top `k` pairs.
pub fn dynamic_eigen(grid: &SpectralGrid, k: usize) -> Result<DynamicEigen> {
    if k == 0 || k > grid.dim() {
        return Err(Error::Config(format!(
            "cannot take {k} eigenvalues of a {}-dimensional spectrum",
            grid.dim()
        )));
    }
    let pairs = par::map_slice(grid.mats(), |m| {
        let (vals, vecs) = herm_eigen_desc(m);
        (vals[..k].to_vec(), vecs.columns(0, k).into_owned())
    });
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(DynamicEigen {
        freqs: grid.freqs().to_vec(),
        values,
        vectors,
    })
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Growth of median-over-theta eigenvalues with the cross-section size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub sizes: Vec<usize>,
    /// `medians[j][s]`: median of `mu_{j+1}` at `sizes[s]`.
    pub medians: Vec<Vec<f64>>,
    /// Least-squares slope of `medians[j]` against `sizes`.
    pub slopes: Vec<f64>,
    pub slope_std_errors: Vec<f64>,
    /// `slope * (n_max - n_min) / median at n_min`: growth of the eigenvalue
    /// over the size range relative to its starting level.
    pub relative_growth: Vec<f64>,
    /// `0.1 * slope_1`.
    pub threshold: f64,
    /// Leading eigenvalues judged divergent.
    pub diverging: usize,
    pub q: usize,
    /// Exactly the first `q` eigenvalues diverge.
    pub factor_structure: bool,
}

/// Slope diagnostic from per-size medians.
///
/// Eigenvalue `j` is divergent when its slope is at least `0.1 * slope_1`
/// and it at least doubles over the size range. The relative-growth guard
/// keeps a purely idiosyncratic panel, whose slopes are all small, from
/// being flagged.
pub fn divergence_from_medians(sizes: &[usize], medians: Vec<Vec<f64>>, q: usize) -> Result<DivergenceReport> {
    if sizes.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 cross-section sizes, got {}",
            sizes.len()
        )));
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let span = xs[xs.len() - 1] - xs[0];
    let (mut slopes, mut ses, mut growth) = (Vec::new(), Vec::new(), Vec::new());
    for med in &medians {
        let (s, se) = ols_slope(&xs, med);
        slopes.push(s);
        ses.push(se);
        growth.push(if med[0] > 0.0 { s * span / med[0] } else { f64::INFINITY });
    }
    let threshold = 0.1 * slopes[0];
    let diverging = slopes
        .iter()
        .zip(&growth)
        .take_while(|(s, g)| **s > 0.0 && **s >= threshold && **g >= 1.0)
        .count();
    Ok(DivergenceReport {
        sizes: sizes.to_vec(),
        medians,
        slopes,
        slope_std_errors: ses,
        relative_growth: growth,
        threshold,
        diverging,
        q,
        factor_structure: q > 0 && diverging == q,
    })
}

/// Divergence diagnostic over nested cross-sections of one spectral grid:
/// size `n` uses the top-left `n x n` block, i.e. the first `n` series.
pub fn divergence_from_grid(grid: &SpectralGrid, sizes: &[usize], q: usize) -> Result<DivergenceReport> {
    if sizes.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 cross-section sizes, got {}",
            sizes.len()
        )));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sizes must be strictly increasing".into()));
    }
    let k = q + 1;
    if sizes[0] < k || *sizes.last().unwrap() > grid.dim() {
        return Err(Error::Config(format!(
            "sizes must lie in [{k}, {}]",
            grid.dim()
        )));
    }
    let mut medians = vec![Vec::with_capacity(sizes.len()); k];
    for &n in sizes {
        let sub = grid.leading(n)?;
        // eigenvalues only: vectors are not needed for the medians
        let values = par::map_slice(sub.mats(), herm_eigenvalues_desc);
        for (j, m) in medians.iter_mut().enumerate() {
            m.push(median(&values.iter().map(|v| v[j]).collect::<Vec<_>>()));
        }
    }
    divergence_from_medians(sizes, medians, q)
}

/// Divergence diagnostic of a panel's leading sub-panels.
pub fn divergence_diagnostic(
    panel: &Panel,
    sizes: &[usize],
    q: usize,
    m: usize,
    bandwidth: usize,
) -> Result<DivergenceReport> {
    if sizes.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 cross-section sizes, got {}",
            sizes.len()
        )));
    }
    let n_max = *sizes.iter().max().unwrap();
    if n_max > panel.n() {
        return Err(Error::Config(format!(
            "size {n_max} exceeds the panel's {} series",
            panel.n()
        )));
    }
    let sub = panel.select_rows(&(0..n_max).collect::<Vec<_>>())?;
    divergence_from_grid(&spectral_density(&sub, m, bandwidth)?, sizes, q)
}

/// Top `r` eigenpairs of the sample covariance `Gamma(0)` of the demeaned
/// panel: rows of the returned `r x n` matrix are orthonormal eigenvectors.
pub fn static_cov_eigen(panel: &Panel, r: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let g = autocov_zero(panel)?;
    covariance_eigen(&g, r)
}

pub(crate) fn autocov_zero(panel: &Panel) -> Result<DMatrix<f64>> {
    let d = panel.demean()?;
    let y = d.values();
    Ok(y * y.transpose() / y.ncols() as f64)
}

/// Top `r` eigenpairs of a symmetric matrix as (`r x n` rows, values).
pub fn covariance_eigen(g: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if r == 0 || r > g.nrows() {
        return Err(Error::Config(format!(
            "cannot take {r} eigenpairs of a {}x{} matrix",
            g.nrows(),
            g.ncols()
        )));
    }
    let (vals, vecs) = sym_eigen_desc(g);
    Ok((vecs.columns(0, r).transpose(), vals[..r].to_vec()))
}
