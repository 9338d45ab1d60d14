//! Seeded simulation of GDFM panels `y = chi + xi` with known shocks.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::polyalg::filter_causal;
use crate::types::{GdfmSpec, IdioSpec, MatrixPolynomial, Panel, PerSeries, ShockSeries};

/// Default AR coefficient of the idiosyncratic part in the named examples.
pub const DEFAULT_IDIO_AR: f64 = 0.5;

/// A simulated panel together with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub y: Panel,
    pub chi: Panel,
    pub xi: Panel,
    pub eps: ShockSeries,
    pub spec: GdfmSpec,
}

/// Samples discarded before the returned window.
pub fn burn_in(spec: &GdfmSpec) -> usize {
    10 * (spec.max_degree() + 1) + 100
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill keeps the draw order time-major
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Simulate `n` series of length `t` from `spec`.
///
/// One RNG stream seeded from `spec.seed`: shocks are drawn first
/// (`q x (t + burn)`), then the idiosyncratic innovations (`n x (t + burn)`).
pub fn simulate_gdfm(spec: &GdfmSpec, n: usize, t: usize) -> Result<SimulatedPanel> {
    spec.validate()?;
    if n == 0 || t == 0 {
        return Err(Error::Spec(format!("need n >= 1 and T >= 1, got n = {n}, T = {t}")));
    }
    let burn = burn_in(spec);
    let total = t + burn;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let eps = normal_matrix(&mut rng, spec.q, total);
    let innov = normal_matrix(&mut rng, n, total);

    let rows: Vec<Result<Vec<f64>>> = par::map_indexed(n, |i| {
        let out = filter_causal(spec.filter(i), &eps)?;
        Ok(out.columns(burn, t).iter().copied().collect())
    });
    let mut chi = DMatrix::zeros(n, t);
    for (i, r) in rows.into_iter().enumerate() {
        chi.row_mut(i).copy_from_slice(&r?);
    }

    let xi_full = idio_paths(&spec.idio, &innov);
    let xi = xi_full.columns(burn, t).into_owned();
    let y = &chi + &xi;

    Ok(SimulatedPanel {
        y: Panel::from_values(y, "s")?,
        chi: Panel::from_values(chi, "s")?,
        xi: Panel::from_values(xi, "s")?,
        eps: ShockSeries::new(eps.columns(burn, t).into_owned(), true, 0)?,
        spec: spec.clone(),
    })
}

/// AR(1) recursions `xi_it = a_i xi_i,t-1 + v_it` with
/// `v_it = sigma_i (u_it + c u_{i-1,t})`, started from the stationary law.
fn idio_paths(idio: &IdioSpec, u: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, total) = u.shape();
    let c = idio.coupling;
    let mut xi = DMatrix::zeros(n, total);
    for i in 0..n {
        let a = idio.ar.get(i);
        let s = idio.sigma.get(i);
        if s == 0.0 {
            continue;
        }
        let v = |t: usize| {
            let nb = if i > 0 { u[(i - 1, t)] } else { 0.0 };
            s * (u[(i, t)] + c * nb)
        };
        let mut prev = v(0) / (1.0 - a * a).sqrt();
        xi[(i, 0)] = prev;
        for tt in 1..total {
            prev = a * prev + v(tt);
            xi[(i, tt)] = prev;
        }
    }
    xi
}

/// Named single-shock examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    /// Every row `1 - 3L`: no row is causally invertible.
    Eq5,
    /// First row `1 - 0.5L`, the rest `1 - 3L`.
    Eq6,
    /// Rows alternate `1 - 3L`, `1 - 2L`; a stacked pair has the constant
    /// left inverse `(-2, 3)`.
    Eq7,
    /// Every row `1 - L`.
    UnitRoot,
}

impl ExampleKind {
    pub const ALL: [ExampleKind; 4] = [Self::Eq5, Self::Eq6, Self::Eq7, Self::UnitRoot];

    pub fn name(self) -> &'static str {
        match self {
            Self::Eq5 => "eq5",
            Self::Eq6 => "eq6",
            Self::Eq7 => "eq7",
            Self::UnitRoot => "unit_root",
        }
    }

    /// Filter rows (one `1 x 1` polynomial each) for `n` series.
    pub fn filters(self, n: usize) -> Vec<MatrixPolynomial> {
        let poly = |a: f64| MatrixPolynomial::scalar(&[1.0, -a]).expect("non-empty");
        (0..n)
            .map(|i| match self {
                Self::Eq5 => poly(3.0),
                Self::Eq6 if i == 0 => poly(0.5),
                Self::Eq6 => poly(3.0),
                Self::Eq7 if i % 2 == 0 => poly(3.0),
                Self::Eq7 => poly(2.0),
                Self::UnitRoot => poly(1.0),
            })
            .collect()
    }
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown example '{s}', expected one of eq5, eq6, eq7, unit_root"
                ))
            })
    }
}

/// Spec of a named example with AR(1) idiosyncratic parts.
pub fn example_spec(kind: ExampleKind, n: usize, idio_sigma: f64, idio_ar: f64, seed: u64) -> Result<GdfmSpec> {
    if n < 2 {
        return Err(Error::Config(format!("examples need n >= 2, got {n}")));
    }
    let idio = IdioSpec {
        ar: PerSeries::Scalar(idio_ar),
        sigma: PerSeries::Scalar(idio_sigma),
        coupling: 0.0,
    };
    GdfmSpec::new(1, kind.filters(n), idio, seed)
}

/// Simulate a named example; `idio_sigma = 0` gives the noiseless panel.
pub fn example_panel(kind: ExampleKind, n: usize, t: usize, idio_sigma: f64, seed: u64) -> Result<SimulatedPanel> {
    example_panel_with_ar(kind, n, t, idio_sigma, DEFAULT_IDIO_AR, seed)
}

pub fn example_panel_with_ar(
    kind: ExampleKind,
    n: usize,
    t: usize,
    idio_sigma: f64,
    idio_ar: f64,
    seed: u64,
) -> Result<SimulatedPanel> {
    simulate_gdfm(&example_spec(kind, n, idio_sigma, idio_ar, seed)?, n, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::variance;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ma1_spec(seed: u64) -> GdfmSpec {
        GdfmSpec::new(
            1,
            vec![MatrixPolynomial::scalar(&[1.0, -0.5]).unwrap()],
            IdioSpec::off(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_filters_give_pure_idio() {
        let spec = GdfmSpec::new(
            2,
            vec![MatrixPolynomial::zeros(1, 2)],
            IdioSpec::ar1(0.3, 1.0),
            4,
        )
        .unwrap();
        let sim = simulate_gdfm(&spec, 5, 200).unwrap();
        assert!(sim.chi.values().iter().all(|&v| v == 0.0));
        assert_eq!(sim.y.values(), sim.xi.values());
    }

    #[test]
    fn ma1_variance() {
        let sim = simulate_gdfm(&ma1_spec(11), 1, 10_000).unwrap();
        let v = variance(&sim.chi.row(0));
        assert!((v / 1.25 - 1.0).abs() < 0.05, "var = {v}");
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = example_spec(ExampleKind::Eq7, 6, 0.5, 0.5, 3).unwrap();
        let a = simulate_gdfm(&spec, 6, 300).unwrap();
        let b = simulate_gdfm(&spec, 6, 300).unwrap();
        assert_eq!(a.y.values(), b.y.values());
        assert_eq!(a.eps.values(), b.eps.values());
        let c = simulate_gdfm(&example_spec(ExampleKind::Eq7, 6, 0.5, 0.5, 4).unwrap(), 6, 300).unwrap();
        assert_ne!(a.y.values(), c.y.values());
    }

    #[test]
    fn eq7_constant_left_inverse() {
        let sim = example_panel(ExampleKind::Eq7, 4, 500, 0.0, 1).unwrap();
        let y = sim.y.values();
        let e = sim.eps.values();
        for t in 0..500 {
            assert_abs_diff_eq!(-2.0 * y[(0, t)] + 3.0 * y[(1, t)], e[(0, t)], epsilon = 1e-12);
        }
    }

    #[test]
    fn eq5_rows_identical() {
        let sim = example_panel(ExampleKind::Eq5, 3, 100, 0.0, 2).unwrap();
        let y = sim.y.values();
        assert_eq!(y.row(0), y.row(1));
        assert_eq!(y.row(1), y.row(2));
    }

    #[test]
    fn eq6_layout() {
        let f = ExampleKind::Eq6.filters(3);
        assert_eq!(f[0].scalar_coeffs().unwrap(), vec![1.0, -0.5]);
        assert_eq!(f[1].scalar_coeffs().unwrap(), vec![1.0, -3.0]);
        assert_eq!(f[2].scalar_coeffs().unwrap(), vec![1.0, -3.0]);
    }

    #[test]
    fn sum_is_exact() {
        let sim = example_panel(ExampleKind::Eq6, 5, 400, 0.7, 9).unwrap();
        let d = sim.y.values() - (sim.chi.values() + sim.xi.values());
        assert!(d.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn unknown_kind_is_config_error() {
        assert!(matches!("eq8".parse::<ExampleKind>(), Err(Error::Config(_))));
        assert_eq!("unit_root".parse::<ExampleKind>().unwrap(), ExampleKind::UnitRoot);
        assert!(matches!(
            example_panel(ExampleKind::Eq5, 1, 10, 0.0, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn shocks_orthogonal_to_idio() {
        let t = 10_000;
        let sim = example_panel(ExampleKind::Eq7, 4, t, 1.0, 21).unwrap();
        let e = sim.eps.values();
        let x = sim.xi.values();
        let bound = 3.0 / (t as f64).sqrt();
        for i in 0..4 {
            // innovations of the AR(1) part
            let cov: f64 = (1..t)
                .map(|s| e[(0, s)] * (x[(i, s)] - 0.5 * x[(i, s - 1)]))
                .sum::<f64>()
                / t as f64;
            assert!(cov.abs() < bound, "cov = {cov}");
        }
    }

    #[test]
    fn halves_have_similar_variance() {
        let t = 10_000;
        let sim = example_panel(ExampleKind::Eq6, 6, t, 1.0, 5).unwrap();
        for i in 0..6 {
            let r = sim.y.row(i);
            let a = variance(&r[..t / 2]);
            let b = variance(&r[t / 2..]);
            assert!((a / b - 1.0).abs() < 0.2, "series {i}: {a} vs {b}");
        }
    }

    fn low_frequency_power(x: &[f64], ordinates: usize) -> f64 {
        let t = x.len();
        let mean = x.iter().sum::<f64>() / t as f64;
        (1..=ordinates)
            .map(|j| {
                let th = 2.0 * PI * j as f64 / t as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (s, v) in x.iter().enumerate() {
                    re += (v - mean) * (th * s as f64).cos();
                    im -= (v - mean) * (th * s as f64).sin();
                }
                (re * re + im * im) / (2.0 * PI * t as f64)
            })
            .sum::<f64>()
            / ordinates as f64
    }

    #[test]
    fn unit_root_average_loses_low_frequencies() {
        // cross-sectional mean: (1 - L) eps + O(n^-1/2) noise, so its
        // spectrum near zero shrinks like 1/n
        let power: Vec<f64> = [10, 50, 200]
            .iter()
            .map(|&n| {
                let sim = example_panel_with_ar(ExampleKind::UnitRoot, n, 4096, 1.0, 0.5, 17).unwrap();
                let y = sim.y.values();
                let avg: Vec<f64> = (0..y.ncols()).map(|t| y.column(t).mean()).collect();
                low_frequency_power(&avg, 40)
            })
            .collect();
        assert!(power[0] > power[1] && power[1] > power[2], "{power:?}");
    }
}
