use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gdfm_core::blocking::{plan_blocks, BlockPlan, PlanConfig};
use gdfm_core::io::{
    read_json, read_panel_csv, read_shocks_csv, read_spec, write_json, write_panel_csv,
    write_shocks_csv,
};
use gdfm_core::polyalg::InverseOptions;
use gdfm_core::recovery::{recover as run_recovery, RecoveryOptions, RecoveryReport, SubordinationOptions, Truth};
use gdfm_core::simulate::{example_spec, simulate_gdfm};
use gdfm_core::spectral::{
    default_bandwidth, divergence_from_grid, dynamic_eigen, spectral_density, static_cov_eigen,
    DivergenceReport,
};
use gdfm_core::GdfmSpec;
use serde::{Deserialize, Serialize};

use crate::{AnalyzeArgs, BlocksArgs, Failure, RecoverArgs, SimulateArgs};

pub const TOOL: &str = "gdfm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))
}

/// `GDFM_SEED` wins over any configured seed.
fn resolve_seed(configured: u64) -> Result<u64, Failure> {
    match std::env::var("GDFM_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("GDFM_SEED '{s}' is not an unsigned integer"))),
        Err(_) => Ok(configured),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut spec = match (&a.example, &a.spec) {
        (Some(kind), None) => {
            let n = a.n.ok_or_else(|| Failure::Usage("--example needs --n".into()))?;
            example_spec(*kind, n, a.idio_sigma, a.idio_ar, a.seed)?
        }
        (None, Some(path)) => read_spec(path)?,
        _ => return Err(Failure::Usage("give exactly one of --example and --spec".into())),
    };
    spec.seed = resolve_seed(spec.seed)?;
    let n = a.n.unwrap_or(spec.common_filters.len());
    let sim = simulate_gdfm(&spec, n, a.t)?;
    out_dir(&a.out)?;
    write_panel_csv(&a.out.join("y.csv"), &sim.y)?;
    write_panel_csv(&a.out.join("chi.csv"), &sim.chi)?;
    write_panel_csv(&a.out.join("xi.csv"), &sim.xi)?;
    write_shocks_csv(&a.out.join("eps.csv"), &sim.eps)?;
    // echo the filters actually used so `blocks` sees the same rows
    let echo = GdfmSpec::new(spec.q, spec.filters_for(n), spec.idio.clone(), spec.seed)?;
    write_json(&a.out.join("spec.json"), &echo)?;
    println!(
        "simulated n = {n}, T = {}, q = {} (seed {}) into {}",
        a.t,
        spec.q,
        spec.seed,
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct AnalyzeConfig {
    input: PathBuf,
    q: usize,
    sizes: Vec<usize>,
    k: usize,
    grid: usize,
    bandwidth: usize,
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    tool: &'static str,
    version: &'static str,
    config: AnalyzeConfig,
    n: usize,
    t: usize,
    divergence: DivergenceReport,
    /// Median over the grid of each written eigenvalue curve.
    curve_medians: Vec<f64>,
    /// Leading eigenvalues of the sample covariance.
    static_eigenvalues: Vec<f64>,
}

fn default_sizes(n: usize, q: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [n / 4, n / 2, n].iter().map(|&v| v.max(q + 1)).collect();
    s.dedup();
    s
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let y = read_panel_csv(&a.input)?;
    if a.q == 0 {
        return Err(Failure::Usage("--q must be at least 1".into()));
    }
    let k = a.k.unwrap_or(a.q + 1).min(y.n());
    let sizes = a.sizes.clone().unwrap_or_else(|| default_sizes(y.n(), a.q));
    let bandwidth = a.bandwidth.unwrap_or_else(|| default_bandwidth(y.len()));
    let grid = spectral_density(&y, a.grid, bandwidth)?;
    let eig = dynamic_eigen(&grid, k)?;
    let divergence = divergence_from_grid(&grid, &sizes, a.q)?;
    let (_, static_eigenvalues) = static_cov_eigen(&y, k)?;

    out_dir(&a.out)?;
    let mut csv = String::from("theta");
    for j in 1..=k {
        write!(csv, ",mu_{j}").unwrap();
    }
    csv.push('\n');
    for (th, vals) in eig.freqs.iter().zip(&eig.values) {
        write!(csv, "{th}").unwrap();
        for v in vals {
            write!(csv, ",{v}").unwrap();
        }
        csv.push('\n');
    }
    fs::write(a.out.join("eigencurves.csv"), csv)?;
    let diag = Diagnostics {
        tool: TOOL,
        version: VERSION,
        config: AnalyzeConfig {
            input: a.input.clone(),
            q: a.q,
            sizes,
            k,
            grid: a.grid,
            bandwidth,
        },
        n: y.n(),
        t: y.len(),
        curve_medians: (0..k).map(|j| eig.median(j)).collect(),
        static_eigenvalues,
        divergence,
    };
    write_json(&a.out.join("diagnostics.json"), &diag)?;
    println!(
        "slopes {:?}; {} diverging eigenvalue(s); factor structure with q = {}: {}",
        diag.divergence.slopes, diag.divergence.diverging, a.q, diag.divergence.factor_structure
    );
    Ok(())
}

pub fn blocks(a: &BlocksArgs) -> Result<(), Failure> {
    let spec = read_spec(&a.spec)?;
    let n = a.n.unwrap_or(spec.common_filters.len());
    let cfg = PlanConfig {
        grid_size: a.grid,
        rho: a.rho,
        delta_floor: a.delta_floor,
        stack_budget: a.stack_budget,
        inverse: InverseOptions {
            l_max: a.l_max,
            rho: a.rho,
            ..InverseOptions::default()
        },
    };
    let plan = plan_blocks(&spec.filters_for(n), spec.q, &cfg)?;
    out_dir(&a.out)?;
    write_json(&a.out.join("plan.json"), &plan)?;
    println!(
        "{} block(s), {} dropped row(s), {} in remainder, delta = {:.6}",
        plan.blocks.len(),
        plan.dropped.len(),
        plan.remainder.len(),
        plan.delta
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverConfig {
    pub input: PathBuf,
    pub plan: PathBuf,
    pub truth: Option<PathBuf>,
    pub threads: Option<usize>,
    pub parallel: bool,
    pub options: RecoveryOptions,
}

/// Layout of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverOutput {
    pub tool: String,
    pub version: String,
    pub config: RecoverConfig,
    pub report: RecoveryReport,
}

fn read_truth(dir: &Path) -> Result<Truth, Failure> {
    let opt = |name: &str| {
        let p = dir.join(name);
        p.exists().then_some(p)
    };
    Ok(Truth {
        eps: opt("eps.csv").map(|p| read_shocks_csv(&p, true)).transpose()?,
        chi: opt("chi.csv").map(|p| read_panel_csv(&p)).transpose()?,
        xi: opt("xi.csv").map(|p| read_panel_csv(&p)).transpose()?,
    })
}

pub fn recover(a: &RecoverArgs, threads: Option<usize>) -> Result<(), Failure> {
    let y = read_panel_csv(&a.input)?;
    let plan: BlockPlan = read_json(&a.plan)?;
    if plan.n_rows != y.n() {
        return Err(Failure::Usage(format!(
            "plan covers {} series but the panel has {}",
            plan.n_rows,
            y.n()
        )));
    }
    let truth = match &a.truth {
        Some(dir) => read_truth(dir)?,
        None => Truth::default(),
    };
    let options = RecoveryOptions {
        subordination: SubordinationOptions {
            p_lags: a.p_lags,
            n_leads: a.n_leads,
            max_series: a.max_series,
        },
        chi_lags: a.chi_lags,
        p_ar: a.p_ar,
        slack: a.slack,
        ..RecoveryOptions::default()
    };
    let mut report = run_recovery(&y, &plan, &options, &truth)?;
    let eps_hat = report.eps_hat.take().expect("recovery returns shocks");
    let chi_hat = report.chi_hat.take().expect("recovery returns the common component");

    out_dir(&a.out)?;
    write_shocks_csv(&a.out.join("eps_hat.csv"), &eps_hat)?;
    write_panel_csv(&a.out.join("chi_hat.csv"), &chi_hat)?;
    let out = RecoverOutput {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: RecoverConfig {
            input: a.input.clone(),
            plan: a.plan.clone(),
            truth: a.truth.clone(),
            threads,
            parallel: gdfm_core::par::is_parallel(),
            options,
        },
        report,
    };
    write_json(&a.out.join("report.json"), &out)?;
    let r = &out.report;
    let mut line = format!(
        "R2_past {:.4}, lead_gain {:.4}",
        r.subordination.r2_past, r.subordination.lead_gain
    );
    if let Some(c) = r.rotation_metric {
        write!(line, ", canonical corr {c:.4}").unwrap();
    }
    if let Some(c) = r.chi_r2 {
        write!(line, ", chi R2 {c:.4}").unwrap();
    }
    println!("{line}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_stay_above_q() {
        assert_eq!(default_sizes(40, 1), vec![10, 20, 40]);
        assert_eq!(default_sizes(6, 2), vec![3, 6]);
    }
}
