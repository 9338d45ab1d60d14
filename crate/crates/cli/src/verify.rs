//! Invariant suite over a finished run directory.

use std::path::Path;

use gdfm_core::blocking::BlockPlan;
use gdfm_core::io::{read_json, read_panel_csv, read_shocks_csv};
use gdfm_core::recovery::{
    max_autocorrelation, reconstruct_chi, rotation_metric, subordination_score,
};
use gdfm_core::{Panel, ShockSeries};
use nalgebra::DMatrix;

use crate::commands::RecoverOutput;
use crate::{Failure, VerifyArgs};

/// Shocks recovered from the past must be explained by it.
const R2_PAST_MIN: f64 = 0.9;
const LEAD_GAIN_MAX: f64 = 0.02;
/// Agreement between recomputed and recorded values.
const MATCH_TOL: f64 = 1e-8;

fn check(name: &'static str, ok: bool, detail: String) -> Result<(), Failure> {
    if ok {
        println!("ok   {name}: {detail}");
        Ok(())
    } else {
        Err(Failure::Verify { check: name, detail })
    }
}

fn need(dir: &Path, name: &str) -> Result<std::path::PathBuf, Failure> {
    let p = dir.join(name);
    if p.exists() {
        Ok(p)
    } else {
        Err(Failure::Usage(format!("missing {}", p.display())))
    }
}

/// Fixed orthogonal matrix: a sign flip composed with plane rotations.
fn rotation(q: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::identity(q, q);
    m[(0, 0)] = -1.0;
    for k in 0..q.saturating_sub(1) {
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let mut g = DMatrix::<f64>::identity(q, q);
        g[(k, k)] = c;
        g[(k, k + 1)] = -s;
        g[(k + 1, k)] = s;
        g[(k + 1, k + 1)] = c;
        m = g * m;
    }
    m
}

fn max_rel_diff(a: &Panel, b: &Panel) -> f64 {
    let scale = b.values().abs().max().max(1.0);
    (a.values() - b.values()).abs().max() / scale
}

pub fn run(a: &VerifyArgs) -> Result<(), Failure> {
    let dir = &a.run;
    let y = read_panel_csv(&need(dir, "y.csv")?)?;
    let plan: BlockPlan = read_json(&need(dir, "plan.json")?)?;
    let eps_hat = read_shocks_csv(&need(dir, "eps_hat.csv")?, true)?;
    let chi_hat = read_panel_csv(&need(dir, "chi_hat.csv")?)?;
    let out: RecoverOutput = read_json(&need(dir, "report.json")?)?;
    let report = &out.report;
    let opts = &out.config.options;
    let truth_eps = match dir.join("eps.csv") {
        p if p.exists() => Some(read_shocks_csv(&p, true)?),
        _ => None,
    };

    let finite = eps_hat.values().iter().all(|v| v.is_finite()) && chi_hat.values().iter().all(|v| v.is_finite());
    check(
        "shape",
        finite && eps_hat.q() == plan.q && chi_hat.n() == y.n() && plan.n_rows == y.n(),
        format!(
            "q = {} (plan {}), chi_hat rows {} (panel {}), all values finite: {finite}",
            eps_hat.q(),
            plan.q,
            chi_hat.n(),
            y.n()
        ),
    )?;
    check(
        "report",
        report.q == eps_hat.q() && report.n_obs == eps_hat.len() && report.t0 == eps_hat.t0(),
        format!(
            "report q = {}, n_obs = {}, t0 = {}; eps_hat q = {}, length {}, t0 = {}",
            report.q,
            report.n_obs,
            report.t0,
            eps_hat.q(),
            eps_hat.len(),
            eps_hat.t0()
        ),
    )?;

    let sub = subordination_score(&eps_hat, &y, &opts.subordination)?;
    check(
        "subordination",
        sub.r2_past >= R2_PAST_MIN
            && sub.lead_gain <= LEAD_GAIN_MAX
            && (sub.r2_past - report.subordination.r2_past).abs() < 1e-6,
        format!(
            "R2_past {:.4} (>= {R2_PAST_MIN}, recorded {:.4}), lead_gain {:.4} (<= {LEAD_GAIN_MAX})",
            sub.r2_past, report.subordination.r2_past, sub.lead_gain
        ),
    )?;

    let q_mat = rotation(eps_hat.q());
    let rotated = ShockSeries::new(&q_mat * eps_hat.values(), true, eps_hat.t0())?;
    let sub_rot = subordination_score(&rotated, &y, &opts.subordination)?;
    let chi_a = reconstruct_chi(&y, &eps_hat, opts.chi_lags)?;
    let chi_b = reconstruct_chi(&y, &rotated, opts.chi_lags)?;
    let mut detail = format!(
        "R2 change {:.1e}, chi change {:.1e}",
        (sub.r2_past - sub_rot.r2_past).abs(),
        max_rel_diff(&chi_b, &chi_a)
    );
    let mut ok = (sub.r2_past - sub_rot.r2_past).abs() < MATCH_TOL
        && (sub.lead_gain - sub_rot.lead_gain).abs() < MATCH_TOL
        && max_rel_diff(&chi_b, &chi_a) < MATCH_TOL;
    if let (Some(eps), Some(recorded)) = (&truth_eps, report.rotation_metric) {
        if report.reference == Some(gdfm_core::recovery::ReferenceKind::Shocks) {
            let c1 = rotation_metric(&eps_hat, eps)?;
            let c2 = rotation_metric(&rotated, eps)?;
            ok &= (c1 - c2).abs() < MATCH_TOL && (c1 - recorded).abs() < 1e-6;
            detail.push_str(&format!(", canonical corr {c1:.4} (rotated {c2:.4}, recorded {recorded:.4})"));
        }
    }
    check("rotation", ok, detail)?;

    let acf = max_autocorrelation(&eps_hat, opts.whiteness_lags);
    let threshold = 4.0 / (eps_hat.len() as f64).sqrt();
    check(
        "whiteness",
        acf < threshold,
        format!("max |autocorrelation| over lags 1..={} is {acf:.4} (< {threshold:.4})", opts.whiteness_lags),
    )?;

    let chi_ok = chi_a.t0() == chi_hat.t0() && chi_a.len() == chi_hat.len() && max_rel_diff(&chi_a, &chi_hat) < MATCH_TOL;
    check(
        "chi_hat",
        chi_ok,
        format!("recomputed projection matches chi_hat.csv: {chi_ok}"),
    )?;
    println!("all checks passed");
    Ok(())
}
