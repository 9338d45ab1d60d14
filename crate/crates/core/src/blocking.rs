//! Partitioning filter rows into full-rank blocks and making each block
//! causally invertible.
//!
//! The greedy pass groups rows into `q x q` blocks of full rank almost
//! everywhere. Each block is then repaired by the first strategy that works:
//! direct inversion, stacking extra rows, mirroring inside zeros (single
//! shock only) or factoring out unit-circle zeros.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::singular_values_desc;
use crate::par;
use crate::polyalg::{
    causal_inverse_series, classify_zeros, factor_unit_circle_zeros, gram_det_profile,
    min_singular_on_grid, mirror_inside_zeros, poly_det, scalar_roots, CausalInverse,
    InverseKind, InverseOptions, DEFAULT_RHO,
};
use crate::types::{MatrixPolynomial, C64};

/// Coefficients below this magnitude count as zero when dropping rows.
pub const ZERO_ROW_TOL: f64 = 1e-12;

/// Normalised Gram determinant below which a grid point counts as singular.
pub const RANK_TOL: f64 = 1e-10;

/// Fraction of grid points that must be non-singular for full rank.
pub const RANK_FRACTION: f64 = 0.9;

/// How a block was made causally invertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Direct,
    Stacked,
    Mirrored,
    Factored,
}

/// Which shocks a block's inverse recovers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    /// The shocks driving the model.
    Original,
    /// The Wold innovations of the block, an all-pass transform of the shocks.
    Wold,
}

/// Result of [`check_rank_ae`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCheck {
    pub full: bool,
    /// Grid frequencies where the Gram determinant is numerically zero.
    pub singular_freqs: Vec<f64>,
}

/// Greedy row layout before any inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub q: usize,
    /// Block rows in block order, followed by the remainder.
    pub order: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    pub remainder: Vec<usize>,
    pub dropped: Vec<DroppedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub row: usize,
    pub reason: String,
}

/// An accepted, causally invertible block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Filter row indices, in the order they are stacked.
    pub rows: Vec<usize>,
    /// The stacked filters `k^(j)` (`q_j x q`).
    pub poly: MatrixPolynomial,
    pub strategy: Strategy,
    pub innovation: Innovation,
    /// Unit-circle factor (`1 x 1`, equal to 1 unless factored).
    pub g: MatrixPolynomial,
    /// The polynomial actually inverted.
    pub h: MatrixPolynomial,
    /// Truncated causal left inverse of `h` (`q x q_j`).
    pub inverse: MatrixPolynomial,
    pub inverse_kind: InverseKind,
    pub inverse_lag0_error: f64,
    pub inverse_residual: f64,
    /// `min_theta sigma_q(h(e^{-i theta}))`.
    pub delta: f64,
    /// `delta` fell below the configured floor.
    pub flagged: bool,
    pub singular_freqs: Vec<f64>,
}

/// Configuration of [`plan_blocks`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub grid_size: usize,
    pub rho: f64,
    pub delta_floor: f64,
    /// Extra rows a block may borrow when stacking.
    pub stack_budget: usize,
    pub inverse: InverseOptions,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            grid_size: 128,
            rho: DEFAULT_RHO,
            delta_floor: 1e-4,
            stack_budget: 3,
            inverse: InverseOptions::default(),
        }
    }
}

/// Blocks, ordering and bookkeeping for a family of filter rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub q: usize,
    pub n_rows: usize,
    /// Non-zero rows: greedy block rows, then the remainder.
    pub order: Vec<usize>,
    pub blocks: Vec<Block>,
    pub remainder: Vec<usize>,
    pub dropped: Vec<DroppedRow>,
    /// `min_j delta_j`.
    pub delta: f64,
    pub config: PlanConfig,
}

impl BlockPlan {
    /// Largest degree among the stored inverse series.
    pub fn max_inverse_degree(&self) -> usize {
        self.blocks.iter().map(|b| b.inverse.degree()).max().unwrap_or(0)
    }

    pub fn has_strategy(&self, s: Strategy) -> bool {
        self.blocks.iter().any(|b| b.strategy == s)
    }

    /// Rows used by accepted blocks.
    pub fn block_rows(&self) -> Vec<usize> {
        self.blocks.iter().flat_map(|b| b.rows.iter().copied()).collect()
    }

    pub fn innovation(&self) -> Innovation {
        if self.blocks.iter().all(|b| b.innovation == Innovation::Wold) {
            Innovation::Wold
        } else {
            Innovation::Original
        }
    }
}

/// Split rows into non-zero (kept) and zero (dropped) indices.
pub fn drop_zero_rows(filters: &[MatrixPolynomial]) -> Result<(Vec<usize>, Vec<usize>)> {
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..filters.len()).partition(|&i| !filters[i].is_zero(ZERO_ROW_TOL));
    if kept.is_empty() {
        return Err(Error::NoCommonComponent);
    }
    Ok((kept, dropped))
}

/// Whether `block` (`r x q`) has rank `min(r, q)` almost everywhere.
///
/// The Gram determinant (of the smaller side) is normalised by the largest
/// Hadamard bound over the grid. Rank is full when at least 90% of the grid
/// points exceed `1e-10`; the remaining points are reported as isolated
/// singular frequencies.
pub fn check_rank_ae(block: &MatrixPolynomial, m: usize) -> RankCheck {
    let profile = gram_det_profile(block, m);
    let singular: Vec<f64> = profile
        .iter()
        .filter(|(_, d)| !(*d > RANK_TOL))
        .map(|(th, _)| *th)
        .collect();
    let ok = profile.len() - singular.len();
    RankCheck {
        full: ok as f64 >= RANK_FRACTION * profile.len() as f64,
        singular_freqs: singular,
    }
}

fn stack_rows(filters: &[MatrixPolynomial], rows: &[usize]) -> Result<MatrixPolynomial> {
    let parts: Vec<&MatrixPolynomial> = rows.iter().map(|&i| &filters[i]).collect();
    MatrixPolynomial::stack(&parts)
}

/// Greedy order-preserving layout of `q x q` full-rank blocks.
///
/// Rows are appended to the open block when they raise its rank; skipped
/// rows are revisited for later blocks. Rows left when no further block
/// can be completed form the remainder.
pub fn build_blocks(filters: &[MatrixPolynomial], q: usize, m: usize) -> Result<BlockLayout> {
    if q == 0 {
        return Err(Error::Config("q must be at least 1".into()));
    }
    if let Some(f) = filters.iter().find(|f| f.rows() != 1 || f.cols() != q) {
        return Err(Error::Shape(format!(
            "filter rows must be 1x{q}, found {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    let (kept, zero) = drop_zero_rows(filters)?;
    let mut available = kept;
    let mut blocks = Vec::new();
    let mut best_rank = 0;
    while !available.is_empty() {
        let mut current: Vec<usize> = Vec::with_capacity(q);
        for &row in &available {
            let mut cand = current.clone();
            cand.push(row);
            if check_rank_ae(&stack_rows(filters, &cand)?, m).full {
                current = cand;
                if current.len() == q {
                    break;
                }
            }
        }
        best_rank = best_rank.max(current.len());
        if current.len() < q {
            break;
        }
        available.retain(|r| !current.contains(r));
        blocks.push(current);
    }
    if blocks.is_empty() {
        return Err(Error::RankDeficientPanel { found: best_rank, q });
    }
    let mut order: Vec<usize> = blocks.iter().flatten().copied().collect();
    order.extend(&available);
    Ok(BlockLayout {
        q,
        order,
        blocks,
        remainder: available,
        dropped: zero
            .into_iter()
            .map(|row| DroppedRow {
                row,
                reason: "zero filter row".into(),
            })
            .collect(),
    })
}

fn finish_block(
    rows: Vec<usize>,
    poly: MatrixPolynomial,
    strategy: Strategy,
    innovation: Innovation,
    g: MatrixPolynomial,
    h: MatrixPolynomial,
    inv: CausalInverse,
    cfg: &PlanConfig,
) -> Block {
    let delta = min_singular_on_grid(&h, cfg.grid_size);
    let singular_freqs = check_rank_ae(&poly, cfg.grid_size).singular_freqs;
    Block {
        rows,
        poly,
        strategy,
        innovation,
        g,
        h,
        inverse: inv.series,
        inverse_kind: inv.kind,
        inverse_lag0_error: inv.lag0_error,
        inverse_residual: inv.residual_energy,
        delta,
        flagged: delta < cfg.delta_floor,
        singular_freqs,
    }
}

/// Invert a square block directly; `Ok(None)` when its determinant has a
/// zero in the closed unit disc.
fn try_direct(filters: &[MatrixPolynomial], rows: &[usize], cfg: &PlanConfig) -> Result<Option<Block>> {
    let poly = stack_rows(filters, rows)?;
    match causal_inverse_series(&poly, &cfg.inverse) {
        Ok(inv) => Ok(Some(finish_block(
            rows.to_vec(),
            poly.clone(),
            Strategy::Direct,
            Innovation::Original,
            MatrixPolynomial::identity(1),
            poly,
            inv,
            cfg,
        ))),
        Err(Error::NotMinimumPhase { .. } | Error::NotCausallyInvertible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Zeros of `det k` in the closed unit disc, widened to the radius below
/// which a truncated inverse series cannot converge.
fn bad_zeros(poly: &MatrixPolynomial, cfg: &PlanConfig) -> Result<Vec<C64>> {
    let det = poly_det(poly)?;
    let radius = (1.0 + cfg.rho).max(cfg.inverse.slow_radius());
    Ok(scalar_roots(&det)?
        .into_iter()
        .filter(|z| z.norm() <= radius)
        .collect())
}

/// `k(z)` has rank `q` at `z`.
fn full_rank_at(k: &MatrixPolynomial, z: C64) -> bool {
    let sv = singular_values_desc(&k.eval(z));
    sv[k.cols() - 1] > 1e-6 * sv[0].max(f64::MIN_POSITIVE)
}

/// Make one square block causally invertible.
///
/// Cascade: direct inversion; stacking up to `cfg.stack_budget` rows from
/// `candidates` (a candidate is taken only if it restores full rank at a
/// zero of the determinant in the closed disc); mirroring inside zeros
/// (`q = 1`); factoring out unit-circle zeros. Otherwise the block is
/// irreparable. Mirrored blocks recover Wold innovations, not the shocks.
pub fn repair_block(
    filters: &[MatrixPolynomial],
    rows: &[usize],
    candidates: &[usize],
    cfg: &PlanConfig,
) -> Result<Block> {
    if let Some(b) = try_direct(filters, rows, cfg)? {
        return Ok(b);
    }
    let poly = stack_rows(filters, rows)?;
    let q = poly.cols();
    let zeros = bad_zeros(&poly, cfg)?;

    // stacking
    let mut stacked_rows = rows.to_vec();
    let mut unresolved = zeros.clone();
    for &c in candidates {
        if stacked_rows.len() - rows.len() >= cfg.stack_budget || unresolved.is_empty() {
            break;
        }
        if stacked_rows.contains(&c) {
            continue;
        }
        let mut trial = stacked_rows.clone();
        trial.push(c);
        let k = stack_rows(filters, &trial)?;
        let still: Vec<C64> = unresolved
            .iter()
            .copied()
            .filter(|&z| !full_rank_at(&k, z))
            .collect();
        if still.len() < unresolved.len() {
            stacked_rows = trial;
            unresolved = still;
        }
    }
    if unresolved.is_empty() && stacked_rows.len() > rows.len() {
        let k = stack_rows(filters, &stacked_rows)?;
        match causal_inverse_series(&k, &cfg.inverse) {
            Ok(inv) => {
                return Ok(finish_block(
                    stacked_rows,
                    k.clone(),
                    Strategy::Stacked,
                    Innovation::Original,
                    MatrixPolynomial::identity(1),
                    k,
                    inv,
                    cfg,
                ))
            }
            Err(Error::NotCausallyInvertible { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let inside = zeros.iter().any(|z| z.norm() < 1.0 - cfg.rho);
    let on_circle = zeros.iter().any(|z| z.norm() >= 1.0 - cfg.rho);

    if inside && !on_circle && q == 1 {
        let mirrored = mirror_inside_zeros(&poly, cfg.rho)?;
        match causal_inverse_series(&mirrored, &cfg.inverse) {
            Ok(inv) => {
                return Ok(finish_block(
                    rows.to_vec(),
                    poly,
                    Strategy::Mirrored,
                    Innovation::Wold,
                    MatrixPolynomial::identity(1),
                    mirrored,
                    inv,
                    cfg,
                ))
            }
            Err(Error::NotMinimumPhase { .. } | Error::NotCausallyInvertible { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    if on_circle && !inside {
        if let Some((g, h)) = split_unit_circle(&poly, cfg.rho)? {
            match causal_inverse_series(&h, &cfg.inverse) {
                Ok(inv) => {
                    return Ok(finish_block(
                        rows.to_vec(),
                        poly,
                        Strategy::Factored,
                        Innovation::Original,
                        g,
                        h,
                        inv,
                        cfg,
                    ))
                }
                Err(Error::NotMinimumPhase { .. } | Error::NotCausallyInvertible { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let why = if inside {
        "determinant has a zero inside the unit disc that no candidate row removes"
    } else {
        "zeros on or too near the unit circle cannot be factored out of every entry"
    };
    Err(Error::Irreparable(format!("rows {rows:?}: {why}")))
}

/// `k = g h` with scalar `g` carrying the unit-circle zeros, when `g`
/// (taken from the first non-zero entry) divides every entry.
fn split_unit_circle(
    poly: &MatrixPolynomial,
    rho: f64,
) -> Result<Option<(MatrixPolynomial, MatrixPolynomial)>> {
    let entries: Vec<MatrixPolynomial> = (0..poly.rows())
        .flat_map(|r| (0..poly.cols()).map(move |c| (r, c)))
        .map(|(r, c)| {
            let coeffs: Vec<f64> = poly.coeffs().iter().map(|m| m[(r, c)]).collect();
            MatrixPolynomial::scalar(&coeffs)
        })
        .collect::<Result<_>>()?;
    let Some(first) = entries.iter().find(|e| !e.is_zero(ZERO_ROW_TOL)) else {
        return Ok(None);
    };
    let (g, _) = factor_unit_circle_zeros(first, rho)?;
    if g.degree() == 0 {
        return Ok(None);
    }
    let gc = g.scalar_coeffs()?;
    let mut quotients = Vec::with_capacity(entries.len());
    for e in &entries {
        let ec = e.scalar_coeffs()?;
        let (quot, rem) = divide(&ec, &gc);
        let scale = ec.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        if rem.iter().any(|v| v.abs() > 1e-8 * scale) {
            return Ok(None);
        }
        quotients.push(quot);
    }
    let deg = quotients.iter().map(|q| q.len()).max().unwrap_or(1) - 1;
    let (r, c) = (poly.rows(), poly.cols());
    let coeffs = (0..=deg)
        .map(|lag| {
            nalgebra::DMatrix::from_fn(r, c, |i, j| {
                quotients[i * c + j].get(lag).copied().unwrap_or(0.0)
            })
        })
        .collect();
    let h = MatrixPolynomial::new(coeffs)?.trimmed(1e-13);
    if classify_zeros(&poly_det_or_scalar(&h)?, rho)?.is_strictly_minimum_phase() {
        Ok(Some((g, h)))
    } else {
        Ok(None)
    }
}

fn poly_det_or_scalar(h: &MatrixPolynomial) -> Result<MatrixPolynomial> {
    if h.rows() == h.cols() {
        poly_det(h)
    } else {
        Err(Error::Shape("factored blocks must be square".into()))
    }
}

/// Scalar long division returning (quotient, remainder).
fn divide(p: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dg = g.len() - 1;
    if p.len() <= dg {
        return (vec![0.0], p.to_vec());
    }
    let mut rem = p.to_vec();
    let mut quot = vec![0.0; p.len() - dg];
    for k in (0..quot.len()).rev() {
        let coef = rem[k + dg] / g[dg];
        quot[k] = coef;
        for (j, &gj) in g.iter().enumerate() {
            rem[k + j] -= coef * gj;
        }
    }
    rem.truncate(dg);
    (quot, rem)
}

/// Greedy layout, repair cascade and bookkeeping for a filter family.
///
/// Direct blocks are inverted first (in parallel). The remaining layout
/// blocks are repaired in order; their candidate rows are the rows of other
/// non-direct blocks and the remainder that have not been consumed yet.
/// If any block recovers the original shocks, mirrored blocks (which
/// recover a different innovation process) are excluded as irreparable.
pub fn plan_blocks(filters: &[MatrixPolynomial], q: usize, cfg: &PlanConfig) -> Result<BlockPlan> {
    let layout = build_blocks(filters, q, cfg.grid_size)?;
    let direct: Vec<Result<Option<Block>>> =
        par::map_slice(&layout.blocks, |rows| try_direct(filters, rows, cfg));
    let mut slots: Vec<Option<Block>> = Vec::with_capacity(direct.len());
    for d in direct {
        slots.push(d?);
    }

    let mut consumed: BTreeSet<usize> = slots
        .iter()
        .flatten()
        .flat_map(|b| b.rows.iter().copied())
        .collect();
    let mut dropped = layout.dropped.clone();
    let mut remainder = layout.remainder.clone();
    let mut pool: Vec<usize> = layout
        .blocks
        .iter()
        .zip(&slots)
        .filter(|(_, s)| s.is_none())
        .flat_map(|(rows, _)| rows.iter().copied())
        .chain(layout.remainder.iter().copied())
        .collect();
    pool.sort_unstable();

    for (j, rows) in layout.blocks.iter().enumerate() {
        if slots[j].is_some() {
            continue;
        }
        if rows.iter().any(|r| consumed.contains(r)) {
            // partly taken by an earlier stacked block: the rest is left over
            remainder.extend(rows.iter().copied());
            continue;
        }
        let candidates: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|r| !consumed.contains(r) && !rows.contains(r))
            .collect();
        match repair_block(filters, rows, &candidates, cfg) {
            Ok(b) => {
                consumed.extend(b.rows.iter().copied());
                slots[j] = Some(b);
            }
            Err(Error::Irreparable(reason)) => {
                consumed.extend(rows.iter().copied());
                dropped.extend(rows.iter().map(|&row| DroppedRow {
                    row,
                    reason: reason.clone(),
                }));
            }
            Err(e) => return Err(e),
        }
    }
    remainder.retain(|r| !consumed.contains(r));
    remainder.sort_unstable();
    remainder.dedup();

    let mut blocks: Vec<Block> = slots.into_iter().flatten().collect();
    exclude_inconsistent_mirrors(&mut blocks, &mut dropped, cfg.rho)?;
    if blocks.is_empty() {
        return Err(Error::Irreparable(
            "no block of the filter family can be causally inverted".into(),
        ));
    }
    dropped.sort_by_key(|d| d.row);

    let mut order: Vec<usize> = blocks.iter().flat_map(|b| b.rows.iter().copied()).collect();
    let in_order: BTreeSet<usize> = order.iter().copied().collect();
    order.extend(layout.order.iter().filter(|r| !in_order.contains(r)));
    let delta = blocks.iter().map(|b| b.delta).fold(f64::INFINITY, f64::min);
    Ok(BlockPlan {
        q,
        n_rows: filters.len(),
        order,
        blocks,
        remainder,
        dropped,
        delta,
        config: *cfg,
    })
}

/// Mirrored blocks recover Wold innovations; these coincide across blocks
/// only when the blocks share their inside zeros, and they never coincide
/// with the shocks recovered by direct, stacked or factored blocks.
fn exclude_inconsistent_mirrors(
    blocks: &mut Vec<Block>,
    dropped: &mut Vec<DroppedRow>,
    rho: f64,
) -> Result<()> {
    let has_original = blocks.iter().any(|b| b.innovation == Innovation::Original);
    let mut reference: Option<Vec<C64>> = None;
    let mut keep = Vec::with_capacity(blocks.len());
    for b in blocks.drain(..) {
        if b.strategy != Strategy::Mirrored {
            keep.push(b);
            continue;
        }
        let reason = if has_original {
            Some("inside zero shared by all candidate rows while other blocks recover the shocks directly".to_string())
        } else {
            let mut zs = classify_zeros(&b.poly, rho)?.inside_roots();
            zs.sort_by(|a, c| a.re.total_cmp(&c.re).then(a.im.total_cmp(&c.im)));
            match &reference {
                None => {
                    reference = Some(zs);
                    None
                }
                Some(r) if same_roots(r, &zs) => None,
                Some(_) => Some("inside zeros differ from the first mirrored block".to_string()),
            }
        };
        match reason {
            None => keep.push(b),
            Some(reason) => dropped.extend(b.rows.iter().map(|&row| DroppedRow {
                row,
                reason: format!("irreparable: {reason}"),
            })),
        }
    }
    *blocks = keep;
    Ok(())
}

fn same_roots(a: &[C64], b: &[C64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-6)
}

/// Per-block `delta_j` on an `m`-point grid and their minimum.
pub fn delta_bound(plan: &BlockPlan, m: usize) -> (f64, Vec<f64>) {
    let per: Vec<f64> = par::map_slice(&plan.blocks, |b| min_singular_on_grid(&b.h, m));
    (per.iter().copied().fold(f64::INFINITY, f64::min), per)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::inverse_residual;
    use crate::simulate::ExampleKind;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(c: &[f64]) -> MatrixPolynomial {
        MatrixPolynomial::scalar(c).unwrap()
    }

    fn constant_row(v: &[f64]) -> MatrixPolynomial {
        MatrixPolynomial::constant(DMatrix::from_row_slice(1, v.len(), v)).unwrap()
    }

    #[test]
    fn drop_exact_zero_row() {
        let f = vec![scalar(&[1.0, -3.0]), scalar(&[0.0]), scalar(&[1.0, -2.0])];
        assert_eq!(drop_zero_rows(&f).unwrap(), (vec![0, 2], vec![1]));
    }

    #[test]
    fn drop_nothing() {
        let f = vec![scalar(&[1.0]), scalar(&[2.0])];
        assert_eq!(drop_zero_rows(&f).unwrap(), (vec![0, 1], vec![]));
    }

    #[test]
    fn drop_tiny_row() {
        let f = vec![scalar(&[1e-15, 1e-15]), scalar(&[1.0])];
        assert_eq!(drop_zero_rows(&f).unwrap(), (vec![1], vec![0]));
        assert!(matches!(
            drop_zero_rows(&[scalar(&[0.0])]),
            Err(Error::NoCommonComponent)
        ));
    }

    #[test]
    fn rank_identity() {
        let r = check_rank_ae(&MatrixPolynomial::identity(2), 128);
        assert!(r.full);
        assert!(r.singular_freqs.is_empty());
    }

    #[test]
    fn rank_duplicate_rows_single_shock() {
        let row = scalar(&[1.0, -3.0]);
        let k = MatrixPolynomial::stack(&[&row, &row]).unwrap();
        assert!(check_rank_ae(&k, 128).full);
    }

    #[test]
    fn rank_isolated_zero() {
        let k = MatrixPolynomial::new(vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
        ])
        .unwrap();
        let r = check_rank_ae(&k, 128);
        assert!(r.full);
        assert_eq!(r.singular_freqs.len(), 1);
        assert!(r.singular_freqs[0].abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_pair() {
        let a = constant_row(&[1.0, 2.0]);
        let b = constant_row(&[2.0, 4.0]);
        assert!(!check_rank_ae(&MatrixPolynomial::stack(&[&a, &b]).unwrap(), 128).full);
    }

    #[test]
    fn collinear_row_is_deferred() {
        let f = vec![constant_row(&[1.0, 0.0]), constant_row(&[2.0, 0.0]), constant_row(&[0.0, 1.0])];
        let l = build_blocks(&f, 2, 128).unwrap();
        assert_eq!(l.blocks, vec![vec![0, 2]]);
        assert_eq!(l.remainder, vec![1]);
        assert_eq!(l.order, vec![0, 2, 1]);
    }

    #[test]
    fn eq7_rows_are_single_blocks() {
        let f = ExampleKind::Eq7.filters(6);
        let l = build_blocks(&f, 1, 128).unwrap();
        assert_eq!(l.blocks, (0..6).map(|i| vec![i]).collect::<Vec<_>>());
        assert!(l.remainder.is_empty());
    }

    #[test]
    fn random_rows_fill_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let f: Vec<MatrixPolynomial> = (0..20)
            .map(|_| {
                MatrixPolynomial::new(
                    (0..3)
                        .map(|_| DMatrix::from_fn(1, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let l = build_blocks(&f, 3, 128).unwrap();
        assert_eq!(l.blocks.len(), 6);
        assert_eq!(l.remainder.len(), 2);
        for b in &l.blocks {
            let k = stack_rows(&f, b).unwrap();
            for (_, d) in gram_det_profile(&k, 64) {
                assert!(d > RANK_TOL);
            }
        }
    }

    #[test]
    fn multiples_of_one_row_are_rank_deficient() {
        let base = MatrixPolynomial::new(vec![
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[-0.3, 0.2]),
        ])
        .unwrap();
        let f: Vec<_> = (1..=8).map(|i| base.scale(i as f64)).collect();
        assert!(matches!(
            build_blocks(&f, 2, 128),
            Err(Error::RankDeficientPanel { found: 1, q: 2 })
        ));
    }

    #[test]
    fn stacked_repair_worked_example() {
        let f = vec![scalar(&[1.0, -3.0]), scalar(&[1.0, -2.0])];
        let b = repair_block(&f, &[0], &[1], &PlanConfig::default()).unwrap();
        assert_eq!(b.strategy, Strategy::Stacked);
        assert_eq!(b.rows, vec![0, 1]);
        assert_eq!(b.inverse.degree(), 0);
        assert_abs_diff_eq!(b.inverse.coeff(0)[(0, 0)], -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(b.inverse.coeff(0)[(0, 1)], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn mirrored_repair_worked_example() {
        let f = vec![scalar(&[1.0, -3.0])];
        let b = repair_block(&f, &[0], &[], &PlanConfig::default()).unwrap();
        assert_eq!(b.strategy, Strategy::Mirrored);
        assert_eq!(b.innovation, Innovation::Wold);
        assert_eq!(b.h.scalar_coeffs().unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn factored_repair_worked_example() {
        let f = vec![scalar(&[1.0, -1.0])];
        let b = repair_block(&f, &[0], &[], &PlanConfig::default()).unwrap();
        assert_eq!(b.strategy, Strategy::Factored);
        assert_eq!(b.g.scalar_coeffs().unwrap(), vec![1.0, -1.0]);
        let h = b.h.scalar_coeffs().unwrap();
        assert_eq!(h.len(), 1);
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn direct_repair_for_minimum_phase() {
        let f = vec![scalar(&[1.0, -0.5])];
        let b = repair_block(&f, &[0], &[], &PlanConfig::default()).unwrap();
        assert_eq!(b.strategy, Strategy::Direct);
    }

    #[test]
    fn shared_zero_candidates_do_not_stack() {
        let f = vec![scalar(&[1.0, -3.0]), scalar(&[2.0, -6.0])];
        let b = repair_block(&f, &[0], &[1], &PlanConfig::default()).unwrap();
        assert_eq!(b.strategy, Strategy::Mirrored);
        assert_eq!(b.rows, vec![0]);
    }

    #[test]
    fn delta_examples() {
        let id = MatrixPolynomial::identity(1);
        assert_abs_diff_eq!(min_singular_on_grid(&id, 128), 1.0, epsilon = 1e-15);
        let m = scalar(&[3.0, -1.0]);
        assert_abs_diff_eq!(min_singular_on_grid(&m, 128), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn eq7_stacked_delta_converges() {
        let k = MatrixPolynomial::stack(&[&scalar(&[1.0, -3.0]), &scalar(&[1.0, -2.0])]).unwrap();
        let coarse = min_singular_on_grid(&k, 128);
        let fine = min_singular_on_grid(&k, 1024);
        assert!((coarse - fine).abs() < 1e-3);
    }

    #[test]
    fn eq7_plan_stacks_pairs() {
        let f = ExampleKind::Eq7.filters(6);
        let plan = plan_blocks(&f, 1, &PlanConfig::default()).unwrap();
        assert_eq!(plan.blocks.len(), 3);
        for (j, b) in plan.blocks.iter().enumerate() {
            assert_eq!(b.strategy, Strategy::Stacked);
            assert_eq!(b.rows, vec![2 * j, 2 * j + 1]);
        }
        assert!(plan.dropped.is_empty());
        assert_eq!(plan.order, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn eq5_plan_mirrors_every_row() {
        let plan = plan_blocks(&ExampleKind::Eq5.filters(4), 1, &PlanConfig::default()).unwrap();
        assert_eq!(plan.blocks.len(), 4);
        assert!(plan.blocks.iter().all(|b| b.strategy == Strategy::Mirrored));
        assert_eq!(plan.innovation(), Innovation::Wold);
    }

    #[test]
    fn eq6_plan_keeps_only_the_invertible_row() {
        let plan = plan_blocks(&ExampleKind::Eq6.filters(5), 1, &PlanConfig::default()).unwrap();
        assert_eq!(plan.blocks.len(), 1);
        assert_eq!(plan.blocks[0].strategy, Strategy::Direct);
        assert_eq!(plan.blocks[0].rows, vec![0]);
        let dropped: Vec<usize> = plan.dropped.iter().map(|d| d.row).collect();
        assert_eq!(dropped, vec![1, 2, 3, 4]);
    }

    #[test]
    fn unit_root_plan_factors() {
        let plan = plan_blocks(&ExampleKind::UnitRoot.filters(3), 1, &PlanConfig::default()).unwrap();
        assert!(plan.blocks.iter().all(|b| b.strategy == Strategy::Factored));
    }

    #[test]
    fn zero_family_has_no_common_component() {
        let f = vec![MatrixPolynomial::zeros(1, 1); 3];
        assert!(matches!(
            plan_blocks(&f, 1, &PlanConfig::default()),
            Err(Error::NoCommonComponent)
        ));
    }

    #[test]
    fn accepted_inverses_are_accurate() {
        let mut f = ExampleKind::Eq7.filters(4);
        f.push(scalar(&[1.0, 0.8]));
        for b in plan_blocks(&f, 1, &PlanConfig::default()).unwrap().blocks {
            let (lag0, rest) = inverse_residual(&b.inverse, &b.h).unwrap();
            assert!(lag0 < 1e-6 && rest < 1e-4);
        }
    }

    #[test]
    fn near_circle_row_is_stacked() {
        // zeros at -1.0005 and 1.0005: neither row alone has a usable inverse
        let f = vec![scalar(&[1.0, 1.0 / 1.0005]), scalar(&[1.0, -1.0 / 1.0005])];
        let plan = plan_blocks(&f, 1, &PlanConfig::default()).unwrap();
        assert_eq!(plan.blocks.len(), 1);
        let b = &plan.blocks[0];
        assert_eq!((b.rows.clone(), b.strategy), (vec![0, 1], Strategy::Stacked));
        let (lag0, rest) = inverse_residual(&b.inverse, &b.h).unwrap();
        assert!(lag0 < 1e-6 && rest < 1e-6);
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = plan_blocks(&ExampleKind::Eq7.filters(4), 1, &PlanConfig::default()).unwrap();
        let s = serde_json::to_string(&plan).unwrap();
        let back: BlockPlan = serde_json::from_str(&s).unwrap();
        assert_eq!(back.blocks.len(), plan.blocks.len());
        assert_eq!(back.order, plan.order);
        assert_eq!(back.blocks[0].inverse, plan.blocks[0].inverse);
    }
}
