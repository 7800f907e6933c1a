//! Scans over `n` and `V`: critical-visibility curves, the parity violation
//! ratio and the majority-vs-parity comparison grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    critical_visibility, fit_vc_curve, max_chsh, parity_vc_coefficient, SearchMode, VcFit,
};
use crate::binning::{beta0, parity_chsh_analytic, BinningStrategy};
use crate::error::{invalid, Error, Result};

/// `V_c(n)` over a range of `n`, with the two-term fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub strategy: BinningStrategy,
    pub mode: SearchMode,
    pub points: Vec<(usize, f64)>,
    /// `None` when fewer than three points are available.
    pub fit: Option<VcFit>,
    /// Sizes `n` whose `V_c` is below that of the preceding point.
    pub monotonicity_violations: Vec<usize>,
}

impl CriticalCurve {
    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }
}

/// Computes `V_c(n)` for every `n` in `ns` (sorted, deduplicated) and fits
/// `1 − c1/n + c2/n²`. Sizes without any violation at `V = 1` are an error.
pub fn scan_critical_curve(
    ns: &[usize],
    strategy: BinningStrategy,
    mode: SearchMode,
) -> Result<CriticalCurve> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() {
        return Err(invalid("empty n grid"));
    }
    let points = ns
        .par_iter()
        .map(|&n| critical_visibility(n, strategy, mode).map(|c| (n, c.visibility)))
        .collect::<Result<Vec<_>>>()?;
    let monotonicity_violations = points
        .windows(2)
        .filter(|w| w[1].1 < w[0].1)
        .map(|w| w[1].0)
        .collect();
    let fit = if points.len() >= 3 {
        Some(fit_vc_curve(&points)?)
    } else {
        None
    };
    Ok(CriticalCurve {
        strategy,
        mode,
        points,
        fit,
        monotonicity_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub visibility: f64,
    /// `(1 − 3^(9/8)/4)/(1 − V)`.
    pub n_critical: f64,
    /// `n_c/2` rounded half up.
    pub n_half: usize,
    pub ratio: f64,
}

/// Fraction of the single-pair parity violation left at `n = n_c(V)/2`,
/// with the fixed settings `β = β₀/√n`:
/// `R = (S(V, n_c/2) − 2) / (S(V, 1) − 2)`.
pub fn violation_ratio(visibility: f64) -> Result<RatioPoint> {
    if !(visibility > 0.0 && visibility < 1.0) {
        return Err(Error::Domain(format!(
            "visibility {visibility} outside (0, 1)"
        )));
    }
    let n_critical = parity_vc_coefficient() / (1.0 - visibility);
    if n_critical < 2.0 {
        return Err(Error::Domain(format!(
            "n_c({visibility}) = {n_critical:.4} < 2: no room for half the critical size"
        )));
    }
    let n_half = (n_critical / 2.0 + 0.5).floor() as usize;
    let s_half = parity_chsh_analytic(beta0() / (n_half as f64).sqrt(), visibility, n_half);
    let s_one = parity_chsh_analytic(beta0(), visibility, 1);
    Ok(RatioPoint {
        visibility,
        n_critical,
        n_half,
        ratio: (s_half - 2.0) / (s_one - 2.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub visibility: f64,
    pub n: usize,
    pub s_majority: f64,
    pub s_parity: f64,
}

/// Per-visibility digest of the comparison grid, over `n ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySummary {
    pub visibility: f64,
    pub best_majority: f64,
    pub best_parity: f64,
    /// Odd `n ≥ 3` at which parity violates CHSH by more than majority.
    pub parity_wins_at: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub majority: BinningStrategy,
    pub rows: Vec<ComparisonRow>,
    pub per_visibility: Vec<VisibilitySummary>,
    /// Smallest visibility at which parity beats majority at some odd
    /// `n ≥ 3` of the grid, refined by bisection between grid points.
    pub crossover: Option<f64>,
}

/// Best CHSH value of both binnings on a `V × n` grid.
///
/// Majority at even `n` must break ties, which costs it enough that parity
/// wins at `n = 2` for every visibility; the crossover is therefore located
/// on tie-free (odd) sizes only.
pub fn binning_comparison(
    visibilities: &[f64],
    ns: &[usize],
    majority: BinningStrategy,
) -> Result<ComparisonTable> {
    if visibilities.is_empty() || ns.is_empty() {
        return Err(invalid("comparison grids must be nonempty"));
    }
    if let Some(v) = visibilities.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(invalid(format!("visibility {v} outside (0, 1]")));
    }
    if ns.contains(&0) {
        return Err(invalid("n grid contains 0"));
    }
    if !matches!(majority, BinningStrategy::Majority(_)) {
        return Err(invalid("the comparison needs a majority strategy"));
    }
    let mut vs = visibilities.to_vec();
    vs.sort_by(f64::total_cmp);
    vs.dedup();
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let grid: Vec<(f64, usize)> = vs
        .iter()
        .flat_map(|&v| ns.iter().map(move |&n| (v, n)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(v, n)| {
            Ok(ComparisonRow {
                visibility: v,
                n,
                s_majority: max_chsh(n, v, majority, SearchMode::BetaFamily)?.s_max,
                s_parity: max_chsh(n, v, BinningStrategy::Parity, SearchMode::BetaFamily)?.s_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_visibility: Vec<VisibilitySummary> = rows
        .chunks(ns.len())
        .map(|chunk| {
            let multi = chunk.iter().filter(|r| r.n >= 2);
            VisibilitySummary {
                visibility: chunk[0].visibility,
                best_majority: multi.clone().map(|r| r.s_majority).fold(f64::NAN, f64::max),
                best_parity: multi.map(|r| r.s_parity).fold(f64::NAN, f64::max),
                parity_wins_at: chunk
                    .iter()
                    .filter(|r| parity_wins(r))
                    .map(|r| r.n)
                    .collect(),
            }
        })
        .collect();

    let first_win = per_visibility
        .iter()
        .position(|s| !s.parity_wins_at.is_empty());
    let crossover = match first_win {
        None => None,
        Some(0) => Some(vs[0]),
        Some(i) => Some(refine_crossover(vs[i - 1], vs[i], &ns, majority)?),
    };
    Ok(ComparisonTable {
        majority,
        rows,
        per_visibility,
        crossover,
    })
}

fn parity_wins(row: &ComparisonRow) -> bool {
    row.n >= 3 && row.n % 2 == 1 && row.s_parity > 2.0 && row.s_parity > row.s_majority
}

fn refine_crossover(
    mut lo: f64,
    mut hi: f64,
    ns: &[usize],
    majority: BinningStrategy,
) -> Result<f64> {
    let odd: Vec<usize> = ns
        .iter()
        .copied()
        .filter(|n| *n >= 3 && n % 2 == 1)
        .collect();
    let wins = |v: f64| -> Result<bool> {
        for &n in &odd {
            let row = ComparisonRow {
                visibility: v,
                n,
                s_majority: max_chsh(n, v, majority, SearchMode::BetaFamily)?.s_max,
                s_parity: max_chsh(n, v, BinningStrategy::Parity, SearchMode::BetaFamily)?.s_max,
            };
            if parity_wins(&row) {
                return Ok(true);
            }
        }
        Ok(false)
    };
    while hi - lo > 1e-5 {
        let mid = 0.5 * (lo + hi);
        if wins(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
