//! Maximizing the binned CHSH value over measurement settings, and the
//! critical visibility / critical pair-number landscape built on it.

mod landscape;
mod search;

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{beta0, binned_correlator_from_pair, BinningStrategy};
use crate::error::{invalid, Error, Result};
use crate::pairstats::{
    joint_table, settings_from_beta, werner_correlators, MeasurementSettings, SettingPair,
};

pub use landscape::{
    binning_comparison, scan_critical_curve, violation_ratio, ComparisonRow, ComparisonTable,
    CriticalCurve, RatioPoint, VisibilitySummary,
};

/// Points of the coarse β grid that seeds the golden-section refinement.
pub const BETA_GRID_POINTS: usize = 256;
pub const GOLDEN_ITERATIONS: usize = 200;
/// Per start, in the four-angle search.
pub const SIMPLEX_EVALUATIONS: usize = 2000;
pub const PLANAR_RESTARTS: usize = 8;
/// Seed of the generator that perturbs the four-angle restarts.
pub const PLANAR_RESTART_SEED: u64 = 0x6d61_6e79_6265_6c6c;
/// Width at which the visibility bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-5;

/// `1 − 3^(9/8)/4 ≈ 0.13963`, the first-order coefficient of the parity
/// critical visibility `1 − c/n`.
pub fn parity_vc_coefficient() -> f64 {
    1.0 - 3f64.powf(9.0 / 8.0) / 4.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// One angle `β`: settings `(0, 2β, β, −β)`.
    #[default]
    BetaFamily,
    /// All four analyzer angles free.
    FullPlanar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub s_max: f64,
    pub settings: MeasurementSettings,
    pub mode: SearchMode,
    pub evaluations: usize,
    /// False when an iteration budget ran out before the tolerance was met.
    pub converged: bool,
}

impl OptimizationResult {
    /// `β` of the optimum when it lies on the one-angle family.
    pub fn beta(&self) -> f64 {
        self.settings.theta_b1 - self.settings.theta_a1
    }
}

/// Binned CHSH value of `n` Werner pairs measured along `settings`.
pub fn werner_chsh(
    settings: &MeasurementSettings,
    visibility: f64,
    n: usize,
    strategy: BinningStrategy,
) -> Result<f64> {
    let joint = joint_table(&werner_correlators(settings, visibility)?)?;
    // Equal correlators share a binned value; the one-angle family has three.
    let mut seen: Vec<(f64, f64)> = Vec::with_capacity(4);
    let mut s = 0.0;
    for pair in SettingPair::ALL {
        let e = joint.correlator(pair);
        let value = match seen.iter().find(|(k, _)| *k == e) {
            Some(&(_, v)) => v,
            None => {
                let v = binned_correlator_from_pair(joint.cell(pair), n, strategy);
                seen.push((e, v));
                v
            }
        };
        s += pair.chsh_sign() * value;
    }
    Ok(s)
}

fn beta_family_chsh(beta: f64, visibility: f64, n: usize, strategy: BinningStrategy) -> f64 {
    let settings = settings_from_beta(beta).expect("finite beta");
    werner_chsh(&settings, visibility, n, strategy).expect("visibility checked by caller")
}

fn check_inputs(n: usize, visibility: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("number of pairs must be at least 1"));
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(invalid(format!("visibility {visibility} outside [0, 1]")));
    }
    Ok(())
}

/// Largest binned CHSH value of `n` Werner pairs at visibility `visibility`.
pub fn max_chsh(
    n: usize,
    visibility: f64,
    strategy: BinningStrategy,
    mode: SearchMode,
) -> Result<OptimizationResult> {
    check_inputs(n, visibility)?;
    let family = maximize_beta_family(n, visibility, strategy);
    match mode {
        SearchMode::BetaFamily => Ok(family),
        SearchMode::FullPlanar => Ok(maximize_planar(n, visibility, strategy, family)),
    }
}

fn maximize_beta_family(
    n: usize,
    visibility: f64,
    strategy: BinningStrategy,
) -> OptimizationResult {
    let f = |beta: f64| beta_family_chsh(beta, visibility, n, strategy);
    let h = FRAC_PI_2 / BETA_GRID_POINTS as f64;
    let (best_k, _) = (1..=BETA_GRID_POINTS).map(|k| (k, f(k as f64 * h))).fold(
        (1, f64::NEG_INFINITY),
        |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
    );
    let lo = (best_k - 1) as f64 * h;
    let hi = ((best_k + 1) as f64 * h).min(FRAC_PI_2);
    let refined = search::golden_section_max(f, lo, hi, GOLDEN_ITERATIONS, 1e-12);
    let mut evaluations = BETA_GRID_POINTS + refined.evaluations + 1;

    let (mut beta, mut s) = (refined.x, refined.value);
    let grid_best = best_k as f64 * h;
    for candidate in [grid_best, beta0() / (n as f64).sqrt()] {
        let v = f(candidate);
        evaluations += 1;
        if v > s {
            beta = candidate;
            s = v;
        }
    }
    OptimizationResult {
        s_max: s,
        settings: settings_from_beta(beta).expect("finite beta"),
        mode: SearchMode::BetaFamily,
        evaluations,
        converged: refined.converged,
    }
}

fn maximize_planar(
    n: usize,
    visibility: f64,
    strategy: BinningStrategy,
    family: OptimizationResult,
) -> OptimizationResult {
    let objective = |x: &[f64]| -> f64 {
        match MeasurementSettings::new(x[0], x[1], x[2], x[3]) {
            Ok(s) => werner_chsh(&s, visibility, n, strategy).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let seed = family.settings.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(PLANAR_RESTART_SEED);
    let mut starts = vec![seed.to_vec()];
    for _ in 0..PLANAR_RESTARTS {
        starts.push(
            seed.iter()
                .map(|t| t + rng.random_range(-0.3..0.3))
                .collect(),
        );
    }

    let mut best = family;
    best.mode = SearchMode::FullPlanar;
    let mut converged = true;
    for start in &starts {
        let m = search::nelder_mead_max(objective, start, 0.05, SIMPLEX_EVALUATIONS, 1e-14);
        best.evaluations += m.evaluations;
        converged &= m.converged;
        if m.value > best.s_max {
            best.s_max = m.value;
            best.settings = MeasurementSettings::new(m.x[0], m.x[1], m.x[2], m.x[3])
                .expect("finite simplex vertex");
        }
    }
    best.converged = family.converged && converged;
    best
}

/// Threshold visibility above which `n` pairs can violate CHSH.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalVisibility {
    pub n: usize,
    pub visibility: f64,
    /// Best CHSH value at unit visibility.
    pub s_max_at_unit: f64,
    /// Bisection estimate; equals `visibility` except for parity, where
    /// `visibility` comes from the exact `(2/S)^(1/n)` identity.
    pub bisection: f64,
}

/// Smallest visibility at which some settings give `S_n > 2`.
///
/// Bisection on `V` assumes the best CHSH value grows with `V`. For parity
/// every correlator scales as `Vⁿ` at fixed settings, so the optimum is
/// `V`-independent and `V_c = (2/S_max(V=1))^(1/n)` exactly; that value is
/// returned and the bisection is kept as a cross-check.
pub fn critical_visibility(
    n: usize,
    strategy: BinningStrategy,
    mode: SearchMode,
) -> Result<CriticalVisibility> {
    let at_unit = max_chsh(n, 1.0, strategy, mode)?;
    if !(at_unit.s_max > 2.0) {
        return Err(Error::NoViolation {
            s_max: at_unit.s_max,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if max_chsh(n, mid, strategy, mode)?.s_max > 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let bisection = 0.5 * (lo + hi);
    let visibility = match strategy {
        BinningStrategy::Parity => (2.0 / at_unit.s_max).powf(1.0 / n as f64),
        BinningStrategy::Majority(_) => bisection,
    };
    Ok(CriticalVisibility {
        n,
        visibility,
        s_max_at_unit: at_unit.s_max,
        bisection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "n")]
pub enum CriticalPairs {
    Found(usize),
    /// Even `n_max` pairs still violate.
    ExceedsCap,
}

/// Largest number of pairs `n ≤ n_max` that still violates CHSH at
/// `visibility`, using the one-angle family.
///
/// Doubling then bisection, under the assumption that violation is
/// monotone in `n`. Majority with even `n` breaks ties and runs slightly
/// behind the neighbouring odd `n`, so the answer is then extended while
/// either of the next two sizes still violates.
pub fn critical_pairs(
    visibility: f64,
    strategy: BinningStrategy,
    n_max: usize,
) -> Result<CriticalPairs> {
    if !(visibility > 0.0 && visibility <= 1.0) {
        return Err(invalid(format!("visibility {visibility} outside (0, 1]")));
    }
    if n_max == 0 {
        return Err(invalid("n_max must be at least 1"));
    }
    let violates = |n: usize| -> Result<bool> {
        Ok(max_chsh(n, visibility, strategy, SearchMode::BetaFamily)?.s_max > 2.0)
    };
    let first = violates(1)?;
    if !first {
        let s_max = max_chsh(1, visibility, strategy, SearchMode::BetaFamily)?.s_max;
        return Err(Error::NoViolation { s_max });
    }
    let mut good: usize = 1;
    let bad = loop {
        let next = good.saturating_mul(2);
        if next >= n_max {
            if violates(n_max)? {
                return Ok(CriticalPairs::ExceedsCap);
            }
            break n_max;
        }
        if violates(next)? {
            good = next;
        } else {
            break next;
        }
    };
    let (mut good, mut bad) = (good, bad);
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if violates(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    loop {
        if good < n_max && violates(good + 1)? {
            good += 1;
        } else if good + 2 <= n_max && violates(good + 2)? {
            good += 2;
        } else {
            break;
        }
    }
    if good == n_max {
        return Ok(CriticalPairs::ExceedsCap);
    }
    Ok(CriticalPairs::Found(good))
}

/// Coefficients of `V_c(n) ≈ 1 − c1/n + c2/n²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VcFit {
    pub c1: f64,
    pub c2: f64,
    pub residual_norm: f64,
}

impl VcFit {
    /// The literature two-term law for majority voting, `1 − 0.5690/n + 0.2763/n²`.
    pub fn majority_reference() -> Self {
        VcFit {
            c1: 0.5690,
            c2: 0.2763,
            residual_norm: 0.0,
        }
    }

    pub fn predict(&self, n: usize) -> f64 {
        let n = n as f64;
        1.0 - self.c1 / n + self.c2 / (n * n)
    }
}

/// Least-squares fit of `1 − V_c` against the basis `(1/n, −1/n²)`.
pub fn fit_vc_curve(points: &[(usize, f64)]) -> Result<VcFit> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct n, got {}",
            ns.len()
        )));
    }
    if ns[0] == 0 {
        return Err(Error::Fit("n must be positive".into()));
    }
    // Normal equations of the 2-column design.
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, vc) in points {
        let (u, w) = (1.0 / n as f64, -1.0 / (n as f64).powi(2));
        let y = 1.0 - vc;
        s11 += u * u;
        s12 += u * w;
        s22 += w * w;
        t1 += u * y;
        t2 += w * y;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 1e-14 * s11 * s22) {
        return Err(Error::Fit("rank-deficient design".into()));
    }
    let c1 = (t1 * s22 - t2 * s12) / det;
    let c2 = (s11 * t2 - s12 * t1) / det;
    let residual_norm = points
        .iter()
        .map(|&(n, vc)| {
            let n = n as f64;
            (1.0 - vc - (c1 / n - c2 / (n * n))).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(VcFit {
        c1,
        c2,
        residual_norm,
    })
}

/// First-order parity critical visibility `1 − (1 − 3^(9/8)/4)/n`.
pub fn parity_vc_approx(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("number of pairs must be at least 1"));
    }
    Ok(1.0 - parity_vc_coefficient() / n as f64)
}

#[cfg(test)]
mod tests;
