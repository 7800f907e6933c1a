//! Local binnings of a collective count into a single ±1 outcome, the binned
//! correlators `E⁽ⁿ⁾_xy` and the CHSH value `S_n`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::collective::CountDistribution;
use crate::error::{invalid, Result};
use crate::pairstats::{CorrelatorTable, PairJointDistribution, SettingPair};

/// `√(ln 3)/2`: with `β = β₀/√n` the noiseless parity CHSH value tends to
/// its largest limit.
pub fn beta0() -> f64 {
    3f64.ln().sqrt() / 2.0
}

/// `8·3^(−9/8) ≈ 2.3246`, the large-`n` limit of the noiseless parity CHSH
/// value at `β = β₀/√n`.
pub fn s_infinity() -> f64 {
    8.0 * 3f64.powf(-9.0 / 8.0)
}

/// What a majority vote outputs when exactly half the particles clicked
/// (only possible for even `n`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    #[default]
    TieToMinus,
    TieToPlus,
    /// Fair coin; contributes zero to expected correlators.
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "tie")]
pub enum BinningStrategy {
    /// `sign(a − n/2)`.
    Majority(TiePolicy),
    /// `(−1)^a`.
    Parity,
}

impl BinningStrategy {
    pub fn majority() -> Self {
        BinningStrategy::Majority(TiePolicy::TieToMinus)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BinningStrategy::Majority(_) => "majority",
            BinningStrategy::Parity => "parity",
        }
    }
}

impl fmt::Display for BinningStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinningStrategy::Majority(TiePolicy::TieToMinus) => f.write_str("majority"),
            BinningStrategy::Majority(TiePolicy::TieToPlus) => f.write_str("majority(tie+)"),
            BinningStrategy::Majority(TiePolicy::Randomized) => f.write_str("majority(tie~)"),
            BinningStrategy::Parity => f.write_str("parity"),
        }
    }
}

/// Expected binned sign of count `a` out of `n`: ±1, or 0 for a randomized
/// tie. Callers guarantee `a ≤ n`.
#[inline]
pub fn sign_weight(a: usize, n: usize, strategy: BinningStrategy) -> f64 {
    match strategy {
        BinningStrategy::Parity => {
            if a.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        }
        BinningStrategy::Majority(tie) => match (2 * a).cmp(&n) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => match tie {
                TiePolicy::TieToMinus => -1.0,
                TiePolicy::TieToPlus => 1.0,
                TiePolicy::Randomized => 0.0,
            },
        },
    }
}

/// Bins one count. Randomized ties draw from `rng`; nothing else touches it.
pub fn bin_count<R: Rng + ?Sized>(
    a: usize,
    n: usize,
    strategy: BinningStrategy,
    rng: &mut R,
) -> Result<i8> {
    if a > n {
        return Err(invalid(format!(
            "count {a} exceeds the number of pairs {n}"
        )));
    }
    let w = sign_weight(a, n, strategy);
    Ok(if w > 0.0 {
        1
    } else if w < 0.0 {
        -1
    } else if rng.random::<bool>() {
        1
    } else {
        -1
    })
}

/// `Σ_{a,b} P(a,b)·s(a)·s(b)` over the exact count distribution.
pub fn binned_correlator(
    dist: &CountDistribution,
    pair: SettingPair,
    strategy: BinningStrategy,
) -> f64 {
    let n = dist.n();
    let signs: Vec<f64> = (0..=n).map(|k| sign_weight(k, n, strategy)).collect();
    dist.table(pair)
        .chunks(n + 1)
        .zip(&signs)
        .map(|(row, sa)| sa * row.iter().zip(&signs).map(|(p, sb)| p * sb).sum::<f64>())
        .sum()
}

/// All four binned correlators of a count distribution.
pub fn binned_correlators(dist: &CountDistribution, strategy: BinningStrategy) -> [f64; 4] {
    SettingPair::ALL.map(|pair| binned_correlator(dist, pair, strategy))
}

/// The binned correlator computed straight from the single-pair table,
/// without building the `(n+1)²` count distribution.
///
/// Parity factorizes over pairs and gives `E^n`. For majority, Alice's count
/// is binomial and, given `a`, Bob's count is a sum of two independent
/// binomials (Bob's bits paired with Alice's ones and with her zeros), so
/// only cumulative binomial tables are needed: `O(n²)` instead of `O(n³)`.
pub fn binned_correlator_from_pair(
    cell: &[[f64; 2]; 2],
    n: usize,
    strategy: BinningStrategy,
) -> f64 {
    let e = cell[0][0] + cell[1][1] - cell[0][1] - cell[1][0];
    let tie = match strategy {
        BinningStrategy::Parity => return e.powi(n as i32),
        BinningStrategy::Majority(_) => sign_weight(n / 2, n, strategy),
    };
    let p_a1 = cell[1][0] + cell[1][1];
    let r1 = if p_a1 > 0.0 { cell[1][1] / p_a1 } else { 0.0 };
    let r0 = if p_a1 < 1.0 {
        cell[0][1] / (1.0 - p_a1)
    } else {
        0.0
    };

    let alice = binomial_row(n, p_a1);
    let ones = binomial_rows(n, r1);
    let zeros_cdf: Vec<Vec<f64>> = binomial_rows(n, r0)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();

    // Bob's total k: minus for k ≤ minus_max, plus for k ≥ plus_min.
    let minus_max = (n as i64 - 1) / 2;
    let plus_min = n as i64 / 2 + 1;
    let mut total = 0.0;
    for (a, &pa) in alice.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let cdf = &zeros_cdf[n - a];
        let at = |j: i64| -> f64 {
            if j < 0 {
                0.0
            } else {
                cdf[(j as usize).min(cdf.len() - 1)]
            }
        };
        let mut bob = 0.0;
        for (x, &px) in ones[a].iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let x = x as i64;
            let minus = at(minus_max - x);
            let not_plus = at(plus_min - 1 - x);
            bob += px * ((1.0 - not_plus) - minus + tie * (not_plus - minus));
        }
        total += pa * sign_weight(a, n, strategy) * bob;
    }
    total
}

/// `Bin(m, p)` probabilities for `m = n`.
fn binomial_row(n: usize, p: f64) -> Vec<f64> {
    binomial_rows(n, p).pop().expect("n + 1 rows")
}

/// `Bin(m, p)` probabilities for every `m = 0..=n`, built by the Pascal
/// recurrence so every entry stays nonnegative.
fn binomial_rows(n: usize, p: f64) -> Vec<Vec<f64>> {
    let q = 1.0 - p;
    let mut rows = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    for m in 1..=n {
        let prev: &Vec<f64> = &rows[m - 1];
        let mut row = vec![0.0; m + 1];
        for (k, &v) in prev.iter().enumerate() {
            row[k] += v * q;
            row[k + 1] += v * p;
        }
        rows.push(row);
    }
    rows
}

/// Binned CHSH value of `n` pairs that each follow `table`, through
/// [`binned_correlator_from_pair`].
pub fn binned_chsh(table: &CorrelatorTable, n: usize, strategy: BinningStrategy) -> Result<f64> {
    let joint = crate::pairstats::joint_table(table)?;
    Ok(binned_chsh_joint(&joint, n, strategy))
}

pub(crate) fn binned_chsh_joint(
    joint: &PairJointDistribution,
    n: usize,
    strategy: BinningStrategy,
) -> f64 {
    SettingPair::ALL
        .iter()
        .map(|&pair| pair.chsh_sign() * binned_correlator_from_pair(joint.cell(pair), n, strategy))
        .sum()
}

/// A CHSH value with the correlators it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub s: f64,
    pub correlators: [f64; 4],
    pub n: usize,
    pub sigma: Option<f64>,
}

impl ChshEstimate {
    /// Strict violation of the local bound: `s > 2`.
    pub fn violates(&self) -> bool {
        self.s > 2.0
    }
}

/// `S = E11 + E12 + E21 − E22`.
pub fn chsh_value(correlators: [f64; 4], n: usize) -> ChshEstimate {
    let s = correlators[0] + correlators[1] + correlators[2] - correlators[3];
    ChshEstimate {
        s,
        correlators,
        n,
        sigma: None,
    }
}

/// Closed-form parity CHSH value on the one-angle family:
/// `Vⁿ·(3 cosⁿβ − cosⁿ3β)`.
pub fn parity_chsh_analytic(beta: f64, visibility: f64, n: usize) -> f64 {
    let pow = |x: f64| -> f64 {
        match i32::try_from(n) {
            Ok(k) => x.powi(k),
            Err(_) => x.powf(n as f64),
        }
    };
    pow(visibility) * (3.0 * pow(beta.cos()) - pow((3.0 * beta).cos()))
}
