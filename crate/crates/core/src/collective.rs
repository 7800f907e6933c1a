//! Exact distribution of the collective counts `a = Σ aⁱ`, `b = Σ bⁱ` for
//! `n` independent, identical pairs.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::pairstats::{PairJointDistribution, SettingPair};

/// Default guard on the number of pairs; the tables grow as `(n+1)²`.
pub const DEFAULT_N_MAX: usize = 1024;

/// Joint count distribution `P(a, b)` over `{0..n}²` for each setting pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    n: usize,
    // Row-major (n+1)×(n+1), rows indexed by Alice's count.
    tables: [Vec<f64>; 4],
}

impl CountDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `P(a, b)` for one setting pair.
    pub fn prob(&self, pair: SettingPair, a: usize, b: usize) -> f64 {
        self.tables[pair.index()][a * (self.n + 1) + b]
    }

    /// Row-major table for one setting pair.
    pub fn table(&self, pair: SettingPair) -> &[f64] {
        &self.tables[pair.index()]
    }

    /// Distribution of Alice's count for one setting pair.
    pub fn marginal_a(&self, pair: SettingPair) -> Vec<f64> {
        self.table(pair)
            .chunks(self.n + 1)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Distribution of Bob's count for one setting pair.
    pub fn marginal_b(&self, pair: SettingPair) -> Vec<f64> {
        let width = self.n + 1;
        let t = self.table(pair);
        (0..width)
            .map(|b| (0..width).map(|a| t[a * width + b]).sum())
            .collect()
    }

    /// Distribution for the union of two independent groups of pairs
    /// (a two-dimensional convolution).
    pub fn combine(&self, other: &CountDistribution) -> CountDistribution {
        let n = self.n + other.n;
        let (w1, w2, w) = (self.n + 1, other.n + 1, n + 1);
        let tables = std::array::from_fn(|k| {
            let (left, right) = (&self.tables[k], &other.tables[k]);
            let mut out = vec![0.0; w * w];
            for a1 in 0..w1 {
                for b1 in 0..w1 {
                    let p = left[a1 * w1 + b1];
                    if p == 0.0 {
                        continue;
                    }
                    for a2 in 0..w2 {
                        let row = &right[a2 * w2..(a2 + 1) * w2];
                        let dst = &mut out[(a1 + a2) * w + b1..(a1 + a2) * w + b1 + w2];
                        for (d, q) in dst.iter_mut().zip(row) {
                            *d += p * q;
                        }
                    }
                }
            }
            out
        });
        CountDistribution { n, tables }
    }
}

/// `n`-fold convolution of the single-pair joint, guarded by [`DEFAULT_N_MAX`].
pub fn convolve_counts(pair: &PairJointDistribution, n: usize) -> Result<CountDistribution> {
    convolve_counts_capped(pair, n, DEFAULT_N_MAX)
}

/// As [`convolve_counts`] with an explicit cap on `n`.
pub fn convolve_counts_capped(
    pair: &PairJointDistribution,
    n: usize,
    n_max: usize,
) -> Result<CountDistribution> {
    if n == 0 {
        return Err(invalid("number of pairs must be at least 1"));
    }
    if n > n_max {
        return Err(invalid(format!(
            "n = {n} exceeds the configured n_max = {n_max}"
        )));
    }
    let tables: Vec<Vec<f64>> = SettingPair::ALL
        .par_iter()
        .map(|&setting| convolve_one(pair.cell(setting), n))
        .collect();
    let tables: [Vec<f64>; 4] = tables.try_into().expect("four setting pairs");
    Ok(CountDistribution { n, tables })
}

/// Adds one pair at a time. After `k` steps only the `(k+1)²` leading block
/// is nonzero, so each step touches that block alone.
fn convolve_one(cell: &[[f64; 2]; 2], n: usize) -> Vec<f64> {
    let w = n + 1;
    let mut cur = vec![0.0; w * w];
    let mut next = vec![0.0; w * w];
    cur[0] = 1.0;
    for k in 0..n {
        for a in 0..=k + 1 {
            next[a * w..a * w + k + 2].fill(0.0);
        }
        for a in 0..=k {
            for b in 0..=k {
                let p = cur[a * w + b];
                if p == 0.0 {
                    continue;
                }
                next[a * w + b] += p * cell[0][0];
                next[a * w + b + 1] += p * cell[0][1];
                next[(a + 1) * w + b] += p * cell[1][0];
                next[(a + 1) * w + b + 1] += p * cell[1][1];
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}
