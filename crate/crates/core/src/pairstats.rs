//! Measurement settings and single-pair statistics of a noisy singlet.
//!
//! A measurement is a direction in the z–x plane, so it is one angle. The
//! statistics of one pair are carried entirely by the four correlators
//! `E_xy` and the per-party marginal biases; no state vector is built.
//!
//! Outcome convention: a bit `0` maps to the sign `+1`, a bit `1` to `-1`,
//! and the planar correlator of a Werner pair is `+V·cos(θ_A − θ_B)`. For the
//! one-angle family this gives `E11 = E12 = E21 = V cos β` and
//! `E22 = V cos 3β`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used when checking that probabilities are nonnegative.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// One of the four setting pairs `(x, y)` with `x, y ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u8; 2]", into = "[u8; 2]")]
pub struct SettingPair {
    x: u8,
    y: u8,
}

impl SettingPair {
    /// The four setting pairs in CHSH order: (1,1), (1,2), (2,1), (2,2).
    pub const ALL: [SettingPair; 4] = [
        SettingPair { x: 1, y: 1 },
        SettingPair { x: 1, y: 2 },
        SettingPair { x: 2, y: 1 },
        SettingPair { x: 2, y: 2 },
    ];

    pub fn new(x: u8, y: u8) -> Result<Self> {
        if !(1..=2).contains(&x) || !(1..=2).contains(&y) {
            return Err(invalid(format!("setting pair ({x},{y}) outside {{1,2}}²")));
        }
        Ok(SettingPair { x, y })
    }

    pub fn x(self) -> u8 {
        self.x
    }

    pub fn y(self) -> u8 {
        self.y
    }

    /// Position in [`SettingPair::ALL`].
    pub fn index(self) -> usize {
        usize::from(2 * (self.x - 1) + (self.y - 1))
    }

    pub fn from_index(index: usize) -> Self {
        Self::ALL[index]
    }

    /// Sign of this term in `S = E11 + E12 + E21 − E22`.
    pub fn chsh_sign(self) -> f64 {
        if self.x == 2 && self.y == 2 {
            -1.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for SettingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl TryFrom<[u8; 2]> for SettingPair {
    type Error = Error;

    fn try_from(value: [u8; 2]) -> Result<Self> {
        SettingPair::new(value[0], value[1])
    }
}

impl From<SettingPair> for [u8; 2] {
    fn from(value: SettingPair) -> Self {
        [value.x, value.y]
    }
}

/// Maps an angle onto the canonical range `(−π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Analyzer angles for Alice's and Bob's two settings, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub theta_a1: f64,
    pub theta_a2: f64,
    pub theta_b1: f64,
    pub theta_b2: f64,
}

impl MeasurementSettings {
    /// Builds settings from four angles, normalizing each to `(−π, π]`.
    pub fn new(theta_a1: f64, theta_a2: f64, theta_b1: f64, theta_b2: f64) -> Result<Self> {
        let angles = [theta_a1, theta_a2, theta_b1, theta_b2];
        if angles.iter().any(|t| !t.is_finite()) {
            return Err(invalid("measurement angles must be finite"));
        }
        Ok(MeasurementSettings {
            theta_a1: normalize_angle(theta_a1),
            theta_a2: normalize_angle(theta_a2),
            theta_b1: normalize_angle(theta_b1),
            theta_b2: normalize_angle(theta_b2),
        })
    }

    pub fn alice(&self, x: u8) -> f64 {
        if x == 1 {
            self.theta_a1
        } else {
            self.theta_a2
        }
    }

    pub fn bob(&self, y: u8) -> f64 {
        if y == 1 {
            self.theta_b1
        } else {
            self.theta_b2
        }
    }

    /// Relative angle `θ_Ax − θ_By` for a setting pair.
    pub fn relative_angle(&self, pair: SettingPair) -> f64 {
        self.alice(pair.x()) - self.bob(pair.y())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta_a1, self.theta_a2, self.theta_b1, self.theta_b2]
    }
}

/// The one-angle family `A1 = 0, A2 = 2β, B1 = β, B2 = −β`.
pub fn settings_from_beta(beta: f64) -> Result<MeasurementSettings> {
    if !beta.is_finite() {
        return Err(invalid(format!("beta must be finite, got {beta}")));
    }
    MeasurementSettings::new(0.0, 2.0 * beta, beta, -beta)
}

/// Single-pair correlators plus marginal biases `E[(−1)^a]`, `E[(−1)^b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTable {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
    #[serde(rename = "margA1", default)]
    pub marg_a1: f64,
    #[serde(rename = "margA2", default)]
    pub marg_a2: f64,
    #[serde(rename = "margB1", default)]
    pub marg_b1: f64,
    #[serde(rename = "margB2", default)]
    pub marg_b2: f64,
}

impl CorrelatorTable {
    /// Table with zero marginal biases.
    pub fn unbiased(correlators: [f64; 4]) -> Result<Self> {
        Self::with_marginals(correlators, [0.0; 2], [0.0; 2])
    }

    pub fn with_marginals(correlators: [f64; 4], alice: [f64; 2], bob: [f64; 2]) -> Result<Self> {
        let table = CorrelatorTable {
            e11: correlators[0],
            e12: correlators[1],
            e21: correlators[2],
            e22: correlators[3],
            marg_a1: alice[0],
            marg_a2: alice[1],
            marg_b1: bob[0],
            marg_b2: bob[1],
        };
        table.validate()?;
        Ok(table)
    }

    /// Checks the range invariants; feasibility of the joint is checked by
    /// [`joint_table`].
    pub fn validate(&self) -> Result<()> {
        let values = [
            self.e11,
            self.e12,
            self.e21,
            self.e22,
            self.marg_a1,
            self.marg_a2,
            self.marg_b1,
            self.marg_b2,
        ];
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(invalid(format!(
                "correlators and marginals must lie in [-1, 1]: {values:?}"
            )));
        }
        Ok(())
    }

    pub fn correlators(&self) -> [f64; 4] {
        [self.e11, self.e12, self.e21, self.e22]
    }

    pub fn correlator(&self, pair: SettingPair) -> f64 {
        self.correlators()[pair.index()]
    }

    pub fn marginal_a(&self, x: u8) -> f64 {
        if x == 1 {
            self.marg_a1
        } else {
            self.marg_a2
        }
    }

    pub fn marginal_b(&self, y: u8) -> f64 {
        if y == 1 {
            self.marg_b1
        } else {
            self.marg_b2
        }
    }

    /// Unbinned CHSH combination of the four correlators.
    pub fn chsh(&self) -> f64 {
        self.e11 + self.e12 + self.e21 - self.e22
    }
}

/// Correlators of a Werner pair of visibility `visibility` measured along
/// `settings`: `E_xy = V·cos(θ_Ax − θ_By)`, unbiased marginals.
pub fn werner_correlators(
    settings: &MeasurementSettings,
    visibility: f64,
) -> Result<CorrelatorTable> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(invalid(format!("visibility {visibility} outside [0, 1]")));
    }
    let e = SettingPair::ALL.map(|pair| visibility * settings.relative_angle(pair).cos());
    CorrelatorTable::unbiased(e)
}

/// Joint outcome probabilities `p(a, b | x, y)` for each setting pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairJointDistribution {
    cells: [[[f64; 2]; 2]; 4],
}

impl PairJointDistribution {
    /// Wraps explicit tables, checking nonnegativity and normalization.
    pub fn from_cells(cells: [[[f64; 2]; 2]; 4]) -> Result<Self> {
        for (pair, cell) in SettingPair::ALL.iter().zip(&cells) {
            check_cell(*pair, cell)?;
            let total: f64 = cell.iter().flatten().sum();
            if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(invalid(format!(
                    "joint table for {pair} sums to {total}, expected 1"
                )));
            }
        }
        Ok(PairJointDistribution { cells })
    }

    /// The 2×2 table `[a][b]` for one setting pair.
    pub fn cell(&self, pair: SettingPair) -> &[[f64; 2]; 2] {
        &self.cells[pair.index()]
    }

    pub fn correlator(&self, pair: SettingPair) -> f64 {
        let c = self.cell(pair);
        c[0][0] + c[1][1] - c[0][1] - c[1][0]
    }

    pub fn marginal_a(&self, pair: SettingPair) -> f64 {
        let c = self.cell(pair);
        c[0][0] + c[0][1] - c[1][0] - c[1][1]
    }

    pub fn marginal_b(&self, pair: SettingPair) -> f64 {
        let c = self.cell(pair);
        c[0][0] + c[1][0] - c[0][1] - c[1][1]
    }
}

fn check_cell(pair: SettingPair, cell: &[[f64; 2]; 2]) -> Result<()> {
    for (a, row) in cell.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if !(p >= -PROBABILITY_TOLERANCE) {
                return Err(Error::InfeasibleStatistics {
                    setting: pair,
                    a: a as u8,
                    b: b as u8,
                    value: p,
                });
            }
        }
    }
    Ok(())
}

/// Reconstructs `p(a,b|x,y) = (1 + (−1)^a m_A + (−1)^b m_B + (−1)^{a+b} E_xy) / 4`.
pub fn joint_table(table: &CorrelatorTable) -> Result<PairJointDistribution> {
    table.validate()?;
    let mut cells = [[[0.0; 2]; 2]; 4];
    for pair in SettingPair::ALL {
        let e = table.correlator(pair);
        let ma = table.marginal_a(pair.x());
        let mb = table.marginal_b(pair.y());
        let cell = &mut cells[pair.index()];
        for (a, row) in cell.iter_mut().enumerate() {
            let sa = if a == 0 { 1.0 } else { -1.0 };
            for (b, p) in row.iter_mut().enumerate() {
                let sb = if b == 0 { 1.0 } else { -1.0 };
                *p = (1.0 + sa * ma + sb * mb + sa * sb * e) / 4.0;
            }
        }
        check_cell(pair, cell)?;
        // Rounding can leave -1e-17 where the exact value is zero.
        for p in cell.iter_mut().flatten() {
            *p = p.max(0.0);
        }
    }
    Ok(PairJointDistribution { cells })
}
