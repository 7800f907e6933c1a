//! Monte Carlo coincidence streams: i.i.d. pair outcomes drawn from the
//! single-pair joint of each setting pair, optionally thinned by detector
//! efficiencies and recorded in four analyzer variants.
//!
//! Variant `v` rotates Alice's analyzer by 45° when `v & 1` is set and Bob's
//! when `v & 2` is set. A rotated analyzer swaps its transmitted and
//! reflected ports, so the recorded (physical) bit is the logical outcome
//! inverted; streams keep the physical bits and [`EventStream::logical_events`]
//! undoes the inversion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pairstats::{
    joint_table, settings_from_beta, werner_correlators, CorrelatorTable, SettingPair,
};

/// Coincidences recorded per setting in one run of the source: about
/// 16 × 10³ per minute.
pub const DEFAULT_EVENTS_PER_RUN: usize = 16_000;

/// Seed offset between basis variants; see [`stream_seed`].
pub const VARIANT_SEED_STRIDE: u64 = 1_000_000_000;

/// One coincidence: Alice's and Bob's bits (0 = transmitted port).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Event {
    pub a: u8,
    pub b: u8,
}

impl Event {
    pub fn new(a: u8, b: u8) -> Self {
        Event { a, b }
    }

    /// `+1` when the two bits agree.
    pub fn product_sign(self) -> i32 {
        if self.a == self.b {
            1
        } else {
            -1
        }
    }
}

/// Which analyzers were rotated by 45°: 0 none, 1 Alice, 2 Bob, 3 both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BasisVariant(u8);

impl BasisVariant {
    pub const ALL: [BasisVariant; 4] = [
        BasisVariant(0),
        BasisVariant(1),
        BasisVariant(2),
        BasisVariant(3),
    ];

    pub fn new(v: u8) -> Result<Self> {
        if v > 3 {
            return Err(invalid(format!("basis variant {v} outside 0..3")));
        }
        Ok(BasisVariant(v))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn inverts_alice(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn inverts_bob(self) -> bool {
        self.0 & 2 == 2
    }

    /// Maps between logical and physical bits (an involution).
    pub fn flip(self, event: Event) -> Event {
        Event {
            a: event.a ^ u8::from(self.inverts_alice()),
            b: event.b ^ u8::from(self.inverts_bob()),
        }
    }
}

impl TryFrom<u8> for BasisVariant {
    type Error = crate::Error;

    fn try_from(v: u8) -> Result<Self> {
        BasisVariant::new(v)
    }
}

impl From<BasisVariant> for u8 {
    fn from(v: BasisVariant) -> u8 {
        v.0
    }
}

/// Port efficiencies of the four detectors, plus an optional uniform
/// discard of events (same-party double coincidences).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta_t_a: f64,
    pub eta_r_a: f64,
    pub eta_t_b: f64,
    pub eta_r_b: f64,
    #[serde(default)]
    pub discard_probability: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        DetectorModel {
            eta_t_a: 1.0,
            eta_r_a: 1.0,
            eta_t_b: 1.0,
            eta_r_b: 1.0,
            discard_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.eta_t_a,
            self.eta_r_a,
            self.eta_t_b,
            self.eta_r_b,
            self.discard_probability,
        ];
        if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid(format!(
                "detector parameters must lie in [0, 1]: {all:?}"
            )));
        }
        Ok(())
    }

    /// Probability that a coincidence on physical ports `(a, b)` is recorded.
    pub fn survival(&self, physical: Event) -> f64 {
        let ea = if physical.a == 0 {
            self.eta_t_a
        } else {
            self.eta_r_a
        };
        let eb = if physical.b == 0 {
            self.eta_t_b
        } else {
            self.eta_r_b
        };
        ea * eb
    }

    fn thins(&self) -> bool {
        [self.eta_t_a, self.eta_r_a, self.eta_t_b, self.eta_r_b]
            .iter()
            .any(|&e| e < 1.0)
    }
}

/// Provenance of a stream. Fields are optional because the CSV format does
/// not carry them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamMeta {
    pub beta: Option<f64>,
    pub visibility: Option<f64>,
    /// Per-setting correlators used instead of a Werner state.
    pub table: Option<CorrelatorTable>,
    pub seed: Option<u64>,
    pub events_requested: Option<usize>,
    pub detector: Option<DetectorModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub setting: SettingPair,
    pub variant: BasisVariant,
    /// Physical bits, in recording order.
    pub events: Vec<Event>,
    pub meta: StreamMeta,
}

impl EventStream {
    /// Events with the variant's inversion undone.
    pub fn logical_events(&self) -> impl Iterator<Item = Event> + '_ {
        self.events.iter().map(move |&e| self.variant.flip(e))
    }
}

/// `seed + variant·10⁹ + setting index`.
pub fn stream_seed(seed: u64, variant: BasisVariant, setting: SettingPair) -> u64 {
    seed.wrapping_add(u64::from(variant.index()) * VARIANT_SEED_STRIDE)
        .wrapping_add(setting.index() as u64)
}

/// One variant-0 run of `n_events` coincidences for a setting pair.
pub fn generate_run(
    table: &CorrelatorTable,
    setting: SettingPair,
    n_events: usize,
    detector: &DetectorModel,
    seed: u64,
) -> Result<EventStream> {
    generate_variant(table, setting, BasisVariant(0), n_events, detector, seed)
}

/// The same setting pair recorded in all four analyzer variants.
pub fn generate_symmetrized(
    table: &CorrelatorTable,
    setting: SettingPair,
    n_events_per_variant: usize,
    detector: &DetectorModel,
    seed: u64,
) -> Result<[EventStream; 4]> {
    let streams = BasisVariant::ALL
        .par_iter()
        .map(|&v| generate_variant(table, setting, v, n_events_per_variant, detector, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(streams.try_into().expect("four variants"))
}

fn generate_variant(
    table: &CorrelatorTable,
    setting: SettingPair,
    variant: BasisVariant,
    n_events: usize,
    detector: &DetectorModel,
    seed: u64,
) -> Result<EventStream> {
    if n_events == 0 {
        return Err(invalid("a run needs at least one event"));
    }
    detector.validate()?;
    let joint = joint_table(table)?;
    let cell = joint.cell(setting);
    let cumulative = [cell[0][0], cell[0][0] + cell[0][1], 1.0 - cell[1][1]];
    let thins = detector.thins();
    let discards = detector.discard_probability > 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, variant, setting));
    let mut events = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        let u: f64 = rng.random();
        let logical = if u < cumulative[0] {
            Event::new(0, 0)
        } else if u < cumulative[1] {
            Event::new(0, 1)
        } else if u < cumulative[2] {
            Event::new(1, 0)
        } else {
            Event::new(1, 1)
        };
        let physical = variant.flip(logical);
        if thins && rng.random::<f64>() >= detector.survival(physical) {
            continue;
        }
        if discards && rng.random::<f64>() < detector.discard_probability {
            continue;
        }
        events.push(physical);
    }
    Ok(EventStream {
        setting,
        variant,
        events,
        meta: StreamMeta {
            table: Some(*table),
            seed: Some(seed),
            events_requested: Some(n_events),
            detector: Some(*detector),
            ..StreamMeta::default()
        },
    })
}

/// A complete simulated measurement at one `β`: every setting pair, in one
/// or all four analyzer variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecipe {
    pub beta: f64,
    pub visibility: f64,
    /// Colored noise: explicit correlators replacing the Werner ones.
    pub table_override: Option<CorrelatorTable>,
    pub events_per_stream: usize,
    pub detector: DetectorModel,
    pub symmetrize: bool,
    pub seed: u64,
}

impl SimulationRecipe {
    pub fn werner(beta: f64, visibility: f64, events_per_stream: usize, seed: u64) -> Self {
        SimulationRecipe {
            beta,
            visibility,
            table_override: None,
            events_per_stream,
            detector: DetectorModel::ideal(),
            symmetrize: false,
            seed,
        }
    }

    pub fn table(&self) -> Result<CorrelatorTable> {
        match self.table_override {
            Some(t) => Ok(t),
            None => werner_correlators(&settings_from_beta(self.beta)?, self.visibility),
        }
    }
}

/// Runs a recipe. Streams come out ordered by setting pair, then variant.
pub fn simulate(recipe: &SimulationRecipe) -> Result<Vec<EventStream>> {
    let table = recipe.table()?;
    let variants: &[BasisVariant] = if recipe.symmetrize {
        &BasisVariant::ALL
    } else {
        &BasisVariant::ALL[..1]
    };
    let jobs: Vec<(SettingPair, BasisVariant)> = SettingPair::ALL
        .iter()
        .flat_map(|&s| variants.iter().map(move |&v| (s, v)))
        .collect();
    jobs.par_iter()
        .map(|&(setting, variant)| {
            let mut stream = generate_variant(
                &table,
                setting,
                variant,
                recipe.events_per_stream,
                &recipe.detector,
                recipe.seed,
            )?;
            stream.meta.beta = Some(recipe.beta);
            if recipe.table_override.is_none() {
                stream.meta.visibility = Some(recipe.visibility);
                stream.meta.table = None;
            }
            Ok(stream)
        })
        .collect()
}
