//! Post-processing of event streams: inversion bookkeeping, clustering into
//! groups of `n`, binned CHSH estimates, shuffle bootstrap and the critical
//! cluster size `n_c`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{chsh_value, sign_weight, BinningStrategy, ChshEstimate};
use crate::error::{invalid, Error, Result};
use crate::io::read_many;
use crate::pairstats::SettingPair;
use crate::report::{sig6, sig6_opt};
use crate::simulate::{BasisVariant, Event, EventStream};

/// Shuffles per bootstrap.
pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamProvenance {
    pub source: PathBuf,
    pub setting: SettingPair,
    pub variant: BasisVariant,
    pub events: usize,
}

/// Logical outcome sequences of one measurement set (one `β`), indexed by
/// setting pair. Streams of the same pair are concatenated in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingSequences {
    pub beta: Option<f64>,
    pub sequences: [Vec<Event>; 4],
    pub provenance: Vec<StreamProvenance>,
}

impl SettingSequences {
    pub fn sequence(&self, pair: SettingPair) -> &[Event] {
        &self.sequences[pair.index()]
    }
}

/// Reads event files and groups their streams by `β`.
pub fn ingest(paths: &[PathBuf]) -> Result<Vec<SettingSequences>> {
    ingest_streams(read_many(paths)?)
}

/// Groups already-parsed streams by `β` (streams without one form a single
/// group), applies variant inversions and checks that every group covers
/// all four setting pairs. Groups come out sorted by `β`.
pub fn ingest_streams(
    streams: impl IntoIterator<Item = (PathBuf, EventStream)>,
) -> Result<Vec<SettingSequences>> {
    let mut groups: BTreeMap<Option<OrderedBeta>, SettingSequences> = BTreeMap::new();
    for (source, stream) in streams {
        let beta = stream.meta.beta;
        let group = groups
            .entry(beta.map(OrderedBeta))
            .or_insert_with(|| SettingSequences {
                beta,
                sequences: Default::default(),
                provenance: Vec::new(),
            });
        group.provenance.push(StreamProvenance {
            source,
            setting: stream.setting,
            variant: stream.variant,
            events: stream.events.len(),
        });
        group.sequences[stream.setting.index()].extend(stream.logical_events());
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData("no event streams".into()));
    }
    for group in groups.values() {
        for pair in SettingPair::ALL {
            if !group.provenance.iter().any(|p| p.setting == pair) {
                let file = group.provenance[0].source.clone();
                let at = group
                    .beta
                    .map(|b| format!(" at beta = {b}"))
                    .unwrap_or_default();
                return Err(Error::Ingestion {
                    file,
                    line: None,
                    message: format!("no stream for setting {pair}{at}"),
                });
            }
        }
    }
    Ok(groups.into_values().collect())
}

#[derive(Debug, Clone, Copy)]
struct OrderedBeta(f64);

impl PartialEq for OrderedBeta {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for OrderedBeta {}
impl PartialOrd for OrderedBeta {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrderedBeta {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-cluster counts for one setting pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteredOutcomes {
    pub n: usize,
    /// `(a_count, b_count)`: number of `1` bits on each side.
    pub counts: Vec<(u32, u32)>,
    pub discarded: usize,
}

/// Non-overlapping windows of `n` consecutive events; the remainder is
/// discarded.
pub fn cluster_events(sequence: &[Event], n: usize) -> Result<ClusteredOutcomes> {
    if n == 0 {
        return Err(invalid("cluster size must be at least 1"));
    }
    let chunks = sequence.chunks_exact(n);
    let discarded = chunks.remainder().len();
    let counts = chunks
        .map(|c| {
            c.iter().fold((0u32, 0u32), |(a, b), e| {
                (a + u32::from(e.a), b + u32::from(e.b))
            })
        })
        .collect();
    Ok(ClusteredOutcomes {
        n,
        counts,
        discarded,
    })
}

#[inline]
fn resolve(sign: i8, rng: &mut ChaCha8Rng) -> i64 {
    match sign {
        0 if rng.random::<bool>() => 1,
        0 => -1,
        s => i64::from(s),
    }
}

/// Mean of `s(a)·s(b)` over clusters; a zero sign is a tie drawn from `rng`.
fn binned_mean(
    counts: impl Iterator<Item = (u32, u32)>,
    signs: &[i8],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut sum = 0i64;
    let mut clusters = 0usize;
    for (a, b) in counts {
        sum += resolve(signs[a as usize], rng) * resolve(signs[b as usize], rng);
        clusters += 1;
    }
    sum as f64 / clusters as f64
}

fn sign_table(n: usize, strategy: BinningStrategy) -> Vec<i8> {
    (0..=n).map(|k| sign_weight(k, n, strategy) as i8).collect()
}

fn insufficient(pair: SettingPair, n: usize) -> Error {
    Error::InsufficientData(format!(
        "setting {pair} has no complete cluster of size {n}"
    ))
}

/// Empirical `S_n`. Randomized ties are drawn from a generator seeded with
/// `tie_seed`; other strategies ignore it.
pub fn estimate_sn(
    clustered: &[ClusteredOutcomes; 4],
    strategy: BinningStrategy,
    tie_seed: u64,
) -> Result<ChshEstimate> {
    let n = clustered[0].n;
    if clustered.iter().any(|c| c.n != n) {
        return Err(invalid("cluster sizes differ between setting pairs"));
    }
    let signs = sign_table(n, strategy);
    let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
    let mut correlators = [0.0; 4];
    for pair in SettingPair::ALL {
        let c = &clustered[pair.index()];
        if c.counts.is_empty() {
            return Err(insufficient(pair, n));
        }
        correlators[pair.index()] = binned_mean(c.counts.iter().copied(), &signs, &mut rng);
    }
    Ok(chsh_value(correlators, n))
}

/// Events per block of running prefix sums kept in [`Clusterer`].
const BLOCK_LEN: usize = 1 << 14;

const B_MASK: u64 = 0xffff_ffff;

/// Event types indexed by `2a + b`, packed as `a << 32 | b`.
const PACKED: [u64; 4] = [0, 1, 1 << 32, (1 << 32) | 1];

fn packed(e: Event) -> u64 {
    PACKED[usize::from(2 * e.a + e.b)]
}

struct SizeState {
    n: usize,
    signs: Vec<i8>,
    rng: ChaCha8Rng,
    /// Prefix value at the start of the open cluster.
    start: u64,
    /// Position (in events) where the open cluster ends.
    next_end: usize,
    sum: i64,
    clusters: usize,
}

/// Clusters one ordering of a setting's events for several sizes in a
/// single pass. Running prefix sums of the packed bits are kept for one
/// block at a time, so every cluster count is one subtraction and the data
/// stays in cache.
struct Clusterer {
    sizes: Vec<SizeState>,
    block: Vec<u64>,
    block_len: usize,
    base: usize,
    acc: u64,
}

impl Clusterer {
    fn new(
        ns: &[usize],
        strategy: BinningStrategy,
        tie_seed: impl Fn(usize) -> u64,
        block_len: usize,
    ) -> Self {
        let sizes = ns
            .iter()
            .map(|&n| SizeState {
                n,
                signs: sign_table(n, strategy),
                rng: ChaCha8Rng::seed_from_u64(tie_seed(n)),
                start: 0,
                next_end: n,
                sum: 0,
                clusters: 0,
            })
            .collect();
        Clusterer {
            sizes,
            block: Vec::with_capacity(block_len),
            block_len,
            base: 0,
            acc: 0,
        }
    }

    #[inline]
    fn push(&mut self, packed: u64) {
        self.acc += packed;
        self.block.push(self.acc);
        if self.block.len() == self.block_len {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let end = self.base + self.block.len();
        let (block, base) = (&self.block, self.base);
        for st in &mut self.sizes {
            while st.next_end <= end {
                let v = block[st.next_end - base - 1];
                let d = v - st.start;
                st.start = v;
                let (a, b) = ((d >> 32) as usize, (d & B_MASK) as usize);
                st.sum += resolve(st.signs[a], &mut st.rng) * resolve(st.signs[b], &mut st.rng);
                st.clusters += 1;
                st.next_end += st.n;
            }
        }
        self.base = end;
        self.block.clear();
    }

    /// Closes the current sequence and returns its binned correlator for
    /// every size. Tie generators carry over to the next sequence.
    fn finish(&mut self) -> Vec<f64> {
        self.flush();
        self.base = 0;
        self.acc = 0;
        self.sizes
            .iter_mut()
            .map(|st| {
                let e = st.sum as f64 / st.clusters as f64;
                st.start = 0;
                st.next_end = st.n;
                st.sum = 0;
                st.clusters = 0;
                e
            })
            .collect()
    }

    /// Pushes a uniformly random ordering of a sequence holding
    /// `counts[2a + b]` events `(a, b)`. Each position draws its event type
    /// with probability proportional to the events of that type not yet
    /// placed, which is exactly the law of a uniformly shuffled sequence.
    fn push_shuffled(&mut self, counts: [u32; 4], rng: &mut ChaCha8Rng) {
        let total: u32 = counts.iter().sum();
        // Cumulative counts of types 0, ≤1 and ≤2.
        let mut c0 = counts[0];
        let mut c1 = c0 + counts[1];
        let mut c2 = c1 + counts[2];
        let mut remaining = total;
        while remaining > 0 {
            let room = self.block_len - self.block.len();
            let take = room.min(remaining as usize);
            let mut acc = self.acc;
            self.block.extend((0..take).map(|_| {
                let r = rng.random_range(0..remaining);
                remaining -= 1;
                let t = usize::from(r >= c0) + usize::from(r >= c1) + usize::from(r >= c2);
                c0 -= u32::from(t == 0);
                c1 -= u32::from(t <= 1);
                c2 -= u32::from(t <= 2);
                acc += PACKED[t];
                acc
            }));
            self.acc = acc;
            if self.block.len() == self.block_len {
                self.flush();
            }
        }
    }
}

fn type_counts(events: &[Event]) -> [u32; 4] {
    let mut counts = [0u32; 4];
    for e in events {
        counts[usize::from(2 * e.a + e.b)] += 1;
    }
    counts
}

/// `S_n` for every size in `ns`; `feed` pushes setting `i`'s events.
fn sn_for_ordering(
    mut feed: impl FnMut(usize, &mut Clusterer),
    ns: &[usize],
    strategy: BinningStrategy,
    tie_seed: impl Fn(usize) -> u64,
    block_len: usize,
) -> Vec<ChshEstimate> {
    let mut clusterer = Clusterer::new(ns, strategy, tie_seed, block_len);
    let per_setting: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            feed(i, &mut clusterer);
            clusterer.finish()
        })
        .collect();
    ns.iter()
        .enumerate()
        .map(|(j, &n)| chsh_value(std::array::from_fn(|i| per_setting[i][j]), n))
        .collect()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Tie-draw seed for bootstrap iteration `iteration` (`None`: the unshuffled
/// point estimate) at cluster size `n`.
pub fn tie_seed(seed: u64, iteration: Option<usize>, n: usize) -> u64 {
    let it = iteration.map_or(u64::MAX, |i| i as u64);
    splitmix(splitmix(seed ^ splitmix(it)) ^ n as u64)
}

/// Point estimate and shuffle statistics of `S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub n: usize,
    /// Estimate on the data in recorded order; `sigma` is the bootstrap one.
    pub point: ChshEstimate,
    pub mean: f64,
    pub sigma: f64,
    pub resamples: usize,
}

/// Shuffle bootstrap of `S_n` at one cluster size.
pub fn bootstrap_sn(
    data: &SettingSequences,
    n: usize,
    strategy: BinningStrategy,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapEstimate> {
    Ok(bootstrap_curve(data, &[n], strategy, resamples, seed)?[0])
}

/// Shuffle bootstrap for several cluster sizes. Each iteration permutes
/// every setting pair's events independently (one permutation shared by all
/// sizes), re-clusters and re-estimates. Iteration `i` draws from a ChaCha8
/// generator seeded with `seed` on stream `i`, and results are reduced in
/// iteration order, so the thread count never changes the output.
pub fn bootstrap_curve(
    data: &SettingSequences,
    ns: &[usize],
    strategy: BinningStrategy,
    resamples: usize,
    seed: u64,
) -> Result<Vec<BootstrapEstimate>> {
    if resamples < 2 {
        return Err(invalid("the bootstrap needs at least two resamples"));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(invalid("cluster sizes must be nonempty and positive"));
    }
    for &n in ns {
        for pair in SettingPair::ALL {
            if data.sequence(pair).len() < n {
                return Err(insufficient(pair, n));
            }
        }
    }

    let points = sn_for_ordering(
        |i, c| data.sequences[i].iter().for_each(|&e| c.push(packed(e))),
        ns,
        strategy,
        |n| tie_seed(seed, None, n),
        BLOCK_LEN,
    );

    let counts: Vec<[u32; 4]> = data.sequences.iter().map(|s| type_counts(s)).collect();
    let draws: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sn_for_ordering(
                |setting, c| c.push_shuffled(counts[setting], &mut rng),
                ns,
                strategy,
                |n| tie_seed(seed, Some(i), n),
                BLOCK_LEN,
            )
            .into_iter()
            .map(|e| e.s)
            .collect()
        })
        .collect();

    Ok(ns
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let values = draws.iter().map(|d| d[j]);
            let mean = values.clone().sum::<f64>() / resamples as f64;
            let var = values.map(|s| (s - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
            let sigma = var.sqrt();
            let mut point = points[j];
            point.sigma = Some(sigma);
            BootstrapEstimate {
                n,
                point,
                mean,
                sigma,
                resamples,
            }
        })
        .collect())
}

/// When an `S_n` counts as a violation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k")]
pub enum ViolationCriterion {
    /// `s > 2`.
    #[default]
    PointEstimate,
    /// `s − k·σ > 2`.
    MinusKSigma(f64),
}

impl ViolationCriterion {
    pub fn holds(&self, s: f64, sigma: f64) -> bool {
        match *self {
            ViolationCriterion::PointEstimate => s > 2.0,
            ViolationCriterion::MinusKSigma(k) => s - k * sigma > 2.0,
        }
    }
}

impl std::fmt::Display for ViolationCriterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ViolationCriterion::PointEstimate => f.write_str("s > 2"),
            ViolationCriterion::MinusKSigma(k) => write!(f, "s - {k}*sigma > 2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnEntry {
    pub beta: Option<f64>,
    pub n: usize,
    pub s: f64,
    pub sigma: f64,
    /// Bootstrap mean.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnCurve {
    pub strategy: BinningStrategy,
    pub criterion: ViolationCriterion,
    /// Sorted by `(n, beta)`.
    pub entries: Vec<SnEntry>,
    /// Largest `n` at which some `β` satisfies the criterion; 0 if none.
    pub n_critical: usize,
    /// Set when no entry satisfies the criterion.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnSummary {
    pub strategy: BinningStrategy,
    #[serde(rename = "nCritical")]
    pub n_critical: usize,
    pub criterion: ViolationCriterion,
    pub flag: Option<String>,
}

impl SnCurve {
    /// Columns `beta,n,s,sigma`, six significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,n,s,sigma\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{}\n",
                sig6_opt(e.beta),
                e.n,
                sig6(e.s),
                sig6(e.sigma)
            ));
        }
        out
    }

    pub fn summary(&self) -> SnSummary {
        SnSummary {
            strategy: self.strategy,
            n_critical: self.n_critical,
            criterion: self.criterion,
            flag: self.flag.clone(),
        }
    }
}

/// Bootstraps every run over the cluster sizes `ns` and reports the largest
/// `n` at which any run violates CHSH under `criterion`. Run `r` uses the
/// bootstrap seed `seed + r`.
pub fn find_nc(
    runs: &[SettingSequences],
    strategy: BinningStrategy,
    ns: &[usize],
    criterion: ViolationCriterion,
    resamples: usize,
    seed: u64,
) -> Result<SnCurve> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs to analyze".into()));
    }
    if let ViolationCriterion::MinusKSigma(k) = criterion {
        if !(k >= 0.0) {
            return Err(invalid(format!("k = {k} must be nonnegative")));
        }
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let mut entries = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        let curve = bootstrap_curve(run, &ns, strategy, resamples, seed.wrapping_add(r as u64))?;
        entries.extend(curve.into_iter().map(|b| SnEntry {
            beta: run.beta,
            n: b.n,
            s: b.point.s,
            sigma: b.sigma,
            mean: b.mean,
        }));
    }
    entries.sort_by(|x, y| {
        x.n.cmp(&y.n).then_with(|| {
            let (bx, by) = (
                x.beta.unwrap_or(f64::NEG_INFINITY),
                y.beta.unwrap_or(f64::NEG_INFINITY),
            );
            bx.total_cmp(&by)
        })
    });
    let n_critical = entries
        .iter()
        .filter(|e| criterion.holds(e.s, e.sigma))
        .map(|e| e.n)
        .max()
        .unwrap_or(0);
    let flag = (n_critical == 0).then(|| {
        format!(
            "no cluster size in {}..={} satisfies {criterion}",
            ns[0],
            ns[ns.len() - 1]
        )
    });
    Ok(SnCurve {
        strategy,
        criterion,
        entries,
        n_critical,
        flag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::TiePolicy;
    use crate::pairstats::CorrelatorTable;
    use crate::simulate::{generate_run, DetectorModel, StreamMeta};
    use proptest::prelude::*;

    fn stream(setting: usize, variant: u8, events: Vec<Event>, beta: Option<f64>) -> EventStream {
        EventStream {
            setting: SettingPair::from_index(setting),
            variant: BasisVariant::new(variant).unwrap(),
            events,
            meta: StreamMeta {
                beta,
                ..StreamMeta::default()
            },
        }
    }

    fn tagged(streams: Vec<EventStream>) -> Vec<(PathBuf, EventStream)> {
        streams
            .into_iter()
            .map(|s| (PathBuf::from("mem.jsonl"), s))
            .collect()
    }

    fn constant(e: Event, len: usize) -> SettingSequences {
        let streams = (0..4).map(|i| stream(i, 0, vec![e; len], None)).collect();
        ingest_streams(tagged(streams)).unwrap().remove(0)
    }

    #[test]
    fn variant_inversions_are_applied() {
        let mut streams: Vec<_> = (0..4)
            .map(|i| stream(i, 0, vec![Event::new(0, 1)], None))
            .collect();
        streams.push(stream(0, 1, vec![Event::new(0, 1)], None));
        streams.push(stream(0, 3, vec![Event::new(0, 1)], None));
        let runs = ingest_streams(tagged(streams)).unwrap();
        assert_eq!(
            runs[0].sequence(SettingPair::ALL[0]),
            &[Event::new(0, 1), Event::new(1, 1), Event::new(1, 0)]
        );
        assert_eq!(runs[0].sequence(SettingPair::ALL[1]), &[Event::new(0, 1)]);
        assert_eq!(runs[0].provenance.len(), 6);
    }

    #[test]
    fn missing_setting_is_an_ingestion_error() {
        let streams = (0..3)
            .map(|i| stream(i, 0, vec![Event::new(0, 0)], Some(0.1)))
            .collect();
        let err = ingest_streams(tagged(streams)).unwrap_err();
        assert!(matches!(err, Error::Ingestion { .. }));
        assert!(err.to_string().contains("(2,2)"), "{err}");
    }

    #[test]
    fn runs_are_grouped_by_beta() {
        let mut streams = Vec::new();
        for beta in [0.3, 0.1] {
            for i in 0..4 {
                streams.push(stream(i, 0, vec![Event::new(0, 0); 3], Some(beta)));
            }
        }
        let runs = ingest_streams(tagged(streams)).unwrap();
        assert_eq!(
            runs.iter().map(|r| r.beta).collect::<Vec<_>>(),
            vec![Some(0.1), Some(0.3)]
        );
    }

    #[test]
    fn clustering_examples() {
        let events: Vec<Event> = (0..100).map(|i| Event::new(i % 2, 0)).collect();
        let c = cluster_events(&events, 7).unwrap();
        assert_eq!((c.counts.len(), c.discarded), (14, 2));
        let c = cluster_events(&events, 1).unwrap();
        assert!(c
            .counts
            .iter()
            .zip(&events)
            .all(|(&(a, b), e)| (a, b) == (e.a.into(), e.b.into())));
        let c = cluster_events(&[Event::new(1, 1); 23], 5).unwrap();
        assert!(c.counts.iter().all(|&k| k == (5, 5)));
        let c = cluster_events(&events[..3], 7).unwrap();
        assert_eq!((c.counts.len(), c.discarded), (0, 3));
        assert!(cluster_events(&events, 0).is_err());
    }

    #[test]
    fn noiseless_perfect_correlation_sits_at_the_bound() {
        let data = constant(Event::new(1, 1), 60);
        for n in [1, 2, 5, 6] {
            let clustered = data
                .sequences
                .clone()
                .map(|s| cluster_events(&s, n).unwrap());
            let est = estimate_sn(&clustered, BinningStrategy::majority(), 0).unwrap();
            assert_eq!(est.correlators, [1.0; 4]);
            assert_eq!(est.s, 2.0);
        }
    }

    #[test]
    fn unit_clusters_reduce_to_plain_chsh() {
        let table = CorrelatorTable::unbiased([0.7, 0.7, 0.7, -0.7]).unwrap();
        let seqs: [Vec<Event>; 4] = std::array::from_fn(|i| {
            generate_run(
                &table,
                SettingPair::from_index(i),
                5000,
                &DetectorModel::ideal(),
                9,
            )
            .unwrap()
            .events
        });
        let plain: [f64; 4] = std::array::from_fn(|i| {
            seqs[i]
                .iter()
                .map(|e| f64::from(e.product_sign()))
                .sum::<f64>()
                / seqs[i].len() as f64
        });
        let clustered = seqs.map(|s| cluster_events(&s, 1).unwrap());
        for strategy in [BinningStrategy::majority(), BinningStrategy::Parity] {
            let est = estimate_sn(&clustered, strategy, 0).unwrap();
            // Majority at n = 1 maps a 1-bit to +1, parity maps it to −1;
            // either way the product sign is that of agreement.
            assert_eq!(est.correlators, plain);
        }
    }

    #[test]
    fn empty_setting_is_insufficient_data() {
        let mut clustered: [ClusteredOutcomes; 4] =
            std::array::from_fn(|_| cluster_events(&[Event::new(0, 0); 10], 5).unwrap());
        clustered[3] = cluster_events(&[Event::new(0, 0); 4], 5).unwrap();
        assert!(matches!(
            estimate_sn(&clustered, BinningStrategy::Parity, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn randomized_ties_are_seeded() {
        let events: Vec<Event> = (0..400)
            .map(|i| Event::new((i % 2) as u8, ((i / 2) % 2) as u8))
            .collect();
        let clustered: [ClusteredOutcomes; 4] =
            std::array::from_fn(|_| cluster_events(&events, 2).unwrap());
        let strategy = BinningStrategy::Majority(TiePolicy::Randomized);
        let a = estimate_sn(&clustered, strategy, 5).unwrap();
        assert_eq!(a, estimate_sn(&clustered, strategy, 5).unwrap());
        assert_ne!(a, estimate_sn(&clustered, strategy, 6).unwrap());
    }

    #[test]
    fn constant_data_has_zero_sigma() {
        let data = constant(Event::new(0, 1), 200);
        let b = bootstrap_sn(&data, 7, BinningStrategy::Parity, 50, 1).unwrap();
        assert_eq!(b.sigma, 0.0);
        assert_eq!(b.mean, b.point.s);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let table = CorrelatorTable::unbiased([0.9, 0.9, 0.9, 0.2]).unwrap();
        let streams = (0..4)
            .map(|i| {
                generate_run(
                    &table,
                    SettingPair::from_index(i),
                    3000,
                    &DetectorModel::ideal(),
                    4,
                )
                .unwrap()
            })
            .collect::<Vec<_>>();
        let data = ingest_streams(tagged(streams)).unwrap().remove(0);
        let a = bootstrap_curve(&data, &[2, 3, 5], BinningStrategy::majority(), 40, 12).unwrap();
        let b = bootstrap_curve(&data, &[2, 3, 5], BinningStrategy::majority(), 40, 12).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_curve(&data, &[2, 3, 5], BinningStrategy::majority(), 40, 13).unwrap();
        assert_ne!(a, c);
        // One size or several: the per-size statistics agree.
        assert_eq!(
            bootstrap_sn(&data, 3, BinningStrategy::majority(), 40, 12).unwrap(),
            a[1]
        );
        assert!(bootstrap_sn(&data, 3, BinningStrategy::majority(), 1, 12).is_err());
    }

    #[test]
    fn local_data_has_no_critical_size() {
        let data = constant(Event::new(1, 1), 100);
        let curve = find_nc(
            &[data],
            BinningStrategy::Parity,
            &[1, 2, 3],
            ViolationCriterion::PointEstimate,
            10,
            0,
        )
        .unwrap();
        assert_eq!(curve.n_critical, 0);
        assert!(curve.flag.is_some());
        assert!(curve.entries.iter().all(|e| e.s == 2.0));
    }

    #[test]
    fn criterion_rules() {
        assert!(ViolationCriterion::PointEstimate.holds(2.01, 1.0));
        assert!(!ViolationCriterion::PointEstimate.holds(2.0, 0.0));
        assert!(!ViolationCriterion::MinusKSigma(2.0).holds(2.01, 0.01));
        assert!(ViolationCriterion::MinusKSigma(2.0).holds(2.03, 0.01));
    }

    #[test]
    fn csv_columns_and_sorting() {
        let mut streams = Vec::new();
        for beta in [0.4, 0.2] {
            for i in 0..4 {
                streams.push(stream(i, 0, vec![Event::new(0, 0); 12], Some(beta)));
            }
        }
        let runs = ingest_streams(tagged(streams)).unwrap();
        let curve = find_nc(
            &runs,
            BinningStrategy::Parity,
            &[3, 1],
            ViolationCriterion::PointEstimate,
            4,
            0,
        )
        .unwrap();
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "beta,n,s,sigma");
        assert_eq!(lines[1], "0.200000,1,2.00000,0");
        assert_eq!(lines[2], "0.400000,1,2.00000,0");
        assert!(lines[3].starts_with("0.200000,3,"));
        let json = serde_json::to_value(curve.summary()).unwrap();
        assert_eq!(json["nCritical"], 0);
    }

    #[test]
    fn sequential_shuffle_is_uniform() {
        // Multiset {00, 00, 01, 11}: 4!/2! = 12 distinct orderings. A
        // block length of 1 records every prefix value as it is pushed.
        let mut freq = std::collections::HashMap::new();
        let draws = 120_000;
        for i in 0..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            rng.set_stream(i);
            let mut c = Clusterer::new(&[1], BinningStrategy::Parity, |_| 0, 5);
            c.push_shuffled([2, 1, 0, 1], &mut rng);
            *freq.entry(c.block.clone()).or_insert(0usize) += 1;
        }
        assert_eq!(freq.len(), 12);
        let expected = draws as f64 / 12.0;
        let chi2: f64 = freq
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // χ²(11) upper 10⁻⁴ quantile.
        assert!(chi2 < 35.56, "{chi2}");
        assert!(freq
            .keys()
            .all(|ab| *ab.last().unwrap() == (1u64 << 32) | 2));
    }

    proptest! {
        #[test]
        fn clustering_conserves_events(len in 0usize..300, n in 1usize..40) {
            let events: Vec<Event> = (0..len).map(|i| Event::new((i % 3 == 0) as u8, (i % 5 == 0) as u8)).collect();
            let c = cluster_events(&events, n).unwrap();
            prop_assert_eq!(c.counts.len() * n + c.discarded, len);
            prop_assert!(c.counts.iter().all(|&(a, b)| a as usize <= n && b as usize <= n));
            let ones: u32 = c.counts.iter().map(|k| k.0).sum();
            let expect = events[..c.counts.len() * n].iter().map(|e| u32::from(e.a)).sum::<u32>();
            prop_assert_eq!(ones, expect);
        }

        #[test]
        fn streaming_route_matches_explicit_clusters(
            bits in proptest::collection::vec((0u8..2, 0u8..2), 1..200),
            ns in proptest::collection::vec(1usize..12, 1..4),
            block_len in 1usize..40,
            seed in any::<u64>(),
        ) {
            let events: Vec<Event> = bits.iter().map(|&(a, b)| Event::new(a, b)).collect();
            let seqs: [Vec<Event>; 4] = std::array::from_fn(|i| events[i * events.len() / 8..].to_vec());
            prop_assume!(ns.iter().all(|&n| seqs[3].len() >= n));
            let strategy = BinningStrategy::Majority(TiePolicy::Randomized);
            let streamed = sn_for_ordering(
                |i, c| seqs[i].iter().for_each(|&e| c.push(packed(e))),
                &ns,
                strategy,
                |n| seed ^ n as u64,
                block_len,
            );
            for (j, &n) in ns.iter().enumerate() {
                let clustered = seqs.clone().map(|s| cluster_events(&s, n).unwrap());
                let direct = estimate_sn(&clustered, strategy, seed ^ n as u64).unwrap();
                prop_assert_eq!(direct, streamed[j]);
            }
        }
    }
}
