//! simulate → (file) → analyze loops against exact values.

use manybell::analyze::{
    bootstrap_sn, cluster_events, estimate_sn, find_nc, ingest, ingest_streams, tie_seed,
    SettingSequences, ViolationCriterion,
};
use manybell::binning::{beta0, binned_chsh, parity_chsh_analytic, BinningStrategy};
use manybell::io::write_streams;
use manybell::optimize::{max_chsh, SearchMode};
use manybell::pairstats::{settings_from_beta, werner_correlators, SettingPair};
use manybell::simulate::{simulate, EventStream, SimulationRecipe};

fn runs(streams: Vec<EventStream>) -> Vec<SettingSequences> {
    ingest_streams(streams.into_iter().map(|s| ("mem".into(), s))).unwrap()
}

fn werner(beta: f64, v: f64, events: usize, seed: u64) -> Vec<EventStream> {
    simulate(&SimulationRecipe::werner(beta, v, events, seed)).unwrap()
}

/// Independent-cluster sigma of the CHSH sum.
fn binomial_sigma(correlators: [f64; 4], clusters: usize) -> f64 {
    correlators
        .iter()
        .map(|e| (1.0 - e * e) / clusters as f64)
        .sum::<f64>()
        .sqrt()
}

#[test]
fn parity_at_twelve_pairs_matches_closed_form() {
    let beta = beta0() / 12f64.sqrt();
    let v = 0.9871;
    let data = &runs(werner(beta, v, 1_000_000, 41))[0];
    let clusters: Vec<_> = SettingPair::ALL
        .iter()
        .map(|&p| cluster_events(data.sequence(p), 12).unwrap())
        .collect();
    let clusters: [_; 4] = clusters.try_into().unwrap();
    let est = estimate_sn(&clusters, BinningStrategy::Parity, 0).unwrap();
    let theory = parity_chsh_analytic(beta, v, 12);
    let table = werner_correlators(&settings_from_beta(beta).unwrap(), v).unwrap();
    let sigma = binomial_sigma(table.correlators().map(|e| e.powi(12)), 1_000_000 / 12);
    assert!(
        (est.s - theory).abs() < 3.0 * sigma,
        "{} vs {theory} (sigma {sigma})",
        est.s
    );
}

#[test]
fn estimates_converge_to_the_convolution_path() {
    let strategies = [BinningStrategy::Parity, BinningStrategy::majority()];
    for (k, &(beta, n)) in [(0.3, 3usize), (0.2, 6), (0.45, 9)].iter().enumerate() {
        let data = &runs(werner(beta, 1.0, 1_000_000, 100 + k as u64))[0];
        let table = werner_correlators(&settings_from_beta(beta).unwrap(), 1.0).unwrap();
        let clusters: [_; 4] =
            SettingPair::ALL.map(|p| cluster_events(data.sequence(p), n).unwrap());
        for strategy in strategies {
            let exact = binned_chsh(&table, n, strategy).unwrap();
            let est = estimate_sn(&clusters, strategy, 5).unwrap();
            let sigma = binomial_sigma(est.correlators, 1_000_000 / n);
            assert!(
                (est.s - exact).abs() < 3.0 * sigma,
                "{strategy} n={n}: {} vs {exact}",
                est.s
            );
        }
    }
}

#[test]
fn majority_at_0_97_finds_about_twenty_pairs() {
    let maj = BinningStrategy::majority();
    let beta = max_chsh(19, 0.97, maj, SearchMode::BetaFamily)
        .unwrap()
        .beta();
    let mut streams = Vec::new();
    for (k, f) in [0.85, 1.0, 1.15].iter().enumerate() {
        let mut recipe = SimulationRecipe::werner(beta * f, 0.97, 250_000, 100 + 4 * k as u64);
        recipe.symmetrize = true;
        streams.extend(simulate(&recipe).unwrap());
    }
    let ns: Vec<usize> = (5..=40).collect();
    // The point-estimate rule ignores sigma, so two resamples suffice.
    let curve = find_nc(
        &runs(streams),
        maj,
        &ns,
        ViolationCriterion::PointEstimate,
        2,
        1,
    )
    .unwrap();
    assert!(
        (18..=24).contains(&curve.n_critical),
        "{}",
        curve.n_critical
    );
}

#[test]
fn single_pair_range_is_the_plain_chsh_test() {
    for (v, expected) in [(1.0, true), (0.6, false)] {
        let data = runs(werner(std::f64::consts::FRAC_PI_4, v, 20_000, 9));
        let plain: f64 = SettingPair::ALL
            .iter()
            .map(|&p| {
                let seq = data[0].sequence(p);
                let sum: i64 = seq.iter().map(|e| e.product_sign() as i64).sum();
                p.chsh_sign() * sum as f64 / seq.len() as f64
            })
            .sum();
        let curve = find_nc(
            &data,
            BinningStrategy::Parity,
            &[1],
            ViolationCriterion::PointEstimate,
            4,
            0,
        )
        .unwrap();
        assert_eq!(curve.entries[0].s, plain);
        assert_eq!(curve.n_critical == 1, expected);
        assert_eq!(plain > 2.0, expected);
    }
}

/// The bootstrap mean sits where a random regrouping of the same events
/// lands on average; the recorded order is one such regrouping, so it is
/// about one sigma away from the mean, not sigma/√R.
#[test]
fn bootstrap_mean_is_the_regrouping_expectation() {
    let data = &runs(werner(0.25, 0.99, 60_000, 12))[0];
    let n = 4;
    let resamples = 400;
    let boot = bootstrap_sn(data, n, BinningStrategy::Parity, resamples, 3).unwrap();
    // Exact expectation of the parity correlator of a random n-subset of a
    // fixed sequence: E[(-1)^k] for k hypergeometric.
    let expected: f64 = SettingPair::ALL
        .iter()
        .map(|&p| {
            let seq = data.sequence(p);
            let total = seq.len();
            let minus = seq.iter().filter(|e| e.product_sign() < 0).count();
            let mut value = 0.0;
            for k in 0..=n.min(minus) {
                let ways = choose(minus, k) * choose(total - minus, n - k) / choose(total, n);
                value += if k % 2 == 0 { ways } else { -ways };
            }
            p.chsh_sign() * value
        })
        .sum();
    let tolerance = 4.0 * boot.sigma / (resamples as f64).sqrt();
    assert!(
        (boot.mean - expected).abs() < tolerance,
        "{} vs {expected}",
        boot.mean
    );
    assert!((boot.point.s - boot.mean).abs() < 4.0 * boot.sigma);
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Literal form of the mean-vs-point rule, over several data sets. Fails:
/// the point estimate is a single regrouping, so it sits about one sigma
/// from the mean rather than sigma/sqrt(R).
#[test]
#[ignore]
fn bootstrap_mean_within_sigma_over_root_resamples_of_point() {
    for seed in 0..10 {
        let data = &runs(werner(0.25, 0.99, 60_000, seed))[0];
        let boot = bootstrap_sn(data, 4, BinningStrategy::Parity, 1000, 3).unwrap();
        let z = (boot.mean - boot.point.s) / boot.sigma;
        assert!(z.abs() < 3.0 / 1000f64.sqrt(), "seed {seed}: z = {z}");
    }
}

#[test]
fn file_round_trip_gives_the_same_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut recipe = SimulationRecipe::werner(0.3, 0.98, 3_000, 77);
    recipe.symmetrize = true;
    let streams = simulate(&recipe).unwrap();
    let jsonl = dir.path().join("run.jsonl");
    let csv = dir.path().join("run.csv");
    write_streams(&jsonl, &streams).unwrap();
    write_streams(&csv, &streams).unwrap();

    let ns = [1, 2, 3, 5];
    let curve = |data: &[SettingSequences]| {
        find_nc(
            data,
            BinningStrategy::Parity,
            &ns,
            ViolationCriterion::MinusKSigma(1.0),
            16,
            4,
        )
        .unwrap()
        .entries
        .iter()
        .map(|e| (e.n, e.s, e.sigma))
        .collect::<Vec<_>>()
    };
    let memory = curve(&runs(streams));
    assert_eq!(memory, curve(&ingest(&[jsonl]).unwrap()));
    assert_eq!(memory, curve(&ingest(&[csv]).unwrap()));
    assert_ne!(tie_seed(4, None, 2), tie_seed(4, Some(0), 2));
}
