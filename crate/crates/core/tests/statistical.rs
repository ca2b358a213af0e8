//! Statistical checks with fixed seeds: seed-hash uniformity, rank
//! marginals, k-mins slot frequencies, max-sketch distribution equality,
//! sharing optimality of shared-seed coordination, and the weighted-Jaccard
//! estimator mean.

mod common;

use common::*;
use coordsketch_core::estimate::jaccard_kmins;
use coordsketch_core::model::{true_aggregate, AggregateSpec, Attrs};
use coordsketch_core::rank::{rank_vector, CoordMode, RankFamily, RankSpec, SeedChannel, SeedSource};
use coordsketch_core::sketch::{build_colocated_summary, kmins_build, union_max_sketch};
use coordsketch_core::{AggKind, ColocatedDataset, KeyId};

/// One-sample Kolmogorov–Smirnov statistic against a CDF given as a sorted
/// vector of F(x_i) values.
fn ks_statistic(sorted_cdf_values: &[f64]) -> f64 {
    let n = sorted_cdf_values.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &f) in sorted_cdf_values.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// 1% critical value of the one-sample KS statistic.
fn ks_crit_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn hashed_seeds_pass_uniformity_ks() {
    let n = 1_000_000usize;
    let source = SeedSource::Hashed;
    let mut us: Vec<f64> = (0..n)
        .map(|i| {
            source
                .unit(0x5eed, &KeyId::new(format!("key-{i}")), SeedChannel::Shared)
                .unwrap()
        })
        .collect();
    us.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = ks_statistic(&us);
    assert!(
        d < ks_crit_1pct(n),
        "KS statistic {d} ≥ 1% critical value {}",
        ks_crit_1pct(n)
    );
}

#[test]
fn rank_marginals_match_family_cdf() {
    // For fixed w, the empirical rank CDF over many keys must match F_w for
    // every family and coordination mode; under independent-differences the
    // per-assignment marginal is exponential with the assignment's weight.
    let n = 100_000usize;
    let w_mid = 3.5f64;
    let assignments: Vec<String> = vec!["lo".into(), "mid".into(), "hi".into()];
    let weights = [1.25, w_mid, 9.0];
    for (family, mode) in [
        (RankFamily::Exp, CoordMode::Independent),
        (RankFamily::Ipps, CoordMode::Independent),
        (RankFamily::Exp, CoordMode::SharedSeed),
        (RankFamily::Ipps, CoordMode::SharedSeed),
        (RankFamily::Exp, CoordMode::IndependentDifferences),
    ] {
        let spec = RankSpec::new(family, mode, 0xfeed).unwrap();
        let mut cdf_vals: Vec<f64> = (0..n)
            .map(|i| {
                let r = rank_vector(
                    &spec,
                    &SeedSource::Hashed,
                    &KeyId::new(format!("m{i}")),
                    &weights,
                    &assignments,
                )
                .unwrap()[1];
                coordsketch_core::rank::cdf(family, w_mid, r).unwrap()
            })
            .collect();
        cdf_vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = ks_statistic(&cdf_vals);
        assert!(
            d < ks_crit_1pct(n),
            "{family:?}/{mode:?}: KS {d} ≥ {}",
            ks_crit_1pct(n)
        );
    }
}

#[test]
fn kmins_slots_are_fair_for_equal_weights() {
    let rows = vec![
        (key("a"), vec![1.0], Attrs::new()),
        (key("b"), vec![1.0], Attrs::new()),
    ];
    let ds = ColocatedDataset::new(vec!["w".into()], rows).unwrap();
    let k = 100_000usize;
    let spec = RankSpec::new(RankFamily::Exp, CoordMode::SharedSeed, 0x2b).unwrap();
    let sketch = kmins_build(&ds, "w", k, &spec, &SeedSource::Hashed).unwrap();
    let wins_a = sketch
        .slots
        .iter()
        .filter(|s| s.as_ref().unwrap().1.as_str() == "a")
        .count();
    let freq = wins_a as f64 / k as f64;
    let sigma = 0.5 / (k as f64).sqrt();
    assert!(
        (freq - 0.5).abs() <= 3.0 * sigma,
        "slot frequency {freq} off fair share by more than 3σ"
    );
}

/// Under shared-seed ranks the min-rank of a key is exactly the rank its
/// max weight draws from the same placement, so the derived max-sketch must
/// equal a directly built sketch of (I, w^(max R)) bit for bit, salt by salt.
#[test]
fn union_max_sketch_equals_direct_sketch_shared_seed() {
    let ds = synth_dataset(30, 2, 0x77);
    let r = ["a0", "a1"];
    let max_rows: Vec<(KeyId, Vec<f64>, Attrs)> = ds
        .rows()
        .map(|(k, wv)| (k.clone(), vec![wv[0].max(wv[1])], Attrs::new()))
        .collect();
    let max_ds = ColocatedDataset::new(vec!["max".into()], max_rows).unwrap();
    for salt in 0..200u64 {
        for family in [RankFamily::Ipps, RankFamily::Exp] {
            let spec = RankSpec::new(family, CoordMode::SharedSeed, salt).unwrap();
            let s = build_colocated_summary(&ds, 4, &spec, &SeedSource::Hashed).unwrap();
            let derived = union_max_sketch(&s, &r).unwrap();
            let direct = build_colocated_summary(&max_ds, 4, &spec, &SeedSource::Hashed)
                .unwrap()
                .sketch_of("max")
                .unwrap();
            assert_eq!(derived.entries, direct.entries, "salt {salt} {family:?}");
            assert_eq!(
                derived.threshold_next.to_bits(),
                direct.threshold_next.to_bits(),
                "salt {salt} {family:?}"
            );
        }
    }
}

/// Under independent-differences coordination the derived max-sketch only
/// matches the direct sketch in distribution; compare thresholds with a
/// two-sample KS test.
#[test]
fn union_max_sketch_distribution_independent_differences() {
    let ds = synth_dataset(24, 2, 0x99);
    let r = ["a0", "a1"];
    let max_rows: Vec<(KeyId, Vec<f64>, Attrs)> = ds
        .rows()
        .map(|(k, wv)| (k.clone(), vec![wv[0].max(wv[1])], Attrs::new()))
        .collect();
    let max_ds = ColocatedDataset::new(vec!["max".into()], max_rows).unwrap();
    let runs = 4000usize;
    let mut derived_thresholds = Vec::with_capacity(runs);
    let mut direct_thresholds = Vec::with_capacity(runs);
    for salt in 0..runs as u64 {
        let spec = RankSpec::new(RankFamily::Exp, CoordMode::IndependentDifferences, salt).unwrap();
        let s = build_colocated_summary(&ds, 4, &spec, &SeedSource::Hashed).unwrap();
        derived_thresholds.push(union_max_sketch(&s, &r).unwrap().threshold_next);
        let direct = build_colocated_summary(&max_ds, 4, &spec, &SeedSource::Hashed).unwrap();
        direct_thresholds.push(direct.assignments[0].threshold_next);
    }
    derived_thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    direct_thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Two-sample KS.
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < runs && j < runs {
        if derived_thresholds[i] <= direct_thresholds[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / runs as f64 - j as f64 / runs as f64).abs());
    }
    let crit = 1.628 * (2.0 / runs as f64).sqrt();
    assert!(d < crit, "two-sample KS {d} ≥ {crit}");
}

#[test]
fn shared_seed_minimizes_distinct_keys() {
    // Correlated assignments: shared-seed union must be smaller than the
    // independent union on average, significant at 3σ over paired salts.
    let ds = synth_correlated(60, 3, 0x1234, 0.3);
    let k = 6;
    let salts = 200u64;
    let mut diffs = Vec::with_capacity(salts as usize);
    for salt in 0..salts {
        let ss = RankSpec::new(RankFamily::Ipps, CoordMode::SharedSeed, salt).unwrap();
        let ind = RankSpec::new(RankFamily::Ipps, CoordMode::Independent, salt).unwrap();
        let n_ss = build_colocated_summary(&ds, k, &ss, &SeedSource::Hashed)
            .unwrap()
            .distinct_keys() as f64;
        let n_ind = build_colocated_summary(&ds, k, &ind, &SeedSource::Hashed)
            .unwrap()
            .distinct_keys() as f64;
        diffs.push(n_ind - n_ss);
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(
        mean > 3.0 * se,
        "shared-seed saved {mean:.3} keys on average (se {se:.3}); expected a 3σ gap"
    );
}

#[test]
fn jaccard_estimator_mean_matches_ratio() {
    let ds = fig_multi_dataset();
    let r = vec!["1".to_string(), "2".to_string()];
    let truth_min = true_aggregate(&ds, &AggregateSpec::new(AggKind::Min(r.clone()))).unwrap();
    let truth_max = true_aggregate(&ds, &AggregateSpec::new(AggKind::Max(r))).unwrap();
    let truth = truth_min / truth_max;
    assert!((truth - 40.0 / 82.0).abs() < 1e-12);
    let replicas = 100_000usize;
    let est = jaccard_kmins(&ds, "1", "2", replicas, 0x7ac).unwrap();
    let sigma = (truth * (1.0 - truth) / replicas as f64).sqrt();
    assert!(
        (est - truth).abs() <= 3.0 * sigma,
        "jaccard estimate {est} vs truth {truth} (3σ = {})",
        3.0 * sigma
    );
}
