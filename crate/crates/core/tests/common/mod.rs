//! Shared fixtures: the two worked example data sets and their seed tables.
#![allow(dead_code)]

use coordsketch_core::model::Attrs;
use coordsketch_core::rank::{SeedSource, SeedTable};
use coordsketch_core::{ColocatedDataset, KeyId};

pub const FIG_KEYS: [&str; 6] = ["i1", "i2", "i3", "i4", "i5", "i6"];
pub const FIG_W1: [f64; 6] = [15.0, 0.0, 10.0, 5.0, 10.0, 10.0];
pub const FIG_W2: [f64; 6] = [20.0, 10.0, 12.0, 20.0, 0.0, 10.0];
pub const FIG_W3: [f64; 6] = [10.0, 15.0, 15.0, 0.0, 15.0, 10.0];
pub const FIG_U: [f64; 6] = [0.22, 0.75, 0.07, 0.92, 0.55, 0.37];
/// Independent-mode second and third seed rows.
pub const FIG_U2: [f64; 6] = [0.47, 0.58, 0.71, 0.84, 0.25, 0.32];
pub const FIG_U3: [f64; 6] = [0.63, 0.92, 0.08, 0.59, 0.32, 0.80];

pub fn key(s: &str) -> KeyId {
    KeyId::new(s)
}

fn fig_attrs(i: usize) -> Attrs {
    let mut a = Attrs::new();
    a.insert(
        "parity".into(),
        if (i + 1).is_multiple_of(2) { "even" } else { "odd" }.into(),
    );
    a
}

/// The three-assignment example data set.
pub fn fig_multi_dataset() -> ColocatedDataset {
    let rows = (0..6).map(|i| {
        (
            key(FIG_KEYS[i]),
            vec![FIG_W1[i], FIG_W2[i], FIG_W3[i]],
            fig_attrs(i),
        )
    });
    ColocatedDataset::new(vec!["1".into(), "2".into(), "3".into()], rows).unwrap()
}

/// Shared-seed table for the figure. The printed rank tables need
/// u(i3) = 0.07 in assignments 1 and 3 but 0.70 in assignment 2 (the
/// figure reuses the single-assignment example's rank row there), so the
/// table carries a per-assignment override.
pub fn fig_shared_seeds() -> SeedSource {
    let mut t = SeedTable::default();
    for (i, k) in FIG_KEYS.iter().enumerate() {
        t.insert(k, FIG_U[i]);
    }
    t.insert_for("i3", "2", 0.70);
    SeedSource::Table(t)
}

/// Independent-mode seed table: one u row per assignment.
pub fn fig_independent_seeds() -> SeedSource {
    let mut t = SeedTable::default();
    for (i, k) in FIG_KEYS.iter().enumerate() {
        t.insert_for(k, "1", FIG_U[i]);
        t.insert_for(k, "2", FIG_U2[i]);
        t.insert_for(k, "3", FIG_U3[i]);
    }
    SeedSource::Table(t)
}

/// The single-assignment weighted-set example: weights of assignment "2"
/// with the seed row whose ranks the figure actually uses (u(i3) = 0.70).
pub fn fig_single_dataset() -> ColocatedDataset {
    let rows = (0..6).map(|i| (key(FIG_KEYS[i]), vec![FIG_W2[i]], fig_attrs(i)));
    ColocatedDataset::new(vec!["w".into()], rows).unwrap()
}

pub fn fig_single_seeds() -> SeedSource {
    let mut t = SeedTable::default();
    for (i, k) in FIG_KEYS.iter().enumerate() {
        t.insert(k, if *k == "i3" { 0.70 } else { FIG_U[i] });
    }
    SeedSource::Table(t)
}

/// Exact per-key weight lookup for the multi-assignment figure.
pub fn fig_weight(key_name: &str, assignment: &str) -> f64 {
    let i = FIG_KEYS.iter().position(|k| *k == key_name).unwrap();
    match assignment {
        "1" => FIG_W1[i],
        "2" => FIG_W2[i],
        "3" => FIG_W3[i],
        _ => panic!("unknown assignment"),
    }
}

/// Small deterministic synthetic datasets for property checks.
pub fn synth_dataset(n: usize, m: usize, seed: u64) -> ColocatedDataset {
    let assignments: Vec<String> = (0..m).map(|b| format!("a{b}")).collect();
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    let mut next = move || {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        state.wrapping_mul(0x2545_f491_4f6c_dd1d)
    };
    let rows = (0..n).map(|i| {
        let k = key(&format!("k{i:03}"));
        let wv: Vec<f64> = (0..m)
            .map(|_| {
                let r = next();
                if r % 5 == 0 {
                    0.0
                } else {
                    1.0 + (r % 1000) as f64 / 37.0
                }
            })
            .collect();
        let wv = if wv.iter().all(|&w| w == 0.0) {
            let mut wv = wv;
            wv[0] = 1.0;
            wv
        } else {
            wv
        };
        let mut attrs = Attrs::new();
        attrs.insert("grp".into(), format!("{}", i % 2));
        (k, wv, attrs)
    });
    ColocatedDataset::new(assignments, rows.collect::<Vec<_>>()).unwrap()
}

/// Correlated synthetic data: a common skewed base weight per key with
/// small per-assignment wobble, plus occasional dropout.
pub fn synth_correlated(n: usize, m: usize, seed: u64, wobble: f64) -> ColocatedDataset {
    let assignments: Vec<String> = (0..m).map(|b| format!("a{b}")).collect();
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x1235);
    let mut next = move || {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        state.wrapping_mul(0x2545_f491_4f6c_dd1d)
    };
    let rows = (0..n).map(|i| {
        let base = 1000.0 / (1.0 + i as f64).powf(1.2);
        let wv: Vec<f64> = (0..m)
            .map(|_| {
                let r = next();
                if r % 11 == 0 {
                    0.0
                } else {
                    let jitter = 1.0 + wobble * (((r >> 8) % 2000) as f64 / 1000.0 - 1.0);
                    base * jitter
                }
            })
            .collect();
        let wv = if wv.iter().all(|&w| w == 0.0) {
            let mut wv = wv;
            wv[0] = base;
            wv
        } else {
            wv
        };
        let mut attrs = Attrs::new();
        attrs.insert("grp".into(), format!("{}", i % 2));
        (key(&format!("c{i:03}")), wv, attrs)
    });
    ColocatedDataset::new(assignments, rows.collect::<Vec<_>>()).unwrap()
}
