//! Exact seed-grid oracle for tiny instances.
//!
//! For each target key the oracle enumerates that key's seed(s) on a full
//! G-point-per-axis midpoint grid inside every conditioning subspace (a
//! fixed assignment of all other keys' seeds), with the subspaces themselves
//! enumerated on a coarser midpoint grid chosen to fit a point budget.
//! Unbiasedness and the per-key variance lemmas hold conditionally on each
//! subspace — that is how they are proven — so the O(1/G) quadrature
//! tolerance applies per subspace no matter how coarse the outer grid is;
//! the outer resolution only reweights the reported global moments.
//!
//! The estimator arithmetic here is written from the closed forms,
//! independently of the production pipeline; `cross_check` ties the two
//! together by comparing them point for point on hash-derived seeds.

use coordsketch_core::estimate as prod;
use coordsketch_core::rank::{CoordMode, RankFamily, RankSpec, SeedChannel, SeedSource};
use coordsketch_core::sketch::{
    build_colocated_poisson, build_colocated_summary, build_dispersed_summary,
    poisson_taus_for_expected_size, union_max_sketch,
};
use coordsketch_core::{AggKind, ColocatedDataset, KeyId};

use crate::error::{Error, Result};
use crate::harness::{family_to_str, mode_to_str};
use rayon::prelude::*;

const MAX_KEYS: usize = 5;
const MAX_ASSIGNMENTS: usize = 3;
const DEFAULT_BUDGET: u64 = 60_000_000;

/// Estimators the oracle evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Est {
    /// Colocated inclusive estimator.
    Inclusive,
    /// Generic consistent-ranks estimator.
    Generic,
    /// Plain single-assignment rank conditioning on assignment `usize`.
    Rc(usize),
    /// Horvitz-Thompson over a Poisson sketch of assignment `usize`.
    Ht(usize),
    /// Rank conditioning over the derived max-weight bottom-k sketch.
    TMax,
    /// s-set top-ℓ estimator.
    SSet,
    /// l-set top-ℓ estimator.
    LSet,
    /// L1 as max minus min, with the s-set or l-set min.
    L1S,
    L1L,
}

struct EstSlot {
    est: Est,
    name: &'static str,
    /// Index into the resolved kinds (ignored by Rc/Ht).
    kind: usize,
}

/// Per-(estimator, key) accumulator across subspaces.
#[derive(Clone, Default)]
struct Acc {
    subspaces: usize,
    sum_mean: f64,
    sum_mean_sq: f64,
    sum_inner_var: f64,
    max_bias: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleRow {
    pub estimator: String,
    pub spec: String,
    pub mode: String,
    pub family: String,
    pub k: usize,
    pub key: String,
    pub f: f64,
    pub expectation: f64,
    pub variance: f64,
    /// Largest |E[a | subspace] − f| over all enumerated subspaces.
    pub max_subspace_bias: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OracleOutcome {
    pub grid: usize,
    pub rows: Vec<OracleRow>,
}

impl OracleOutcome {
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out =
            String::from("estimator,spec,mode,family,k,key,f,expectation,variance,max_subspace_bias\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.estimator, r.spec, r.mode, r.family, r.k, r.key, r.f, r.expectation, r.variance,
                r.max_subspace_bias
            );
        }
        out
    }

    pub fn row(&self, estimator: &str, spec: &str, key: &str) -> Option<&OracleRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.spec == spec && r.key == key)
    }
}

struct ResolvedKind {
    label: String,
    idxs: Vec<usize>,
    /// Top-ℓ order (None for L1).
    ell: Option<usize>,
    is_l1: bool,
}

struct Instance {
    keys: Vec<KeyId>,
    weights: Vec<Vec<f64>>, // n × m
    m: usize,
    k: usize,
    family: RankFamily,
    mode: CoordMode,
    kinds: Vec<ResolvedKind>,
    taus: Vec<f64>,
    /// Ascending-weight order and increments per key (independent-differences).
    id_order: Vec<Vec<usize>>,
    id_delta: Vec<Vec<f64>>,
}

impl Instance {
    fn seeds_per_key(&self) -> usize {
        match self.mode {
            CoordMode::SharedSeed => 1,
            _ => self.m,
        }
    }

    fn f_true(&self, kind: &ResolvedKind, key: usize) -> f64 {
        let w = &self.weights[key];
        if kind.is_l1 {
            let mx = kind.idxs.iter().map(|&b| w[b]).fold(f64::NEG_INFINITY, f64::max);
            let mn = kind.idxs.iter().map(|&b| w[b]).fold(f64::INFINITY, f64::min);
            mx - mn
        } else {
            let mut v: Vec<f64> = kind.idxs.iter().map(|&b| w[b]).collect();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v[kind.ell.unwrap() - 1]
        }
    }

    /// Ranks of one key given its seeds (one per axis).
    fn ranks_of(&self, key: usize, seeds: &[f64], out: &mut [f64]) {
        match self.mode {
            CoordMode::SharedSeed => {
                for b in 0..self.m {
                    out[b] = rank_value(self.family, self.weights[key][b], seeds[0]);
                }
            }
            CoordMode::Independent => {
                for b in 0..self.m {
                    out[b] = rank_value(self.family, self.weights[key][b], seeds[b]);
                }
            }
            CoordMode::IndependentDifferences => {
                let mut running = f64::INFINITY;
                for (j, &pos) in self.id_order[key].iter().enumerate() {
                    let d = rank_value(RankFamily::Exp, self.id_delta[key][j], seeds[j]);
                    running = running.min(d);
                    out[pos] = if self.weights[key][pos] > 0.0 {
                        running
                    } else {
                        f64::INFINITY
                    };
                }
            }
        }
    }
}

#[inline]
fn rank_value(family: RankFamily, w: f64, u: f64) -> f64 {
    if w <= 0.0 {
        return f64::INFINITY;
    }
    match family {
        RankFamily::Exp => -(-u).ln_1p() / w,
        RankFamily::Ipps => u / w,
    }
}

#[inline]
fn incl_prob(family: RankFamily, w: f64, x: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    match family {
        RankFamily::Exp => -(-w * x).exp_m1(),
        RankFamily::Ipps => (w * x).min(1.0),
    }
}

/// k-th smallest (1-based) of the finite values in `vals`; +∞ when fewer
/// than k finite entries exist.
fn kth_smallest(vals: &mut [f64], k: usize) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.iter().filter(|v| v.is_finite()).nth(k - 1).copied().unwrap_or(f64::INFINITY)
}

/// Evaluate every estimator for the target key given its ranks and seeds
/// and the conditioning quantities of the subspace. Writes a(t) per slot.
#[allow(clippy::too_many_arguments)]
fn eval_target(
    inst: &Instance,
    slots: &[EstSlot],
    t: usize,
    r_t: &[f64],
    seeds_t: &[f64],
    thresholds: &[f64],       // T_b = r^(b)_k(others), per assignment
    minrank_kth: &[f64],      // per kind: k-th smallest of others' min-ranks over R
    out: &mut [f64],
) {
    let w_t = &inst.weights[t];
    let fam = inst.family;
    for (slot_i, slot) in slots.iter().enumerate() {
        let a = match slot.est {
            Est::Rc(b) => {
                if r_t[b] < thresholds[b] {
                    w_t[b] / incl_prob(fam, w_t[b], thresholds[b])
                } else {
                    0.0
                }
            }
            Est::Ht(b) => {
                if r_t[b] < inst.taus[b] {
                    w_t[b] / incl_prob(fam, w_t[b], inst.taus[b])
                } else {
                    0.0
                }
            }
            Est::Inclusive => {
                let kind = &inst.kinds[slot.kind];
                let sampled = (0..inst.m).any(|b| r_t[b] < thresholds[b]);
                if !sampled {
                    0.0
                } else {
                    let p = match inst.mode {
                        CoordMode::Independent => {
                            let mut miss = 1.0;
                            for b in 0..inst.m {
                                miss *= 1.0 - incl_prob(fam, w_t[b], thresholds[b]);
                            }
                            1.0 - miss
                        }
                        CoordMode::SharedSeed => (0..inst.m)
                            .map(|b| incl_prob(fam, w_t[b], thresholds[b]))
                            .fold(0.0, f64::max),
                        CoordMode::IndependentDifferences => {
                            // Suffix maxima of thresholds in ascending-weight
                            // order; disjoint first-increment-to-fire events.
                            let order = &inst.id_order[t];
                            let h = order.len();
                            let mut suffix = vec![0.0; h];
                            let mut run = f64::NEG_INFINITY;
                            for j in (0..h).rev() {
                                run = run.max(thresholds[order[j]]);
                                suffix[j] = run;
                            }
                            let mut p = 0.0;
                            let mut none = 1.0;
                            let mut prev = 0.0;
                            for j in 0..h {
                                let delta = inst.weights[t][order[j]] - prev;
                                prev = inst.weights[t][order[j]];
                                let fire = incl_prob(RankFamily::Exp, delta, suffix[j]);
                                p += none * fire;
                                none *= 1.0 - fire;
                            }
                            p
                        }
                    };
                    inst.f_true(kind, t) / p
                }
            }
            Est::Generic => {
                let kind = &inst.kinds[slot.kind];
                let t_min = kind.idxs.iter().map(|&b| thresholds[b]).fold(f64::INFINITY, f64::min);
                let min_rank = kind.idxs.iter().map(|&b| r_t[b]).fold(f64::INFINITY, f64::min);
                if min_rank < t_min {
                    let w_max = kind.idxs.iter().map(|&b| w_t[b]).fold(0.0f64, f64::max);
                    inst.f_true(kind, t) / incl_prob(fam, w_max, t_min)
                } else {
                    0.0
                }
            }
            Est::TMax => {
                let kind = &inst.kinds[slot.kind];
                let min_rank = kind.idxs.iter().map(|&b| r_t[b]).fold(f64::INFINITY, f64::min);
                let thr = minrank_kth[slot.kind];
                if min_rank < thr {
                    let w_max = kind.idxs.iter().map(|&b| w_t[b]).fold(0.0f64, f64::max);
                    w_max / incl_prob(fam, w_max, thr)
                } else {
                    0.0
                }
            }
            Est::SSet => {
                let kind = &inst.kinds[slot.kind];
                let ell = kind.ell.unwrap();
                let t_min = kind.idxs.iter().map(|&b| thresholds[b]).fold(f64::INFINITY, f64::min);
                let visible: Vec<usize> = kind
                    .idxs
                    .iter()
                    .copied()
                    .filter(|&b| r_t[b] < t_min)
                    .collect();
                if visible.len() < ell {
                    0.0
                } else {
                    let mut ws: Vec<f64> = visible.iter().map(|&b| w_t[b]).collect();
                    ws.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    let w_lth = ws[ell - 1];
                    let p = if inst.mode == CoordMode::Independent {
                        visible
                            .iter()
                            .map(|&b| incl_prob(fam, w_t[b], t_min))
                            .product()
                    } else {
                        incl_prob(fam, w_lth, t_min)
                    };
                    let f = if ell == 1 { ws[0] } else { w_lth };
                    f / p
                }
            }
            Est::LSet => {
                let kind = &inst.kinds[slot.kind];
                let ell = kind.ell.unwrap();
                lset_value(inst, kind, ell, t, r_t, seeds_t, thresholds)
            }
            Est::L1S | Est::L1L => {
                let kind = &inst.kinds[slot.kind];
                // max via the s-set with ℓ = 1.
                let t_min = kind.idxs.iter().map(|&b| thresholds[b]).fold(f64::INFINITY, f64::min);
                let any = kind.idxs.iter().any(|&b| r_t[b] < t_min);
                let a_max = if any {
                    let w_max = kind.idxs.iter().map(|&b| w_t[b]).fold(0.0f64, f64::max);
                    w_max / incl_prob(fam, w_max, t_min)
                } else {
                    0.0
                };
                let a_min = if slot.est == Est::L1S {
                    let all = kind.idxs.iter().all(|&b| r_t[b] < t_min);
                    if all {
                        let w_min = kind.idxs.iter().map(|&b| w_t[b]).fold(f64::INFINITY, f64::min);
                        w_min / incl_prob(fam, w_min, t_min)
                    } else {
                        0.0
                    }
                } else {
                    lset_value(inst, kind, kind.idxs.len(), t, r_t, seeds_t, thresholds)
                };
                (a_max - a_min).max(0.0)
            }
        };
        out[slot_i] = a;
    }
}

/// l-set adjusted min/ℓ-th value for the target key; 0 if not applicable.
fn lset_value(
    inst: &Instance,
    kind: &ResolvedKind,
    ell: usize,
    t: usize,
    r_t: &[f64],
    seeds_t: &[f64],
    thresholds: &[f64],
) -> f64 {
    let fam = inst.family;
    let w_t = &inst.weights[t];
    let members: Vec<usize> = kind
        .idxs
        .iter()
        .copied()
        .filter(|&b| r_t[b] < thresholds[b])
        .collect();
    if members.len() < ell {
        return 0.0;
    }
    let mut sorted: Vec<usize> = members.clone();
    sorted.sort_by(|&a, &b| w_t[b].partial_cmp(&w_t[a]).unwrap().then(a.cmp(&b)));
    let top = &sorted[..ell];
    let w_lth = w_t[top[ell - 1]];
    let seed_of = |b: usize| -> f64 {
        match inst.mode {
            CoordMode::SharedSeed => seeds_t[0],
            _ => seeds_t[b],
        }
    };
    for &b in &kind.idxs {
        if top.contains(&b) {
            continue;
        }
        if !(seed_of(b) < incl_prob(fam, w_lth, thresholds[b])) {
            return 0.0;
        }
    }
    let p = if inst.mode == CoordMode::Independent {
        let mut p = 1.0;
        for &b in &kind.idxs {
            let w = if top.contains(&b) { w_t[b] } else { w_lth };
            p *= incl_prob(fam, w, thresholds[b]);
        }
        p
    } else {
        let mut p = 1.0f64;
        for &b in &kind.idxs {
            let w = if top.contains(&b) { w_t[b] } else { w_lth };
            p = p.min(incl_prob(fam, w, thresholds[b]));
        }
        p
    };
    let f = w_t[top[if ell == 1 { 0 } else { ell - 1 }]];
    f / p
}

fn resolve_kinds(ds: &ColocatedDataset, kinds: &[AggKind]) -> Result<Vec<ResolvedKind>> {
    kinds
        .iter()
        .map(|kind| {
            let resolved = kind.resolve(ds.assignments())?;
            Ok(ResolvedKind {
                label: kind.to_string(),
                idxs: resolved.idxs,
                ell: kind.top_ell(),
                is_l1: matches!(kind, AggKind::L1(_)),
            })
        })
        .collect()
}

fn estimator_slots(inst: &Instance) -> Vec<EstSlot> {
    let mut slots = Vec::new();
    for b in 0..inst.m {
        slots.push(EstSlot {
            est: Est::Rc(b),
            name: "rc",
            kind: b,
        });
        slots.push(EstSlot {
            est: Est::Ht(b),
            name: "ht",
            kind: b,
        });
    }
    for (i, kind) in inst.kinds.iter().enumerate() {
        slots.push(EstSlot {
            est: Est::Inclusive,
            name: "inclusive",
            kind: i,
        });
        if inst.mode.is_consistent() {
            slots.push(EstSlot {
                est: Est::Generic,
                name: "generic",
                kind: i,
            });
        }
        if kind.is_l1 {
            if inst.mode.is_consistent() {
                slots.push(EstSlot {
                    est: Est::L1S,
                    name: "l1-sset",
                    kind: i,
                });
                if inst.mode == CoordMode::SharedSeed {
                    slots.push(EstSlot {
                        est: Est::L1L,
                        name: "l1-lset",
                        kind: i,
                    });
                }
            }
            continue;
        }
        let ell = kind.ell.unwrap();
        if inst.mode.is_consistent() || ell == kind.idxs.len() {
            slots.push(EstSlot {
                est: Est::SSet,
                name: "sset",
                kind: i,
            });
        }
        if inst.mode != CoordMode::IndependentDifferences {
            slots.push(EstSlot {
                est: Est::LSet,
                name: "lset",
                kind: i,
            });
        }
        if inst.mode.is_consistent() && ell == 1 {
            slots.push(EstSlot {
                est: Est::TMax,
                name: "tmax",
                kind: i,
            });
        }
    }
    slots
}

/// Mixed-radix counter over `dims` axes with `radix` points per axis.
struct Counter {
    digits: Vec<usize>,
    radix: usize,
    done: bool,
}

impl Counter {
    fn new(dims: usize, radix: usize) -> Self {
        Counter {
            digits: vec![0; dims],
            radix,
            done: false,
        }
    }

    fn advance(&mut self) {
        for d in self.digits.iter_mut() {
            *d += 1;
            if *d < self.radix {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}

/// Run the exact oracle: per-key expectation and variance of every
/// applicable estimator, plus the maximum per-subspace bias.
pub fn grid_oracle(
    ds: &ColocatedDataset,
    k: usize,
    family: RankFamily,
    mode: CoordMode,
    kinds: &[AggKind],
    grid: usize,
    budget: Option<u64>,
) -> Result<OracleOutcome> {
    let n = ds.len();
    let m = ds.assignments().len();
    if n > MAX_KEYS || m > MAX_ASSIGNMENTS {
        return Err(Error::config(format!(
            "oracle instance too large: {n} keys × {m} assignments (max {MAX_KEYS} × {MAX_ASSIGNMENTS})"
        )));
    }
    if grid < 64 {
        return Err(Error::config("oracle grid must be ≥ 64"));
    }
    if k == 0 {
        return Err(Error::config("oracle needs k ≥ 1"));
    }
    let spec = RankSpec::new(family, mode, 0).map_err(Error::from)?;
    let budget = budget.unwrap_or(DEFAULT_BUDGET);
    let keys: Vec<KeyId> = ds.rows().map(|(k, _)| k.clone()).collect();
    let weights: Vec<Vec<f64>> = ds.rows().map(|(_, wv)| wv.to_vec()).collect();
    let id_order: Vec<Vec<usize>> = weights
        .iter()
        .map(|wv| {
            let mut o: Vec<usize> = (0..wv.len()).collect();
            o.sort_by(|&a, &b| wv[a].partial_cmp(&wv[b]).unwrap().then(a.cmp(&b)));
            o
        })
        .collect();
    let id_delta: Vec<Vec<f64>> = weights
        .iter()
        .zip(&id_order)
        .map(|(wv, order)| {
            let mut prev = 0.0;
            order
                .iter()
                .map(|&pos| {
                    let d = wv[pos] - prev;
                    prev = wv[pos];
                    d
                })
                .collect()
        })
        .collect();
    let taus = poisson_taus_for_expected_size(ds, k, &spec).map_err(Error::from)?;
    let inst = Instance {
        keys,
        weights,
        m,
        k,
        family,
        mode,
        kinds: resolve_kinds(ds, kinds)?,
        taus,
        id_order,
        id_delta,
    };
    let s = inst.seeds_per_key();
    // The per-subspace integral enumerates the target's event-boundary
    // cells exactly; the cut count per axis is (weights × constants).
    let weights_per_axis: u64 = if mode == CoordMode::IndependentDifferences {
        1
    } else {
        m as u64
    };
    let constants = 2 * m as u64 + 2 * inst.kinds.len() as u64;
    let cells_estimate: u64 = (weights_per_axis * constants + 1).pow(s as u32);
    let d_out = (n - 1) * s;
    let outer_radix = if d_out == 0 {
        1
    } else {
        let per_target = (budget / (n as u64 * cells_estimate)).max(1);
        let r = (per_target as f64).powf(1.0 / d_out as f64).floor() as usize;
        r.clamp(2, grid)
    };
    if (outer_radix as u64).pow(d_out as u32) * cells_estimate * n as u64 > budget.saturating_mul(8) {
        return Err(Error::config(format!(
            "oracle instance too large for the {budget}-point budget"
        )));
    }
    let slots = estimator_slots(&inst);

    let mut rows: Vec<OracleRow> = Vec::new();
    // Parallel over target keys; per-target accumulators are independent
    // and collected in index order, so results are deterministic.
    let accs: Vec<Vec<Acc>> = (0..n)
        .into_par_iter()
        .map(|t| oracle_for_target(&inst, &slots, t, grid, outer_radix))
        .collect();

    for t in 0..n {
        let env = &accs[t][slots.len()];
        rows.push(OracleRow {
            estimator: "rc-envelope".to_string(),
            spec: "-".to_string(),
            mode: mode_to_str(mode).to_string(),
            family: family_to_str(family).to_string(),
            k,
            key: inst.keys[t].as_str().to_string(),
            f: 0.0,
            expectation: 0.0,
            variance: env.sum_inner_var / env.subspaces as f64,
            max_subspace_bias: 0.0,
        });
        for (slot_i, slot) in slots.iter().enumerate() {
            let acc = &accs[t][slot_i];
            let n_sub = acc.subspaces as f64;
            let mean = acc.sum_mean / n_sub;
            let between = (acc.sum_mean_sq / n_sub - mean * mean).max(0.0);
            let within = acc.sum_inner_var / n_sub;
            let f = match slot.est {
                Est::Rc(b) | Est::Ht(b) => inst.weights[t][b],
                Est::TMax => {
                    let kind = &inst.kinds[slot.kind];
                    kind.idxs.iter().map(|&b| inst.weights[t][b]).fold(0.0f64, f64::max)
                }
                _ => inst.f_true(&inst.kinds[slot.kind], t),
            };
            rows.push(OracleRow {
                estimator: slot.name.to_string(),
                spec: match slot.est {
                    Est::Rc(b) | Est::Ht(b) => format!("single:{}", ds.assignments()[b]),
                    _ => inst.kinds[slot.kind].label.clone(),
                },
                mode: mode_to_str(mode).to_string(),
                family: family_to_str(family).to_string(),
                k,
                key: inst.keys[t].as_str().to_string(),
                f,
                expectation: mean,
                variance: within + between,
                max_subspace_bias: acc.max_bias,
            });
        }
    }
    Ok(OracleOutcome { grid, rows })
}

/// Per-axis cut points of the target's seed space for one subspace: every
/// estimator decision compares some rank of the target (or a raw seed)
/// against a subspace constant, and each such comparison is equivalent to
/// `u_axis < F_w(C)` for finitely many (w, C) pairs. Between consecutive
/// cuts every estimator output is constant, so integrating over the cell
/// decomposition is exact.
fn axis_cuts(inst: &Instance, t: usize, constants: &[f64]) -> Vec<Vec<f64>> {
    let s = inst.seeds_per_key();
    let mut axes = Vec::with_capacity(s);
    for d in 0..s {
        // Weights whose inverse-CDF on this axis any comparison can involve:
        // every weight of the target for shared/independent axes (the l-set
        // certification compares foreign weights against this axis' seed),
        // the chain increment for independent-differences axes.
        let weight_params: Vec<f64> = match inst.mode {
            CoordMode::IndependentDifferences => vec![inst.id_delta[t][d]],
            _ => inst.weights[t].clone(),
        };
        let mut cuts: Vec<f64> = Vec::new();
        for &w in &weight_params {
            for &c in constants {
                let p = incl_prob(
                    if inst.mode == CoordMode::IndependentDifferences {
                        RankFamily::Exp
                    } else {
                        inst.family
                    },
                    w,
                    c,
                );
                if p > 0.0 && p < 1.0 {
                    cuts.push(p);
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        axes.push(cuts);
    }
    axes
}

fn oracle_for_target(
    inst: &Instance,
    slots: &[EstSlot],
    t: usize,
    grid: usize,
    outer_radix: usize,
) -> Vec<Acc> {
    let n = inst.keys.len();
    let s = inst.seeds_per_key();
    // One extra accumulator holds the per-subspace envelope
    // max_b Var_sub[rc^(b)].
    let mut accs = vec![Acc::default(); slots.len() + 1];
    let others: Vec<usize> = (0..n).filter(|&i| i != t).collect();
    let d_out = others.len() * s;
    let _ = grid;

    // Midpoint seed values for the conditioning subspaces.
    let outer_u: Vec<f64> = (0..outer_radix).map(|g| (g as f64 + 0.5) / outer_radix as f64).collect();

    let mut outer = Counter::new(d_out, outer_radix);
    let mut other_ranks: Vec<Vec<f64>> = vec![vec![0.0; inst.m]; others.len()];
    let mut seeds_buf = vec![0.0; s];
    let mut ranks_buf = vec![0.0; inst.m];
    let mut a_buf = vec![0.0; slots.len()];
    let mut sum = vec![0.0f64; slots.len()];
    let mut sum_sq = vec![0.0f64; slots.len()];
    let mut scratch: Vec<f64> = Vec::with_capacity(n);
    loop {
        // Materialize the subspace: other keys' seeds and ranks.
        for (oi, &key_idx) in others.iter().enumerate() {
            for d in 0..s {
                seeds_buf[d] = outer_u[outer.digits[oi * s + d]];
            }
            inst.ranks_of(key_idx, &seeds_buf, &mut other_ranks[oi]);
        }
        // Conditioning thresholds per assignment: k-th smallest other rank.
        let mut thresholds = vec![f64::INFINITY; inst.m];
        for b in 0..inst.m {
            scratch.clear();
            scratch.extend(other_ranks.iter().map(|r| r[b]));
            thresholds[b] = kth_smallest(&mut scratch, inst.k);
        }
        // Per kind: k-th smallest of the others' min-ranks over R, and the
        // joint minimum threshold.
        let minrank_kth: Vec<f64> = inst
            .kinds
            .iter()
            .map(|kind| {
                scratch.clear();
                scratch.extend(other_ranks.iter().map(|r| {
                    kind.idxs.iter().map(|&b| r[b]).fold(f64::INFINITY, f64::min)
                }));
                kth_smallest(&mut scratch, inst.k)
            })
            .collect();
        let mut constants: Vec<f64> = thresholds.clone();
        constants.extend_from_slice(&minrank_kth);
        constants.extend(inst.kinds.iter().map(|kind| {
            kind.idxs.iter().map(|&b| thresholds[b]).fold(f64::INFINITY, f64::min)
        }));
        constants.extend_from_slice(&inst.taus);

        // Exact integration over the target's seed cells.
        let axes = axis_cuts(inst, t, &constants);
        let segments: Vec<Vec<(f64, f64)>> = axes
            .iter()
            .map(|cuts| {
                let mut segs = Vec::with_capacity(cuts.len() + 1);
                let mut lo = 0.0;
                for &c in cuts {
                    segs.push((0.5 * (lo + c), c - lo));
                    lo = c;
                }
                segs.push((0.5 * (lo + 1.0), 1.0 - lo));
                segs
            })
            .collect();
        sum.fill(0.0);
        sum_sq.fill(0.0);
        let mut cell = vec![0usize; s];
        'cells: loop {
            let mut measure = 1.0;
            for d in 0..s {
                let (mid, len) = segments[d][cell[d]];
                seeds_buf[d] = mid;
                measure *= len;
            }
            if measure > 0.0 {
                inst.ranks_of(t, &seeds_buf, &mut ranks_buf);
                eval_target(
                    inst,
                    slots,
                    t,
                    &ranks_buf,
                    &seeds_buf,
                    &thresholds,
                    &minrank_kth,
                    &mut a_buf,
                );
                for (i, &a) in a_buf.iter().enumerate() {
                    sum[i] += a * measure;
                    sum_sq[i] += a * a * measure;
                }
            }
            for d in 0..s {
                cell[d] += 1;
                if cell[d] < segments[d].len() {
                    continue 'cells;
                }
                cell[d] = 0;
            }
            break;
        }
        let mut rc_envelope = 0.0f64;
        for (slot_i, slot) in slots.iter().enumerate() {
            let mean = sum[slot_i];
            let var = (sum_sq[slot_i] - mean * mean).max(0.0);
            if matches!(slot.est, Est::Rc(_)) {
                rc_envelope = rc_envelope.max(var);
            }
            let acc = &mut accs[slot_i];
            acc.subspaces += 1;
            acc.sum_mean += mean;
            acc.sum_mean_sq += mean * mean;
            acc.sum_inner_var += var;
            let f = match slot.est {
                Est::Rc(b) | Est::Ht(b) => inst.weights[t][b],
                Est::TMax => {
                    let kind = &inst.kinds[slot.kind];
                    kind.idxs.iter().map(|&b| inst.weights[t][b]).fold(0.0f64, f64::max)
                }
                _ => inst.f_true(&inst.kinds[slot.kind], t),
            };
            acc.max_bias = acc.max_bias.max((mean - f).abs());
        }
        // Envelope for the dispersed-min variance bound: the lemma is
        // proven per conditioning subspace, so its global form compares
        // against E[max_b Var_sub[t^(b)]], not max_b E[Var_sub[t^(b)]].
        let env = accs.last_mut().unwrap();
        env.subspaces += 1;
        env.sum_inner_var += rc_envelope;
        outer.advance();
        if outer.done {
            break;
        }
    }
    accs
}

/// Compare the lean oracle arithmetic against the production pipeline on
/// hash-derived seeds: every estimator, every key, `samples` different
/// salts, with 1e-9 relative agreement required.
pub fn cross_check(
    ds: &ColocatedDataset,
    k: usize,
    family: RankFamily,
    mode: CoordMode,
    kinds: &[AggKind],
    samples: u64,
) -> Result<()> {
    let inst_kinds = resolve_kinds(ds, kinds)?;
    let n = ds.len();
    let m = ds.assignments().len();
    let keys: Vec<KeyId> = ds.rows().map(|(key, _)| key.clone()).collect();
    let weights: Vec<Vec<f64>> = ds.rows().map(|(_, wv)| wv.to_vec()).collect();
    let id_order: Vec<Vec<usize>> = weights
        .iter()
        .map(|wv| {
            let mut o: Vec<usize> = (0..wv.len()).collect();
            o.sort_by(|&a, &b| wv[a].partial_cmp(&wv[b]).unwrap().then(a.cmp(&b)));
            o
        })
        .collect();
    let id_delta: Vec<Vec<f64>> = weights
        .iter()
        .zip(&id_order)
        .map(|(wv, order)| {
            let mut prev = 0.0;
            order
                .iter()
                .map(|&pos| {
                    let d = wv[pos] - prev;
                    prev = wv[pos];
                    d
                })
                .collect()
        })
        .collect();
    let spec0 = RankSpec::new(family, mode, 0).map_err(Error::from)?;
    let taus = poisson_taus_for_expected_size(ds, k, &spec0).map_err(Error::from)?;
    let inst = Instance {
        keys: keys.clone(),
        weights: weights.clone(),
        m,
        k,
        family,
        mode,
        kinds: inst_kinds,
        taus: taus.clone(),
        id_order,
        id_delta,
    };
    let slots = estimator_slots(&inst);
    let source = SeedSource::Hashed;
    let disp = ds.to_dispersed();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);

    for sample in 0..samples {
        let spec = RankSpec::new(family, mode, 0x0c0ffee ^ sample).map_err(Error::from)?;
        // Hash-derived seed matrix, exactly as the production builders
        // consume it.
        let s = inst.seeds_per_key();
        let mut seeds: Vec<Vec<f64>> = vec![vec![0.0; s]; n];
        for (i, key) in keys.iter().enumerate() {
            for d in 0..s {
                let channel = match mode {
                    CoordMode::SharedSeed => SeedChannel::Shared,
                    CoordMode::Independent => SeedChannel::Assignment(&ds.assignments()[d]),
                    CoordMode::IndependentDifferences => SeedChannel::Difference(d),
                };
                seeds[i][d] = source.unit(spec.salt, key, channel).map_err(Error::from)?;
            }
        }
        // Lean side: full rank matrix, thresholds, per-key evaluation.
        let mut ranks = vec![vec![0.0; m]; n];
        for i in 0..n {
            let mut buf = vec![0.0; m];
            inst.ranks_of(i, &seeds[i], &mut buf);
            ranks[i] = buf;
        }
        // Production side.
        let colocated = build_colocated_summary(ds, k, &spec, &source).map_err(Error::from)?;
        let poisson = build_colocated_poisson(ds, &taus, &spec, &source).map_err(Error::from)?;
        let dispersed = if mode == CoordMode::IndependentDifferences {
            None
        } else {
            Some(build_dispersed_summary(&disp, k, &spec, &source).map_err(Error::from)?)
        };
        let mut prod_values: Vec<Vec<f64>> = vec![Vec::new(); slots.len()];
        for (slot_i, slot) in slots.iter().enumerate() {
            let aw = match slot.est {
                Est::Rc(b) => prod::rc_single(&colocated, &ds.assignments()[b]).map_err(Error::from)?,
                Est::Ht(b) => prod::ht_single(&poisson, &ds.assignments()[b]).map_err(Error::from)?,
                Est::Inclusive => {
                    prod::colocated_inclusive(&colocated, &kinds[slot.kind]).map_err(Error::from)?
                }
                Est::Generic => prod::colocated_generic_consistent(&colocated, &kinds[slot.kind])
                    .map_err(Error::from)?,
                Est::TMax => {
                    let r_ids: Vec<&str> = kinds[slot.kind].assignment_ids();
                    let ums = union_max_sketch(&colocated, &r_ids).map_err(Error::from)?;
                    prod::rc_bottom_k(&ums, family).map_err(Error::from)?
                }
                Est::SSet => {
                    let summary = dispersed.as_ref().unwrap_or(&colocated);
                    prod::dispersed_sset(summary, &kinds[slot.kind]).map_err(Error::from)?
                }
                Est::LSet => prod::dispersed_lset(dispersed.as_ref().unwrap(), &kinds[slot.kind])
                    .map_err(Error::from)?,
                Est::L1S | Est::L1L => {
                    let AggKind::L1(r) = &kinds[slot.kind] else { unreachable!() };
                    let variant = if slot.est == Est::L1S {
                        prod::L1Variant::SSet
                    } else {
                        prod::L1Variant::LSet
                    };
                    let summary = match slot.est {
                        Est::L1S => dispersed.as_ref().unwrap_or(&colocated),
                        _ => dispersed.as_ref().unwrap(),
                    };
                    prod::dispersed_l1(summary, r, variant).map_err(Error::from)?
                }
            };
            prod_values[slot_i] = keys.iter().map(|key| aw.value(key)).collect();
        }
        // Compare per target.
        let mut a_buf = vec![0.0; slots.len()];
        for t in 0..n {
            let mut thresholds = vec![f64::INFINITY; m];
            let mut scratch = Vec::with_capacity(n);
            for b in 0..m {
                scratch.clear();
                scratch.extend((0..n).filter(|&i| i != t).map(|i| ranks[i][b]));
                thresholds[b] = kth_smallest(&mut scratch, k);
            }
            let minrank_kth: Vec<f64> = inst
                .kinds
                .iter()
                .map(|kind| {
                    scratch.clear();
                    scratch.extend((0..n).filter(|&i| i != t).map(|i| {
                        kind.idxs.iter().map(|&b| ranks[i][b]).fold(f64::INFINITY, f64::min)
                    }));
                    kth_smallest(&mut scratch, k)
                })
                .collect();
            eval_target(
                &inst,
                &slots,
                t,
                &ranks[t],
                &seeds[t],
                &thresholds,
                &minrank_kth,
                &mut a_buf,
            );
            for (slot_i, slot) in slots.iter().enumerate() {
                let lean = a_buf[slot_i];
                let production = prod_values[slot_i][t];
                if !close(lean, production) {
                    return Err(Error::config(format!(
                        "oracle/production mismatch: {} {} key {} sample {sample}: lean {lean} vs production {production}",
                        slot.name, inst.kinds.get(slot.kind).map(|q| q.label.as_str()).unwrap_or("-"),
                        keys[t]
                    )));
                }
            }
        }
    }
    Ok(())
}
