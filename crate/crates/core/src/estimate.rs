//! Adjusted-weight estimators over sketches and summaries.
//!
//! Every estimator assigns each sampled key i a nonnegative adjusted weight
//! a(i) = f(i)/p(i), where p(i) is the conditional probability, given the
//! ranks of all other keys, that the summary lands in the estimator's
//! applicable set. Keys outside the applicable set get an implicit a(i) = 0,
//! and Σ a(i) over any selected subpopulation is an unbiased estimate of
//! Σ f(i) over that subpopulation.
//!
//! Colocated summaries support the *inclusive* estimator (applicable set =
//! the whole union) for every aggregate and coordination mode, plus a
//! generic consistent-ranks baseline. Dispersed summaries support the s-set
//! and l-set estimators for top-ℓ-dependent aggregates and a max/min
//! difference estimator for the L1 range.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hash::Hash64;
use crate::model::{AggKind, Attrs, ColocatedDataset, KeyId, Predicate};
use crate::rank::{ascending_weight_order, cdf, CoordMode, RankFamily, RankSpec};
use crate::sketch::{kmins_build, BottomKSketch, DataModel, PoissonSketch, SeedKind, Summary};

/// Adjusted weights for one aggregate: key → a(i) > 0 (absent keys are 0),
/// with the per-key conditional inclusion probabilities kept alongside for
/// variance analysis and cross-estimator dominance checks.
#[derive(Debug, Clone)]
pub struct AdjustedWeights {
    pub estimator: &'static str,
    pub kind: AggKind,
    values: BTreeMap<KeyId, f64>,
    probs: BTreeMap<KeyId, f64>,
    pub fingerprint: u64,
}

impl AdjustedWeights {
    fn new(estimator: &'static str, kind: AggKind, fingerprint: u64) -> Self {
        AdjustedWeights {
            estimator,
            kind,
            values: BTreeMap::new(),
            probs: BTreeMap::new(),
            fingerprint,
        }
    }

    /// Record an applicable key: p must be strictly positive, and f/p is
    /// stored only when f > 0.
    fn include(&mut self, key: &KeyId, f: f64, p: f64) -> Result<()> {
        if !(p > 0.0) || !(p <= 1.0 + 1e-12) {
            return Err(Error::Internal(format!(
                "inclusion probability {p} out of (0,1] for key {key} ({})",
                self.estimator
            )));
        }
        self.probs.insert(key.clone(), p);
        if f > 0.0 {
            self.values.insert(key.clone(), f / p);
        }
        Ok(())
    }

    fn set(&mut self, key: &KeyId, a: f64, p: f64) {
        self.probs.insert(key.clone(), p);
        if a != 0.0 {
            self.values.insert(key.clone(), a);
        }
    }

    /// a(i); zero for keys outside the applicable set.
    pub fn value(&self, key: &KeyId) -> f64 {
        self.values.get(key).copied().unwrap_or(0.0)
    }

    /// Conditional inclusion probability for keys in the applicable set.
    pub fn prob(&self, key: &KeyId) -> Option<f64> {
        self.probs.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&KeyId, f64)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }

    pub fn positive_count(&self) -> usize {
        self.values.len()
    }

    /// Σ a(i) over all sampled keys.
    pub fn total(&self) -> f64 {
        self.values.values().sum()
    }
}

fn summary_fingerprint(summary: &Summary) -> u64 {
    let mut h = Hash64::new()
        .write_u64(summary.rank_spec.salt)
        .write(&[summary.rank_spec.family as u8, summary.rank_spec.mode as u8])
        .write(&[matches!(summary.model, DataModel::Dispersed) as u8]);
    for a in &summary.assignments {
        h = h.write(a.id.as_bytes()).write(&[0xff]).write_u64(a.k as u64);
    }
    h.finish()
}

/// r^(b)_k(I∖{i}), reconstructed from the stored thresholds: the (k+1)-st
/// smallest rank when i is in b's sketch, the k-th otherwise. Poisson
/// sketches condition on their fixed τ either way.
pub fn threshold_excluding(summary: &Summary, assignment: &str, key: &KeyId) -> Result<f64> {
    let b = summary.assignment_index(assignment)?;
    let e = summary
        .union
        .get(key)
        .ok_or_else(|| Error::Lookup(format!("key {key} is not in the summary union")))?;
    Ok(threshold_excluding_idx(summary, b, e))
}

#[inline]
fn threshold_excluding_idx(summary: &Summary, b: usize, e: &crate::sketch::UnionEntry) -> f64 {
    if e.in_sketch[b] {
        summary.assignments[b].threshold_next
    } else {
        summary.assignments[b].threshold_k
    }
}

/// Horvitz-Thompson adjusted weights for a Poisson sketch:
/// a(i) = w(i)/F_{w(i)}(τ).
pub fn ht_poisson(sketch: &PoissonSketch, family: RankFamily) -> Result<AdjustedWeights> {
    let mut aw = AdjustedWeights::new("ht", AggKind::Single(String::from("-")), 0);
    for e in &sketch.entries {
        let p = cdf(family, e.weight, sketch.tau)?;
        aw.include(&e.key, e.weight, p)?;
    }
    Ok(aw)
}

/// Rank-conditioning adjusted weights for a bottom-k sketch:
/// a(i) = w(i)/F_{w(i)}(r_{k+1}). An exhausted threshold (+∞ sentinel)
/// makes inclusion certain, so a(i) = w(i).
pub fn rc_bottom_k(sketch: &BottomKSketch, family: RankFamily) -> Result<AdjustedWeights> {
    let mut aw = AdjustedWeights::new("rc", AggKind::Single(String::from("-")), 0);
    for e in &sketch.entries {
        let p = cdf(family, e.weight, sketch.threshold_next)?;
        aw.include(&e.key, e.weight, p)?;
    }
    Ok(aw)
}

/// Plain single-assignment RC estimator over one embedded sketch of a
/// summary.
pub fn rc_single(summary: &Summary, assignment: &str) -> Result<AdjustedWeights> {
    let sketch = summary.sketch_of(assignment)?;
    let mut aw = rc_bottom_k(&sketch, summary.rank_spec.family)?;
    aw.kind = AggKind::Single(String::from(assignment));
    aw.fingerprint = summary_fingerprint(summary);
    Ok(aw)
}

/// Single-assignment HT estimator over one embedded Poisson sketch.
pub fn ht_single(summary: &Summary, assignment: &str) -> Result<AdjustedWeights> {
    let b = summary.assignment_index(assignment)?;
    if summary.assignments[b].tau.is_none() {
        return Err(Error::Unsupported(
            "the HT estimator needs a Poisson summary; use rc for bottom-k sketches".into(),
        ));
    }
    let mut aw = rc_single(summary, assignment)?;
    aw.estimator = "ht";
    Ok(aw)
}

/// Σ a(i) over union keys matching an attribute predicate.
pub fn subpop_estimate(aw: &AdjustedWeights, summary: &Summary, predicate: &Predicate) -> f64 {
    aw.iter()
        .filter(|(key, _)| {
            let attrs = summary.union.get(key).map(|e| &e.attrs);
            let empty = Attrs::new();
            predicate.matches(key, attrs.unwrap_or(&empty))
        })
        .map(|(_, a)| a)
        .sum()
}

/// Σ a(i) over union keys selected by an arbitrary weight-vector predicate.
/// Colocated summaries only: dispersed summaries cannot evaluate predicates
/// on weights they never observed.
pub fn subpop_estimate_where(
    aw: &AdjustedWeights,
    summary: &Summary,
    filter: impl Fn(&KeyId, &[f64]) -> bool,
) -> Result<f64> {
    if summary.model != DataModel::Colocated {
        return Err(Error::Unsupported(
            "weight-vector predicates require colocated summaries".into(),
        ));
    }
    let mut total = 0.0;
    for (key, a) in aw.iter() {
        let e = &summary.union[key];
        let wv: Vec<f64> = e.weights.iter().map(|w| w.unwrap()).collect();
        if filter(key, &wv) {
            total += a;
        }
    }
    Ok(total)
}

/// Unbiased estimate of Σ h(i) over keys matching the predicate, via
/// Σ a(i)·h(i)/f(i) over sampled keys. Requires h(i) > 0 ⇒ f(i) > 0; the
/// contract is checked on every union key whose f-value is observable.
pub fn h_sum_estimate(
    aw: &AdjustedWeights,
    summary: &Summary,
    predicate: &Predicate,
    h: impl Fn(&KeyId, &Attrs) -> f64,
) -> Result<f64> {
    let resolved = aw.kind.resolve(&summary.assignment_ids())?;
    for (key, e) in &summary.union {
        if e.weights.iter().all(|w| w.is_some()) {
            let wv: Vec<f64> = e.weights.iter().map(|w| w.unwrap()).collect();
            if resolved.value(&wv) == 0.0 && h(key, &e.attrs) > 0.0 {
                return Err(Error::Config(format!(
                    "h({key}) > 0 but its f-value is 0; Σh over such keys is not estimable"
                )));
            }
        }
    }
    let mut total = 0.0;
    for (key, a) in aw.iter() {
        let e = &summary.union[key];
        if !predicate.matches(key, &e.attrs) {
            continue;
        }
        let p = aw.prob(key).ok_or_else(|| {
            Error::Internal(format!("adjusted weight without inclusion probability for {key}"))
        })?;
        let f = a * p;
        total += a * h(key, &e.attrs) / f;
    }
    Ok(total)
}

fn require_consistent(summary: &Summary, what: &str) -> Result<()> {
    if !summary.rank_spec.mode.is_consistent() {
        return Err(Error::Unsupported(format!(
            "{what} requires rank-coordinated (consistent) sketches; no nonnegative unbiased \
             estimator exists over independent sketches"
        )));
    }
    Ok(())
}

/// Inclusive estimator over a colocated summary: every union key is
/// applicable, p(i) is the conditional probability that key i enters at
/// least one embedded sketch, and the same p serves every aggregate f
/// computable from the full weight vector.
pub fn colocated_inclusive(summary: &Summary, kind: &AggKind) -> Result<AdjustedWeights> {
    if summary.model != DataModel::Colocated {
        return Err(Error::Unsupported(
            "the inclusive estimator needs colocated weight vectors; use sset/lset on dispersed summaries"
                .into(),
        ));
    }
    let ids = summary.assignment_ids();
    let resolved = kind.resolve(&ids)?;
    let family = summary.rank_spec.family;
    let mut aw = AdjustedWeights::new("inclusive", kind.clone(), summary_fingerprint(summary));
    for (key, e) in &summary.union {
        let wv: Vec<f64> = e.weights.iter().map(|w| w.unwrap()).collect();
        let p = match summary.rank_spec.mode {
            CoordMode::Independent => {
                let mut miss = 1.0;
                for b in 0..ids.len() {
                    let t = threshold_excluding_idx(summary, b, e);
                    miss *= 1.0 - cdf(family, wv[b], t)?;
                }
                1.0 - miss
            }
            CoordMode::SharedSeed => {
                let mut p = 0.0f64;
                for b in 0..ids.len() {
                    let t = threshold_excluding_idx(summary, b, e);
                    p = p.max(cdf(family, wv[b], t)?);
                }
                p
            }
            CoordMode::IndependentDifferences => {
                independent_differences_union_prob(summary, e, &wv)?
            }
        };
        aw.include(key, resolved.value(&wv), p)?;
    }
    Ok(aw)
}

/// P[∃b: r'^(b)(i) < r^(b)_k(I∖{i})] under independent-differences ranks:
/// with the weight vector sorted ascending and M_j the suffix maximum of the
/// conditioning thresholds in that order, the exponential increments d_j are
/// independent and the union event decomposes into disjoint "first increment
/// to fire" events A_j with telescoping probabilities.
fn independent_differences_union_prob(
    summary: &Summary,
    e: &crate::sketch::UnionEntry,
    weights: &[f64],
) -> Result<f64> {
    let order = ascending_weight_order(weights);
    let h = order.len();
    let mut suffix_max = alloc::vec![0.0f64; h];
    let mut running = f64::NEG_INFINITY;
    for j in (0..h).rev() {
        let t = threshold_excluding_idx(summary, order[j], e);
        running = running.max(t);
        suffix_max[j] = running;
    }
    let mut p = 0.0;
    let mut none_fired = 1.0;
    let mut prev_w = 0.0;
    for j in 0..h {
        let delta = weights[order[j]] - prev_w;
        prev_w = weights[order[j]];
        let fire = cdf(RankFamily::Exp, delta, suffix_max[j])?;
        p += none_fired * fire;
        none_fired *= 1.0 - fire;
    }
    Ok(p)
}

/// Generic consistent-ranks estimator: a key is applicable when its minimum
/// rank over R falls below r^(min R)_k(I∖{i}) = min_b r^(b)_k(I∖{i}), and
/// p = F_{w^(max R)(i)} at that threshold. Works for every consistent rank
/// distribution; the inclusive estimator dominates it.
pub fn colocated_generic_consistent(summary: &Summary, kind: &AggKind) -> Result<AdjustedWeights> {
    if summary.model != DataModel::Colocated {
        return Err(Error::Unsupported(
            "the generic consistent estimator needs colocated weight vectors".into(),
        ));
    }
    require_consistent(summary, "the generic consistent estimator")?;
    let ids = summary.assignment_ids();
    let resolved = kind.resolve(&ids)?;
    let family = summary.rank_spec.family;
    let mut aw = AdjustedWeights::new("generic", kind.clone(), summary_fingerprint(summary));
    for (key, e) in &summary.union {
        let t_min = resolved
            .idxs
            .iter()
            .map(|&b| threshold_excluding_idx(summary, b, e))
            .fold(f64::INFINITY, f64::min);
        let min_rank = resolved
            .idxs
            .iter()
            .filter_map(|&b| e.ranks[b])
            .fold(f64::INFINITY, f64::min);
        if !(min_rank < t_min) {
            continue;
        }
        let wv: Vec<f64> = e.weights.iter().map(|w| w.unwrap()).collect();
        let w_max = resolved.idxs.iter().map(|&b| wv[b]).fold(0.0f64, f64::max);
        let p = cdf(family, w_max, t_min)?;
        aw.include(key, resolved.value(&wv), p)?;
    }
    Ok(aw)
}

struct TopSet {
    /// Assignment positions (into the summary) of the ℓ largest weights.
    top: Vec<usize>,
    /// Weights of the top set, descending.
    top_weights: Vec<f64>,
    /// ℓ-th largest weight.
    w_ellth: f64,
}

/// Top-ℓ selection among the assignments in `present` (positions paired
/// with their known weights), ties broken by assignment position.
fn top_ell_of(present: &[(usize, f64)], ell: usize) -> Option<TopSet> {
    if present.len() < ell {
        return None;
    }
    let mut sorted: Vec<(usize, f64)> = present.to_vec();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let top: Vec<usize> = sorted[..ell].iter().map(|&(b, _)| b).collect();
    let top_weights: Vec<f64> = sorted[..ell].iter().map(|&(_, w)| w).collect();
    let w_ellth = top_weights[ell - 1];
    Some(TopSet {
        top,
        top_weights,
        w_ellth,
    })
}

fn f_from_top(kind: &AggKind, ts: &TopSet) -> f64 {
    match kind {
        AggKind::Single(_) | AggKind::Max(_) => ts.top_weights[0],
        AggKind::Min(_) | AggKind::NthLargest(_, _) => ts.w_ellth,
        AggKind::L1(_) => unreachable!("L1 is estimated as a max/min difference"),
    }
}

/// s-set estimator for top-ℓ-dependent aggregates over a multi-assignment
/// summary (max: ℓ=1, min: ℓ=|R|, ℓ-th largest in between).
///
/// A key is applicable when at least ℓ of its ranks fall below
/// r^(min R)_k(I∖{i}) = min_b r^(b)_k(I∖{i}); consistency then guarantees
/// those assignments carry the key's top-ℓ weights. Independent sketches
/// only admit the min-dependence case (ℓ = |R|).
pub fn dispersed_sset(summary: &Summary, kind: &AggKind) -> Result<AdjustedWeights> {
    let ell = kind
        .top_ell()
        .ok_or_else(|| Error::Config("L1 is estimated via dispersed_l1".into()))?;
    let ids = summary.assignment_ids();
    let resolved = kind.resolve(&ids)?;
    let family = summary.rank_spec.family;
    let independent = !summary.rank_spec.mode.is_consistent();
    if independent && ell != resolved.idxs.len() {
        return Err(Error::Unsupported(format!(
            "no nonnegative unbiased estimator exists for top-{ell}-dependent aggregates over \
             independent sketches with unknown coordination; only min-dependence (ℓ = |R|) is \
             supported there"
        )));
    }
    let mut aw = AdjustedWeights::new("sset", kind.clone(), summary_fingerprint(summary));
    for (key, e) in &summary.union {
        let t_min = resolved
            .idxs
            .iter()
            .map(|&b| threshold_excluding_idx(summary, b, e))
            .fold(f64::INFINITY, f64::min);
        // R'(i): assignments whose rank is known and below the joint
        // conditioning threshold. Unknown ranks are provably above it.
        let present: Vec<(usize, f64)> = resolved
            .idxs
            .iter()
            .filter_map(|&b| match (e.ranks[b], e.weights[b]) {
                (Some(r), Some(w)) if r < t_min => Some((b, w)),
                _ => None,
            })
            .collect();
        let Some(ts) = top_ell_of(&present, ell) else {
            continue;
        };
        let p = if independent {
            let mut p = 1.0;
            for &(_, w) in &present {
                p *= cdf(family, w, t_min)?;
            }
            p
        } else {
            cdf(family, ts.w_ellth, t_min)?
        };
        aw.include(key, f_from_top(kind, &ts), p)?;
    }
    Ok(aw)
}

/// l-set estimator: the most inclusive selection for top-ℓ-dependent
/// aggregates. A key is applicable when ℓ of its assignments are in-sketch
/// and, for every other assignment in R, the key's seed certifies that its
/// unseen weight cannot exceed the ℓ-th largest observed one. Requires known
/// seeds: shared-seed summaries always qualify, independent summaries carry
/// their hash- or table-derived seeds.
pub fn dispersed_lset(summary: &Summary, kind: &AggKind) -> Result<AdjustedWeights> {
    let ell = kind
        .top_ell()
        .ok_or_else(|| Error::Config("L1 is estimated via dispersed_l1".into()))?;
    if summary.rank_spec.mode == CoordMode::IndependentDifferences {
        return Err(Error::Unsupported(
            "closed-form l-set inclusion probabilities exist for shared-seed and known-seed \
             independent sketches; independent-differences summaries support the inclusive \
             estimator only"
                .into(),
        ));
    }
    let ids = summary.assignment_ids();
    let resolved = kind.resolve(&ids)?;
    let family = summary.rank_spec.family;
    let independent = summary.rank_spec.mode == CoordMode::Independent;
    let mut aw = AdjustedWeights::new("lset", kind.clone(), summary_fingerprint(summary));
    'keys: for (key, e) in &summary.union {
        let present: Vec<(usize, f64)> = resolved
            .idxs
            .iter()
            .filter_map(|&b| match (e.in_sketch[b], e.weights[b]) {
                (true, Some(w)) => Some((b, w)),
                _ => None,
            })
            .collect();
        let Some(ts) = top_ell_of(&present, ell) else {
            continue;
        };
        let seeds = e.seeds.as_ref().ok_or_else(|| {
            Error::Internal(format!("summary lacks seeds for key {key}; cannot run lset"))
        })?;
        // Certification: every assignment outside the top set must have a
        // seed low enough that a weight above w_ellth would have been
        // sketched.
        for &b in &resolved.idxs {
            if ts.top.contains(&b) {
                continue;
            }
            let t = threshold_excluding_idx(summary, b, e);
            if !(seeds[b] < cdf(family, ts.w_ellth, t)?) {
                continue 'keys;
            }
        }
        let p = if independent {
            let mut p = 1.0;
            for &b in &resolved.idxs {
                let t = threshold_excluding_idx(summary, b, e);
                let w = if ts.top.contains(&b) {
                    e.weights[b].unwrap()
                } else {
                    ts.w_ellth
                };
                p *= cdf(family, w, t)?;
            }
            p
        } else {
            let mut p = 1.0f64;
            for &b in &resolved.idxs {
                let t = threshold_excluding_idx(summary, b, e);
                let w = if ts.top.contains(&b) {
                    e.weights[b].unwrap()
                } else {
                    ts.w_ellth
                };
                p = p.min(cdf(family, w, t)?);
            }
            p
        };
        aw.include(key, f_from_top(kind, &ts), p)?;
    }
    Ok(aw)
}

/// Which min-dependence estimator backs the L1 difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1Variant {
    SSet,
    LSet,
}

/// L1 (range) estimator: per-key difference of the max-dependence estimator
/// and the chosen min-dependence estimator. Nonnegative on coordinated
/// summaries.
pub fn dispersed_l1(summary: &Summary, r: &[String], variant: L1Variant) -> Result<AdjustedWeights> {
    require_consistent(summary, "the L1 estimator")?;
    let max_kind = AggKind::Max(r.to_vec());
    let min_kind = AggKind::Min(r.to_vec());
    let a_max = dispersed_sset(summary, &max_kind)?;
    let a_min = match variant {
        L1Variant::SSet => dispersed_sset(summary, &min_kind)?,
        L1Variant::LSet => dispersed_lset(summary, &min_kind)?,
    };
    let mut aw = AdjustedWeights::new(
        match variant {
            L1Variant::SSet => "l1-sset",
            L1Variant::LSet => "l1-lset",
        },
        AggKind::L1(r.to_vec()),
        summary_fingerprint(summary),
    );
    for (key, hi) in a_max.iter() {
        let lo = a_min.value(key);
        let mut d = hi - lo;
        if d < 0.0 {
            // The probability-ratio lemma makes a_max ≥ a_min; anything
            // below zero here can only be float cancellation on an
            // exact-equality case.
            if d < -1e-9 * hi.max(1.0) {
                return Err(Error::Internal(format!(
                    "L1 adjusted weight for {key} is negative beyond rounding: {d}"
                )));
            }
            d = 0.0;
        }
        aw.set(key, d, a_max.prob(key).unwrap());
    }
    // Keys applicable for the max estimator with f_max = 0 cannot exist
    // (their max weight would be 0), so a_max's support covers a_min's.
    for (key, _) in a_min.iter() {
        if a_max.prob(key).is_none() {
            return Err(Error::Internal(format!(
                "min-applicable key {key} missing from the max-applicable set"
            )));
        }
    }
    Ok(aw)
}

/// Weighted Jaccard similarity estimate from coordinated k-mins sketches:
/// the fraction of slots where the two assignments share their minimum.
/// Requires independent-differences exponential ranks.
///
/// "Share" means the minima are the same exponential increment, i.e. the
/// same key at the same rank value. The same key can win both slots through
/// different increments of its difference chain; counting those as matches
/// would bias the estimate above Σmin/Σmax.
pub fn jaccard_kmins(
    ds: &ColocatedDataset,
    b1: &str,
    b2: &str,
    k: usize,
    salt: u64,
) -> Result<f64> {
    let spec = RankSpec::new(RankFamily::Exp, CoordMode::IndependentDifferences, salt)?;
    let s1 = kmins_build(ds, b1, k, &spec, &crate::rank::SeedSource::Hashed)?;
    let s2 = kmins_build(ds, b2, k, &spec, &crate::rank::SeedSource::Hashed)?;
    let matches = s1
        .slots
        .iter()
        .zip(&s2.slots)
        .filter(|(a, b)| match (a, b) {
            (Some((ra, ka)), Some((rb, kb))) => ka == kb && ra == rb,
            _ => false,
        })
        .count();
    Ok(matches as f64 / k as f64)
}

/// True when a summary records recoverable per-key seeds (needed by lset on
/// independent sketches; shared-seed summaries always qualify).
pub fn seeds_known(summary: &Summary) -> bool {
    match summary.rank_spec.mode {
        CoordMode::SharedSeed => true,
        CoordMode::Independent => matches!(summary.seed_kind, SeedKind::Hashed | SeedKind::Table),
        CoordMode::IndependentDifferences => false,
    }
}

/// Deterministic per-run invariants checked by the test harness: rank
/// consistency on coordinated summaries and nonnegativity of every adjusted
/// weight.
pub fn audit_summary(summary: &Summary) -> Result<()> {
    if summary.rank_spec.mode.is_consistent() {
        for (key, e) in &summary.union {
            for a in 0..e.weights.len() {
                for b in 0..e.weights.len() {
                    if let (Some(wa), Some(wb), Some(ra), Some(rb)) =
                        (e.weights[a], e.weights[b], e.ranks[a], e.ranks[b])
                    {
                        if wa >= wb && ra > rb {
                            return Err(Error::Internal(format!(
                                "consistency violated for {key}: w{a}={wa} ≥ w{b}={wb} but rank {ra} > {rb}"
                            )));
                        }
                        if summary.rank_spec.mode == CoordMode::SharedSeed && wa == wb && ra != rb {
                            return Err(Error::Internal(format!(
                                "shared-seed equal weights must tie ranks for {key}"
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
