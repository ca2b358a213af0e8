//! Streaming sketch builders and multi-assignment summaries.
//!
//! A bottom-k sketch keeps the k smallest-rank keys of one assignment plus
//! the k-th and (k+1)-st smallest rank values; a Poisson sketch keeps every
//! key ranked below a fixed threshold τ. A [`Summary`] bundles one sketch per
//! assignment with the union of sampled keys and whatever weight, rank, and
//! seed information the data model makes observable: colocated summaries
//! carry full weight vectors, dispersed summaries only the weights of
//! (key, assignment) pairs that were actually sketched.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Attrs, ColocatedDataset, DispersedDataset, KeyId};
use crate::rank::{cdf, inv_cdf, rank_vector, CoordMode, RankSpec, SeedChannel, SeedSource};

/// One sampled record: key, its rank value, and its weight in the sketched
/// assignment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SketchEntry {
    pub key: KeyId,
    #[cfg_attr(feature = "serde", serde(with = "rank_json"))]
    pub rank: f64,
    pub weight: f64,
}

#[inline]
fn rank_order(a: (f64, &KeyId), b: (f64, &KeyId)) -> core::cmp::Ordering {
    a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1))
}

/// Bottom-k sketch: the k smallest-rank keys (ties broken by key id), the
/// k-th smallest rank, and the (k+1)-st smallest rank. Exhausted thresholds
/// are the +∞ sentinel, ordered after every finite rank.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BottomKSketch {
    pub k: usize,
    pub entries: Vec<SketchEntry>,
    #[cfg_attr(feature = "serde", serde(with = "rank_json"))]
    pub threshold_k: f64,
    #[cfg_attr(feature = "serde", serde(with = "rank_json"))]
    pub threshold_next: f64,
}

impl BottomKSketch {
    pub fn contains(&self, key: &KeyId) -> bool {
        self.entries.iter().any(|e| &e.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &KeyId> {
        self.entries.iter().map(|e| &e.key)
    }
}

struct HeapEntry {
    rank: f64,
    key: KeyId,
    weight: f64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank && self.key == other.key
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        rank_order((self.rank, &self.key), (other.rank, &other.key))
    }
}

/// Single-pass bottom-k builder with bounded state: a max-ordered buffer of
/// at most k+1 candidates.
pub struct BottomKBuilder {
    k: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl BottomKBuilder {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("bottom-k requires k ≥ 1".into()));
        }
        Ok(BottomKBuilder {
            k,
            heap: BinaryHeap::with_capacity(k + 2),
        })
    }

    /// Offer one record. Infinite ranks (zero weights) never enter a sketch.
    pub fn push(&mut self, key: KeyId, weight: f64, rank: f64) {
        if rank == f64::INFINITY {
            return;
        }
        self.heap.push(HeapEntry { rank, key, weight });
        if self.heap.len() > self.k + 1 {
            self.heap.pop();
        }
    }

    /// The retained candidates (up to k+1 records); feeding the candidates
    /// of several partial builds into a fresh builder reproduces the sketch
    /// of the concatenated stream.
    pub fn candidates(&self) -> Vec<SketchEntry> {
        self.heap
            .iter()
            .map(|e| SketchEntry {
                key: e.key.clone(),
                rank: e.rank,
                weight: e.weight,
            })
            .collect()
    }

    pub fn finish(self) -> BottomKSketch {
        let mut all: Vec<HeapEntry> = self.heap.into_vec();
        all.sort();
        let threshold_next = if all.len() > self.k {
            all[self.k].rank
        } else {
            f64::INFINITY
        };
        let threshold_k = if all.len() >= self.k {
            all[self.k - 1].rank
        } else {
            f64::INFINITY
        };
        all.truncate(self.k);
        BottomKSketch {
            k: self.k,
            entries: all
                .into_iter()
                .map(|e| SketchEntry {
                    key: e.key,
                    rank: e.rank,
                    weight: e.weight,
                })
                .collect(),
            threshold_k,
            threshold_next,
        }
    }
}

/// Build a bottom-k sketch from a stream of (key, weight, rank) records.
pub fn bottom_k_build(
    items: impl IntoIterator<Item = (KeyId, f64, f64)>,
    k: usize,
) -> Result<BottomKSketch> {
    let mut b = BottomKBuilder::new(k)?;
    for (key, w, r) in items {
        b.push(key, w, r);
    }
    Ok(b.finish())
}

/// Poisson-τ sketch: every key with rank strictly below τ.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoissonSketch {
    #[cfg_attr(feature = "serde", serde(with = "rank_json"))]
    pub tau: f64,
    pub entries: Vec<SketchEntry>,
}

/// Build a Poisson sketch from a stream of (key, weight, rank) records.
pub fn poisson_build(
    items: impl IntoIterator<Item = (KeyId, f64, f64)>,
    tau: f64,
) -> Result<PoissonSketch> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("poisson threshold must be positive, got {tau}")));
    }
    let mut entries: Vec<SketchEntry> = items
        .into_iter()
        .filter(|&(_, _, r)| r < tau)
        .map(|(key, weight, rank)| SketchEntry { key, rank, weight })
        .collect();
    entries.sort_by(|a, b| rank_order((a.rank, &a.key), (b.rank, &b.key)));
    Ok(PoissonSketch { tau, entries })
}

/// k-mins sketch: slot j holds the minimum-rank key of the j-th independent
/// rank assignment (None when no key has positive weight).
#[derive(Debug, Clone, PartialEq)]
pub struct KMinsSketch {
    pub slots: Vec<Option<(f64, KeyId)>>,
}

/// Build a k-mins sketch for one assignment of a colocated dataset. Replica
/// j re-salts the seed source with `salt ^ j`, so replicas are independent
/// while replicas of *different assignments* built from the same salt stay
/// coordinated.
pub fn kmins_build(
    ds: &ColocatedDataset,
    assignment: &str,
    k: usize,
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<KMinsSketch> {
    if k == 0 {
        return Err(Error::Config("k-mins requires k ≥ 1".into()));
    }
    let b = ds.assignment_index(assignment)?;
    let mut slots = Vec::with_capacity(k);
    for j in 0..k {
        let replica = RankSpec {
            salt: spec.salt ^ (j as u64),
            ..*spec
        };
        let mut best: Option<(f64, KeyId)> = None;
        for (key, wv) in ds.rows() {
            let r = rank_vector(&replica, source, key, wv, ds.assignments())?[b];
            if r == f64::INFINITY {
                continue;
            }
            let better = match &best {
                None => true,
                Some((br, bk)) => rank_order((r, key), (*br, bk)) == core::cmp::Ordering::Less,
            };
            if better {
                best = Some((r, key.clone()));
            }
        }
        slots.push(best);
    }
    Ok(KMinsSketch { slots })
}

/// Whether a summary observed full weight vectors or per-assignment streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DataModel {
    Colocated,
    Dispersed,
}

/// Sketch flavor of a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SketchKind {
    BottomK,
    Poisson,
}

/// Seed provenance of a summary (hash-derived or injected table).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SeedKind {
    Hashed,
    Table,
}

/// Per-assignment sketch metadata retained in a summary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssignmentSummary {
    pub id: String,
    /// Bottom-k size (for Poisson sketches, the realized size).
    pub k: usize,
    /// Poisson threshold, when the sketch is Poisson.
    #[cfg_attr(feature = "serde", serde(with = "rank_json::opt"))]
    pub tau: Option<f64>,
    /// r_k(I) for bottom-k, τ for Poisson.
    #[cfg_attr(feature = "serde", serde(with = "rank_json"))]
    pub threshold_k: f64,
    /// r_{k+1}(I) for bottom-k, τ for Poisson.
    #[cfg_attr(feature = "serde", serde(with = "rank_json"))]
    pub threshold_next: f64,
    /// Realized sketch size.
    pub size: usize,
}

/// What the summary knows about one union key.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UnionEntry {
    pub attrs: Attrs,
    /// Membership flag per assignment.
    pub in_sketch: Vec<bool>,
    /// Weight per assignment: all present for colocated summaries, present
    /// iff in-sketch for dispersed summaries.
    pub weights: Vec<Option<f64>>,
    /// Rank per assignment where observable.
    #[cfg_attr(feature = "serde", serde(with = "rank_json::opt_vec"))]
    pub ranks: Vec<Option<f64>>,
    /// Seeds per assignment (shared-seed repeats one value); None under
    /// independent-differences coordination.
    pub seeds: Option<Vec<f64>>,
}

/// Multi-assignment summary: one sketch per assignment over shared or
/// independent randomness, plus the union of sampled keys.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub model: DataModel,
    pub kind: SketchKind,
    pub rank_spec: RankSpec,
    pub seed_kind: SeedKind,
    pub assignments: Vec<AssignmentSummary>,
    pub union: BTreeMap<KeyId, UnionEntry>,
}

impl Summary {
    pub fn assignment_index(&self, id: &str) -> Result<usize> {
        self.assignments
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::Config(format!("unknown assignment id {id:?} in summary")))
    }

    pub fn assignment_ids(&self) -> Vec<String> {
        self.assignments.iter().map(|a| a.id.clone()).collect()
    }

    /// Number of distinct keys in the union of the embedded sketches.
    pub fn distinct_keys(&self) -> usize {
        self.union.len()
    }

    /// Reconstruct one assignment's sketch from the union records.
    pub fn sketch_of(&self, id: &str) -> Result<BottomKSketch> {
        let b = self.assignment_index(id)?;
        let a = &self.assignments[b];
        let mut entries: Vec<SketchEntry> = self
            .union
            .iter()
            .filter(|(_, e)| e.in_sketch[b])
            .map(|(key, e)| SketchEntry {
                key: key.clone(),
                rank: e.ranks[b].expect("in-sketch rank is recorded"),
                weight: e.weights[b].expect("in-sketch weight is recorded"),
            })
            .collect();
        entries.sort_by(|x, y| rank_order((x.rank, &x.key), (y.rank, &y.key)));
        Ok(BottomKSketch {
            k: a.k,
            entries,
            threshold_k: a.threshold_k,
            threshold_next: a.threshold_next,
        })
    }

    /// Distinct union keys divided by the summed realized sketch sizes.
    pub fn sharing_index(&self) -> f64 {
        let denom: usize = self.assignments.iter().map(|a| a.size).sum();
        if denom == 0 {
            return 0.0;
        }
        self.union.len() as f64 / denom as f64
    }
}

fn uniform_ks(ds_assignments: &[String], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("bottom-k requires k ≥ 1".into()));
    }
    Ok(alloc::vec![k; ds_assignments.len()])
}

fn entry_seeds(
    spec: &RankSpec,
    source: &SeedSource,
    key: &KeyId,
    assignments: &[String],
) -> Result<Option<Vec<f64>>> {
    match spec.mode {
        CoordMode::SharedSeed => {
            let mut v = Vec::with_capacity(assignments.len());
            for b in assignments {
                v.push(source.unit(spec.salt, key, SeedChannel::SharedFor(b))?);
            }
            Ok(Some(v))
        }
        CoordMode::Independent => {
            let mut v = Vec::with_capacity(assignments.len());
            for b in assignments {
                v.push(source.unit(spec.salt, key, SeedChannel::Assignment(b))?);
            }
            Ok(Some(v))
        }
        CoordMode::IndependentDifferences => Ok(None),
    }
}

fn seed_kind(source: &SeedSource) -> SeedKind {
    match source {
        SeedSource::Hashed => SeedKind::Hashed,
        SeedSource::Table(_) => SeedKind::Table,
    }
}

/// Build a colocated bottom-k summary: one pass over the rows feeds every
/// assignment's builder from a single rank-vector evaluation per key; union
/// keys carry full weight and rank vectors.
pub fn build_colocated_summary(
    ds: &ColocatedDataset,
    k: usize,
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<Summary> {
    build_colocated_summary_with(ds, &uniform_ks(ds.assignments(), k)?, spec, source)
}

/// Same as [`build_colocated_summary`] with a per-assignment sketch size.
pub fn build_colocated_summary_with(
    ds: &ColocatedDataset,
    ks: &[usize],
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<Summary> {
    RankSpec::new(spec.family, spec.mode, spec.salt)?;
    let assignments = ds.assignments();
    if ks.len() != assignments.len() {
        return Err(Error::Config("one sketch size per assignment required".into()));
    }
    let mut builders = ks
        .iter()
        .map(|&k| BottomKBuilder::new(k))
        .collect::<Result<Vec<_>>>()?;
    for (key, wv) in ds.rows() {
        let ranks = rank_vector(spec, source, key, wv, assignments)?;
        for (b, builder) in builders.iter_mut().enumerate() {
            builder.push(key.clone(), wv[b], ranks[b]);
        }
    }
    let sketches: Vec<BottomKSketch> = builders.into_iter().map(|b| b.finish()).collect();
    let infos: Vec<AssignmentSummary> = assignments
        .iter()
        .zip(&sketches)
        .map(|(id, s)| AssignmentSummary {
            id: id.clone(),
            k: s.k,
            tau: None,
            threshold_k: s.threshold_k,
            threshold_next: s.threshold_next,
            size: s.entries.len(),
        })
        .collect();
    let union = colocated_union(ds, spec, source, &sketches)?;
    Ok(Summary {
        model: DataModel::Colocated,
        kind: SketchKind::BottomK,
        rank_spec: *spec,
        seed_kind: seed_kind(source),
        assignments: infos,
        union,
    })
}

fn colocated_union(
    ds: &ColocatedDataset,
    spec: &RankSpec,
    source: &SeedSource,
    sketches: &[BottomKSketch],
) -> Result<BTreeMap<KeyId, UnionEntry>> {
    let assignments = ds.assignments();
    let mut union: BTreeMap<KeyId, UnionEntry> = BTreeMap::new();
    for (b, sketch) in sketches.iter().enumerate() {
        for e in &sketch.entries {
            if !union.contains_key(&e.key) {
                let wv = ds.weights(&e.key).ok_or_else(|| {
                    Error::Internal(format!("sketched key {} missing from dataset", e.key))
                })?;
                let ranks = rank_vector(spec, source, &e.key, wv, assignments)?;
                union.insert(
                    e.key.clone(),
                    UnionEntry {
                        attrs: ds.attrs(&e.key).cloned().unwrap_or_default(),
                        in_sketch: alloc::vec![false; assignments.len()],
                        weights: wv.iter().map(|&w| Some(w)).collect(),
                        ranks: ranks.into_iter().map(Some).collect(),
                        seeds: entry_seeds(spec, source, &e.key, assignments)?,
                    },
                );
            }
            union.get_mut(&e.key).unwrap().in_sketch[b] = true;
        }
    }
    Ok(union)
}

/// Colocated Poisson summary with per-assignment thresholds.
pub fn build_colocated_poisson(
    ds: &ColocatedDataset,
    taus: &[f64],
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<Summary> {
    RankSpec::new(spec.family, spec.mode, spec.salt)?;
    let assignments = ds.assignments();
    if taus.len() != assignments.len() {
        return Err(Error::Config("one threshold per assignment required".into()));
    }
    for &t in taus {
        if !(t > 0.0) {
            return Err(Error::Config(format!("poisson threshold must be positive, got {t}")));
        }
    }
    let mut per: Vec<Vec<SketchEntry>> = alloc::vec![Vec::new(); assignments.len()];
    for (key, wv) in ds.rows() {
        let ranks = rank_vector(spec, source, key, wv, assignments)?;
        for b in 0..assignments.len() {
            if ranks[b] < taus[b] {
                per[b].push(SketchEntry {
                    key: key.clone(),
                    rank: ranks[b],
                    weight: wv[b],
                });
            }
        }
    }
    let sketches: Vec<BottomKSketch> = per
        .into_iter()
        .zip(taus)
        .map(|(mut entries, &tau)| {
            entries.sort_by(|a, b| rank_order((a.rank, &a.key), (b.rank, &b.key)));
            BottomKSketch {
                k: entries.len(),
                entries,
                threshold_k: tau,
                threshold_next: tau,
            }
        })
        .collect();
    let infos: Vec<AssignmentSummary> = assignments
        .iter()
        .zip(&sketches)
        .zip(taus)
        .map(|((id, s), &tau)| AssignmentSummary {
            id: id.clone(),
            k: s.entries.len(),
            tau: Some(tau),
            threshold_k: tau,
            threshold_next: tau,
            size: s.entries.len(),
        })
        .collect();
    let union = colocated_union(ds, spec, source, &sketches)?;
    Ok(Summary {
        model: DataModel::Colocated,
        kind: SketchKind::Poisson,
        rank_spec: *spec,
        seed_kind: seed_kind(source),
        assignments: infos,
        union,
    })
}

/// Two-pass helper: per-assignment Poisson thresholds τ^(b) whose expected
/// sketch size is `k` (or +∞ when the assignment has at most k positive
/// keys, making inclusion certain).
pub fn poisson_taus_for_expected_size(ds: &ColocatedDataset, k: usize, spec: &RankSpec) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("expected size must be ≥ 1".into()));
    }
    let m = ds.assignments().len();
    let mut taus = Vec::with_capacity(m);
    for b in 0..m {
        let weights: Vec<f64> = ds
            .rows()
            .map(|(_, wv)| wv[b])
            .filter(|&w| w > 0.0)
            .collect();
        if weights.len() <= k {
            taus.push(f64::INFINITY);
            continue;
        }
        let expected = |tau: f64| -> f64 {
            weights
                .iter()
                .map(|&w| cdf(spec.family, w, tau).unwrap())
                .sum::<f64>()
        };
        let mut hi = 1.0 / weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        while expected(hi) < k as f64 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if expected(mid) < k as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        taus.push(0.5 * (lo + hi));
    }
    Ok(taus)
}

/// Colocated summary with a fixed distinct-key budget: the largest ℓ ≥ k
/// such that the union of per-assignment bottom-ℓ samples holds at most
/// |W|·k distinct keys.
pub fn build_colocated_fixed_size(
    ds: &ColocatedDataset,
    k: usize,
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<Summary> {
    let ell = fixed_size_ell(ds, k, spec, source)?;
    build_colocated_summary_with(ds, &alloc::vec![ell; ds.assignments().len()], spec, source)
}

/// The ℓ chosen by [`build_colocated_fixed_size`].
pub fn fixed_size_ell(
    ds: &ColocatedDataset,
    k: usize,
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<usize> {
    if k == 0 {
        return Err(Error::Config("bottom-k requires k ≥ 1".into()));
    }
    let assignments = ds.assignments();
    let m = assignments.len();
    let budget = m * k;
    // Per-assignment rank order over all keys.
    let mut per: Vec<Vec<(f64, &KeyId)>> = alloc::vec![Vec::new(); m];
    let mut ranks_by_key: BTreeMap<&KeyId, Vec<f64>> = BTreeMap::new();
    for (key, wv) in ds.rows() {
        let ranks = rank_vector(spec, source, key, wv, assignments)?;
        for b in 0..m {
            if ranks[b] < f64::INFINITY {
                per[b].push((ranks[b], key));
            }
        }
        ranks_by_key.insert(key, ranks);
    }
    for list in per.iter_mut() {
        list.sort_by(|a, b| rank_order((a.0, a.1), (b.0, b.1)));
    }
    let max_ell = per.iter().map(|l| l.len()).max().unwrap_or(0);
    let mut counts: BTreeMap<&KeyId, usize> = BTreeMap::new();
    let mut distinct = 0usize;
    let mut ell = k;
    for step in 1..=max_ell.max(k) {
        for list in &per {
            if let Some(&(_, key)) = list.get(step - 1) {
                let c = counts.entry(key).or_insert(0);
                if *c == 0 {
                    distinct += 1;
                }
                *c += 1;
            }
        }
        if step >= k {
            if distinct <= budget {
                ell = step;
            } else {
                break;
            }
        }
        if step >= max_ell {
            break;
        }
    }
    Ok(ell)
}

/// Build a dispersed bottom-k summary: every assignment's stream is
/// processed independently, and a union key's weight is recorded only for
/// the assignments that sketched it.
pub fn build_dispersed_summary(
    ds: &DispersedDataset,
    k: usize,
    spec: &RankSpec,
    source: &SeedSource,
) -> Result<Summary> {
    RankSpec::new(spec.family, spec.mode, spec.salt)?;
    if spec.mode == CoordMode::IndependentDifferences {
        return Err(Error::Config(
            "independent-differences coordination is not suited for dispersed weights \
             (per-assignment passes cannot realize the difference chain)"
                .into(),
        ));
    }
    let assignments: Vec<String> = ds.assignments().to_vec();
    if k == 0 {
        return Err(Error::Config("bottom-k requires k ≥ 1".into()));
    }
    let mut sketches = Vec::with_capacity(assignments.len());
    for b in &assignments {
        let mut builder = BottomKBuilder::new(k)?;
        for (key, w) in ds.stream(b)? {
            let channel = match spec.mode {
                CoordMode::SharedSeed => SeedChannel::SharedFor(b),
                CoordMode::Independent => SeedChannel::Assignment(b),
                CoordMode::IndependentDifferences => unreachable!(),
            };
            let u = source.unit(spec.salt, key, channel)?;
            builder.push(key.clone(), w, inv_cdf(spec.family, w, u)?);
        }
        sketches.push(builder.finish());
    }
    let infos: Vec<AssignmentSummary> = assignments
        .iter()
        .zip(&sketches)
        .map(|(id, s)| AssignmentSummary {
            id: id.clone(),
            k: s.k,
            tau: None,
            threshold_k: s.threshold_k,
            threshold_next: s.threshold_next,
            size: s.entries.len(),
        })
        .collect();
    let mut union: BTreeMap<KeyId, UnionEntry> = BTreeMap::new();
    for (b, sketch) in sketches.iter().enumerate() {
        for e in &sketch.entries {
            let entry = match union.get_mut(&e.key) {
                Some(entry) => entry,
                None => {
                    let seeds = entry_seeds(spec, source, &e.key, &assignments)?;
                    union.insert(
                        e.key.clone(),
                        UnionEntry {
                            attrs: ds.attrs(&e.key).cloned().unwrap_or_default(),
                            in_sketch: alloc::vec![false; assignments.len()],
                            weights: alloc::vec![None; assignments.len()],
                            ranks: alloc::vec![None; assignments.len()],
                            seeds,
                        },
                    );
                    union.get_mut(&e.key).unwrap()
                }
            };
            entry.in_sketch[b] = true;
            entry.weights[b] = Some(e.weight);
            entry.ranks[b] = Some(e.rank);
        }
    }
    Ok(Summary {
        model: DataModel::Dispersed,
        kind: SketchKind::BottomK,
        rank_spec: *spec,
        seed_kind: seed_kind(source),
        assignments: infos,
        union,
    })
}

/// Derive a bottom-k sketch of (I, w^(max R)) from a coordinated summary:
/// the k union keys of smallest min-rank over R, weighted by their maximum
/// weight, with the exact (k+1)-st smallest min-rank as threshold.
///
/// The threshold is min((k+1)-st smallest union min-rank, min_b r^(b)_{k+1});
/// a case analysis on whether the boundary key's achieving assignment
/// sketched it shows this always equals the (k+1)-st order statistic of the
/// min-rank assignment over the whole key set.
pub fn union_max_sketch(summary: &Summary, r_ids: &[&str]) -> Result<BottomKSketch> {
    if !summary.rank_spec.mode.is_consistent() {
        return Err(Error::Config(
            "a max-weight sketch requires rank-coordinated (consistent) summaries".into(),
        ));
    }
    if summary.kind != SketchKind::BottomK {
        return Err(Error::Config("max-weight sketches are derived from bottom-k summaries".into()));
    }
    if r_ids.is_empty() {
        return Err(Error::Config("at least one assignment required".into()));
    }
    let idxs: Vec<usize> = r_ids
        .iter()
        .map(|id| summary.assignment_index(id))
        .collect::<Result<_>>()?;
    let k = idxs.iter().map(|&b| summary.assignments[b].k).min().unwrap();
    let mut by_min: Vec<(f64, &KeyId, f64)> = Vec::new();
    for (key, e) in &summary.union {
        let mut min_rank = f64::INFINITY;
        let mut w_max = 0.0;
        for &b in &idxs {
            if let (Some(r), Some(w)) = (e.ranks[b], e.weights[b]) {
                if r < min_rank || (r == min_rank && w > w_max) {
                    min_rank = r;
                    w_max = w;
                }
            }
            if let Some(w) = e.weights[b] {
                w_max = w_max.max(w);
            }
        }
        if min_rank < f64::INFINITY {
            by_min.push((min_rank, key, w_max));
        }
    }
    by_min.sort_by(|a, b| rank_order((a.0, a.1), (b.0, b.1)));
    let union_next = by_min.get(k).map_or(f64::INFINITY, |e| e.0);
    let per_assignment_next = idxs
        .iter()
        .map(|&b| summary.assignments[b].threshold_next)
        .fold(f64::INFINITY, f64::min);
    let threshold_next = union_next.min(per_assignment_next);
    let threshold_k = by_min.get(k - 1).map_or(f64::INFINITY, |e| e.0);
    by_min.truncate(k);
    Ok(BottomKSketch {
        k,
        entries: by_min
            .into_iter()
            .map(|(rank, key, weight)| SketchEntry {
                key: key.clone(),
                rank,
                weight,
            })
            .collect(),
        threshold_k,
        threshold_next,
    })
}

/// JSON encoding for rank values: finite ranks are numbers, the +∞ sentinel
/// is the string "inf" (JSON has no infinity literal).
#[cfg(feature = "serde")]
pub mod rank_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum NumOrInf {
        Num(f64),
        Tag(alloc::string::String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match NumOrInf::deserialize(d)? {
            NumOrInf::Num(v) => Ok(v),
            NumOrInf::Tag(t) if t == "inf" => Ok(f64::INFINITY),
            NumOrInf::Tag(t) => Err(serde::de::Error::custom(alloc::format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        #[serde(untagged)]
        enum Slot {
            Missing(()),
            Num(f64),
            Tag(alloc::string::String),
        }

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                None => Slot::Missing(()),
                Some(x) if x.is_finite() => Slot::Num(*x),
                Some(_) => Slot::Tag("inf".into()),
            }
            .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            match Slot::deserialize(d)? {
                Slot::Missing(()) => Ok(None),
                Slot::Num(x) => Ok(Some(x)),
                Slot::Tag(t) if t == "inf" => Ok(Some(f64::INFINITY)),
                Slot::Tag(t) => Err(serde::de::Error::custom(alloc::format!(
                    "expected null, a number, or \"inf\", got {t:?}"
                ))),
            }
        }
    }

    pub mod opt_vec {
        use alloc::vec::Vec;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        #[serde(untagged)]
        enum Slot {
            Missing(()),
            Num(f64),
            Tag(alloc::string::String),
        }

        pub fn serialize<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
            let slots: Vec<Slot> = v
                .iter()
                .map(|o| match o {
                    None => Slot::Missing(()),
                    Some(x) if x.is_finite() => Slot::Num(*x),
                    Some(_) => Slot::Tag("inf".into()),
                })
                .collect();
            slots.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<f64>>, D::Error> {
            let slots = Vec::<Slot>::deserialize(d)?;
            slots
                .into_iter()
                .map(|s| match s {
                    Slot::Missing(()) => Ok(None),
                    Slot::Num(x) => Ok(Some(x)),
                    Slot::Tag(t) if t == "inf" => Ok(Some(f64::INFINITY)),
                    Slot::Tag(t) => Err(serde::de::Error::custom(alloc::format!(
                        "expected null, a number, or \"inf\", got {t:?}"
                    ))),
                })
                .collect()
        }
    }
}
