//! Keys, weight assignments, aggregate specifications, and exact
//! ground-truth aggregation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Key identifier: a non-empty UTF-8 token, unique within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct KeyId(pub String);

impl KeyId {
    pub fn new(id: impl Into<String>) -> Self {
        KeyId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for KeyId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Attrs = BTreeMap<String, String>;

/// Colocated data: every key carries its full weight vector, one entry per
/// assignment, in assignment order. All-zero rows are dropped on ingest.
#[derive(Debug, Clone)]
pub struct ColocatedDataset {
    assignments: Vec<String>,
    rows: BTreeMap<KeyId, Vec<f64>>,
    attrs: BTreeMap<KeyId, Attrs>,
    dropped_all_zero: usize,
}

impl ColocatedDataset {
    pub fn new(
        assignments: Vec<String>,
        rows: impl IntoIterator<Item = (KeyId, Vec<f64>, Attrs)>,
    ) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::Config("at least one assignment required".into()));
        }
        let mut seen = BTreeMap::new();
        for (i, a) in assignments.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::Config("empty assignment id".into()));
            }
            if seen.insert(a.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate assignment id {a:?}")));
            }
        }
        let mut map = BTreeMap::new();
        let mut attr_map = BTreeMap::new();
        let mut dropped = 0usize;
        for (key, wv, attrs) in rows {
            if key.0.is_empty() {
                return Err(Error::Data("empty key id".into()));
            }
            if wv.len() != assignments.len() {
                return Err(Error::Data(format!(
                    "key {key}: weight vector has {} entries, expected {}",
                    wv.len(),
                    assignments.len()
                )));
            }
            for &w in &wv {
                if !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::Data(format!("key {key}: negative or non-finite weight {w}")));
                }
            }
            if wv.iter().all(|&w| w == 0.0) {
                dropped += 1;
                continue;
            }
            if map.insert(key.clone(), wv).is_some() {
                return Err(Error::Data(format!("duplicate key {key}")));
            }
            attr_map.insert(key, attrs);
        }
        Ok(ColocatedDataset {
            assignments,
            rows: map,
            attrs: attr_map,
            dropped_all_zero: dropped,
        })
    }

    pub fn assignments(&self) -> &[String] {
        &self.assignments
    }

    pub fn assignment_index(&self, id: &str) -> Result<usize> {
        self.assignments
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::Config(format!("unknown assignment id {id:?}")))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&KeyId, &[f64])> {
        self.rows.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn weights(&self, key: &KeyId) -> Option<&[f64]> {
        self.rows.get(key).map(|v| v.as_slice())
    }

    pub fn attrs(&self, key: &KeyId) -> Option<&Attrs> {
        self.attrs.get(key)
    }

    /// Rows that were all-zero and therefore dropped at ingest.
    pub fn dropped_all_zero(&self) -> usize {
        self.dropped_all_zero
    }

    /// Split into per-assignment streams of strictly positive records.
    pub fn to_dispersed(&self) -> DispersedDataset {
        let mut records = Vec::new();
        for (key, wv) in &self.rows {
            for (b, &w) in wv.iter().enumerate() {
                if w > 0.0 {
                    records.push((self.assignments[b].clone(), key.clone(), w));
                }
            }
        }
        let attrs = self.attrs.clone();
        DispersedDataset::from_records(self.assignments.clone(), records, attrs)
            .expect("positive records from a valid colocated dataset")
    }
}

/// Dispersed data: one pre-aggregated stream of positive (key, weight)
/// records per assignment. Duplicate (key, assignment) records are merged by
/// summation with a counter; zero or negative weights are rejected.
#[derive(Debug, Clone)]
pub struct DispersedDataset {
    assignments: Vec<String>,
    streams: BTreeMap<String, BTreeMap<KeyId, f64>>,
    attrs: BTreeMap<KeyId, Attrs>,
    merged_duplicates: usize,
}

impl DispersedDataset {
    pub fn from_records(
        assignments: Vec<String>,
        records: impl IntoIterator<Item = (String, KeyId, f64)>,
        attrs: BTreeMap<KeyId, Attrs>,
    ) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::Config("at least one assignment required".into()));
        }
        let mut streams: BTreeMap<String, BTreeMap<KeyId, f64>> = BTreeMap::new();
        for a in &assignments {
            streams.insert(a.clone(), BTreeMap::new());
        }
        let mut merged = 0usize;
        for (b, key, w) in records {
            if key.0.is_empty() {
                return Err(Error::Data("empty key id".into()));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Data(format!(
                    "assignment {b:?}, key {key}: weight must be strictly positive, got {w}"
                )));
            }
            let stream = streams
                .get_mut(&b)
                .ok_or_else(|| Error::Config(format!("unknown assignment id {b:?}")))?;
            if let Some(prev) = stream.get_mut(&key) {
                *prev += w;
                merged += 1;
            } else {
                stream.insert(key, w);
            }
        }
        Ok(DispersedDataset {
            assignments,
            streams,
            attrs,
            merged_duplicates: merged,
        })
    }

    pub fn assignments(&self) -> &[String] {
        &self.assignments
    }

    pub fn assignment_index(&self, id: &str) -> Result<usize> {
        self.assignments
            .iter()
            .position(|a| a == id)
            .ok_or_else(|| Error::Config(format!("unknown assignment id {id:?}")))
    }

    pub fn stream(&self, id: &str) -> Result<impl Iterator<Item = (&KeyId, f64)>> {
        Ok(self
            .streams
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown assignment id {id:?}")))?
            .iter()
            .map(|(k, &w)| (k, w)))
    }

    pub fn attrs(&self, key: &KeyId) -> Option<&Attrs> {
        self.attrs.get(key)
    }

    /// Duplicate (key, assignment) records merged by summation at ingest.
    pub fn merged_duplicates(&self) -> usize {
        self.merged_duplicates
    }

    /// Collate into explicit weight vectors (missing records are weight 0).
    pub fn to_colocated(&self) -> ColocatedDataset {
        let mut rows: BTreeMap<KeyId, Vec<f64>> = BTreeMap::new();
        for (b, stream) in self.streams.iter() {
            let idx = self.assignments.iter().position(|a| a == b).unwrap();
            for (key, &w) in stream {
                rows.entry(key.clone())
                    .or_insert_with(|| alloc::vec![0.0; self.assignments.len()])[idx] = w;
            }
        }
        let rows = rows.into_iter().map(|(k, wv)| {
            let attrs = self.attrs.get(&k).cloned().unwrap_or_default();
            (k, wv, attrs)
        });
        ColocatedDataset::new(self.assignments.clone(), rows)
            .expect("valid dispersed dataset collates cleanly")
    }
}

/// The key-wise numeric function of a subpopulation-sum aggregate.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AggKind {
    /// f(i) = w^(b)(i)
    Single(String),
    /// f(i) = max over the listed assignments
    Max(Vec<String>),
    /// f(i) = min over the listed assignments
    Min(Vec<String>),
    /// f(i) = ℓ-th largest weight over the listed assignments (1-based)
    NthLargest(Vec<String>, usize),
    /// f(i) = max − min over the listed assignments
    L1(Vec<String>),
}

impl AggKind {
    /// Assignments the aggregate depends on.
    pub fn assignment_ids(&self) -> Vec<&str> {
        match self {
            AggKind::Single(b) => alloc::vec![b.as_str()],
            AggKind::Max(r) | AggKind::Min(r) | AggKind::NthLargest(r, _) | AggKind::L1(r) => {
                r.iter().map(|s| s.as_str()).collect()
            }
        }
    }

    /// Top-ℓ dependence order: 1 for max, |R| for min, ℓ for the ℓ-th largest.
    /// `None` for L1, which is estimated as a max/min difference.
    pub fn top_ell(&self) -> Option<usize> {
        match self {
            AggKind::Single(_) => Some(1),
            AggKind::Max(_) => Some(1),
            AggKind::Min(r) => Some(r.len()),
            AggKind::NthLargest(_, l) => Some(*l),
            AggKind::L1(_) => None,
        }
    }

    /// Resolve assignment ids to vector positions and validate bounds.
    pub fn resolve(&self, assignments: &[String]) -> Result<ResolvedAgg> {
        let ids = self.assignment_ids();
        if ids.is_empty() {
            return Err(Error::Config("aggregate needs at least one assignment".into()));
        }
        let mut idxs = Vec::with_capacity(ids.len());
        for id in &ids {
            let pos = assignments
                .iter()
                .position(|a| a == id)
                .ok_or_else(|| Error::Config(format!("unknown assignment id {id:?} in aggregate")))?;
            if idxs.contains(&pos) {
                return Err(Error::Config(format!("assignment {id:?} listed twice in aggregate")));
            }
            idxs.push(pos);
        }
        let kind = match self {
            AggKind::Single(_) => ResolvedKind::NthLargest(1),
            AggKind::Max(_) => ResolvedKind::NthLargest(1),
            AggKind::Min(_) => ResolvedKind::NthLargest(idxs.len()),
            AggKind::NthLargest(_, l) => {
                if *l < 1 || *l > idxs.len() {
                    return Err(Error::Config(format!(
                        "ℓ = {l} out of bounds for {} assignments",
                        idxs.len()
                    )));
                }
                ResolvedKind::NthLargest(*l)
            }
            AggKind::L1(_) => ResolvedKind::Range,
        };
        Ok(ResolvedAgg { idxs, kind })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedKind {
    /// ℓ-th largest over the resolved assignments (1 = max, |R| = min).
    NthLargest(usize),
    /// max − min.
    Range,
}

/// An aggregate with assignment ids resolved to weight-vector positions.
#[derive(Debug, Clone)]
pub struct ResolvedAgg {
    pub idxs: Vec<usize>,
    pub kind: ResolvedKind,
}

impl ResolvedAgg {
    /// Evaluate f on a full weight vector.
    pub fn value(&self, weights: &[f64]) -> f64 {
        match self.kind {
            ResolvedKind::NthLargest(l) => nth_largest(self.idxs.iter().map(|&i| weights[i]), l),
            ResolvedKind::Range => {
                let mut mx = f64::NEG_INFINITY;
                let mut mn = f64::INFINITY;
                for &i in &self.idxs {
                    mx = mx.max(weights[i]);
                    mn = mn.min(weights[i]);
                }
                mx - mn
            }
        }
    }
}

/// ℓ-th largest (1-based) of an iterator of nonnegative values.
pub fn nth_largest(values: impl Iterator<Item = f64>, l: usize) -> f64 {
    let mut v: Vec<f64> = values.collect();
    debug_assert!(l >= 1 && l <= v.len());
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v[l - 1]
}

/// Comparison operator for attribute predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// One attribute comparison; values compare numerically when both sides
/// parse as f64, lexicographically otherwise. The pseudo-attribute `key`
/// refers to the key id itself.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttrCmp {
    pub name: String,
    pub op: CmpOp,
    pub value: String,
}

impl AttrCmp {
    fn matches(&self, key: &KeyId, attrs: &Attrs) -> bool {
        let actual = if self.name == "key" {
            Some(key.as_str())
        } else {
            attrs.get(&self.name).map(|s| s.as_str())
        };
        let Some(actual) = actual else { return false };
        let ord = match (actual.parse::<f64>(), self.value.parse::<f64>()) {
            (Ok(a), Ok(b)) => a.partial_cmp(&b),
            _ => Some(actual.cmp(self.value.as_str())),
        };
        let Some(ord) = ord else { return false };
        match self.op {
            CmpOp::Eq => ord == core::cmp::Ordering::Equal,
            CmpOp::Ne => ord != core::cmp::Ordering::Equal,
            CmpOp::Lt => ord == core::cmp::Ordering::Less,
            CmpOp::Le => ord != core::cmp::Ordering::Greater,
            CmpOp::Gt => ord == core::cmp::Ordering::Greater,
            CmpOp::Ge => ord != core::cmp::Ordering::Less,
        }
    }
}

/// Attribute-based selection predicate (conjunction of comparisons).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Predicate {
    #[default]
    All,
    Attrs(Vec<AttrCmp>),
}

impl Predicate {
    pub fn matches(&self, key: &KeyId, attrs: &Attrs) -> bool {
        match self {
            Predicate::All => true,
            Predicate::Attrs(cmps) => cmps.iter().all(|c| c.matches(key, attrs)),
        }
    }
}

/// An aggregate query: key-wise function plus selection predicate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateSpec {
    pub kind: AggKind,
    pub predicate: Predicate,
}

impl AggregateSpec {
    pub fn new(kind: AggKind) -> Self {
        AggregateSpec {
            kind,
            predicate: Predicate::All,
        }
    }

    pub fn with_predicate(kind: AggKind, predicate: Predicate) -> Self {
        AggregateSpec { kind, predicate }
    }
}

/// Exact aggregate over a colocated dataset: Σ f(i) over keys matching the
/// predicate.
pub fn true_aggregate(ds: &ColocatedDataset, spec: &AggregateSpec) -> Result<f64> {
    let resolved = spec.kind.resolve(ds.assignments())?;
    let empty = Attrs::new();
    let mut total = 0.0;
    for (key, wv) in ds.rows() {
        let attrs = ds.attrs(key).unwrap_or(&empty);
        if spec.predicate.matches(key, attrs) {
            total += resolved.value(wv);
        }
    }
    Ok(total)
}

/// Exact aggregate over a dispersed dataset; missing (key, assignment)
/// records count as weight 0.
pub fn true_aggregate_dispersed(ds: &DispersedDataset, spec: &AggregateSpec) -> Result<f64> {
    // Validate against the dispersed assignment list so unknown ids fail
    // even when collation drops nothing.
    spec.kind.resolve(ds.assignments())?;
    true_aggregate(&ds.to_colocated(), spec)
}

impl core::fmt::Display for AggKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        fn join(r: &[String]) -> String {
            let mut s = String::new();
            for (i, a) in r.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(a);
            }
            s
        }
        match self {
            AggKind::Single(b) => write!(f, "single:{b}"),
            AggKind::Max(r) => write!(f, "max:{}", join(r)),
            AggKind::Min(r) => write!(f, "min:{}", join(r)),
            AggKind::NthLargest(r, l) => write!(f, "nth:{}:{l}", join(r)),
            AggKind::L1(r) => write!(f, "l1:{}", join(r)),
        }
    }
}
