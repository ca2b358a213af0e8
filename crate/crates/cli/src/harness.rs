//! Monte-Carlo evaluation harness: SV/nSV estimation, variance-ratio
//! tables, sharing-index curves, and per-run invariant audits.
//!
//! Runs are independent replicas whose salts derive from the master salt
//! and the run index. Accumulation is chunked: rayon parallelizes over
//! fixed-size chunks, each chunk accumulates sequentially, and chunk
//! results merge in index order — reports are bit-identical for a given
//! config regardless of thread scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use coordsketch_core::estimate::{
    audit_summary, colocated_generic_consistent, colocated_inclusive, dispersed_l1,
    dispersed_lset, dispersed_sset, rc_single, subpop_estimate, AdjustedWeights, L1Variant,
};
use coordsketch_core::hash::Hash64;
use coordsketch_core::model::{true_aggregate, AggregateSpec};
use coordsketch_core::rank::{CoordMode, RankFamily, RankSpec, SeedSource};
use coordsketch_core::sketch::{build_colocated_summary, build_dispersed_summary};
use coordsketch_core::{AggKind, ColocatedDataset, DispersedDataset, KeyId, Predicate, Summary};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::parse::{parse_agg, parse_predicate};
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(SynthConfig),
    ColocatedCsv(PathBuf),
    DispersedCsv(PathBuf),
}

/// Experiment configuration (the `eval` subcommands read it as JSON).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub ks: Vec<usize>,
    /// Rank families: "exp" | "ipps".
    pub families: Vec<String>,
    /// Coordination modes: "independent" | "shared-seed" | "indep-diff".
    pub modes: Vec<String>,
    /// Aggregates in CLI syntax, e.g. "single:1", "max:1,2", "nth:1,2,3:2".
    pub aggregates: Vec<String>,
    /// Optional subpopulation predicate, e.g. "grp = 0".
    #[serde(default, rename = "where")]
    pub where_: Option<String>,
    pub runs: usize,
    pub salt: u64,
    /// Grid resolution for the exact oracle.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Point budget for the oracle enumeration.
    #[serde(default)]
    pub oracle_budget: Option<u64>,
    /// Check per-run deterministic invariants during Monte-Carlo runs.
    #[serde(default)]
    pub audit: bool,
    /// Test-only seed override file; replaces hash-derived seeds in every
    /// run (runs then coincide).
    #[serde(default)]
    pub seed_file: Option<PathBuf>,
}

fn default_grid() -> usize {
    512
}

pub fn load_dataset(source: &DatasetSource) -> Result<ColocatedDataset> {
    match source {
        DatasetSource::Synthetic(cfg) => Ok(generate(cfg)),
        DatasetSource::ColocatedCsv(path) => {
            crate::io::read_colocated_csv(std::fs::File::open(path)?)
        }
        DatasetSource::DispersedCsv(path) => {
            Ok(crate::io::read_dispersed_csv(std::fs::File::open(path)?)?.to_colocated())
        }
    }
}

pub fn family_from_str(s: &str) -> Result<RankFamily> {
    match s {
        "exp" => Ok(RankFamily::Exp),
        "ipps" => Ok(RankFamily::Ipps),
        _ => Err(Error::config(format!("unknown rank family {s:?} (exp|ipps)"))),
    }
}

pub fn mode_from_str(s: &str) -> Result<CoordMode> {
    match s {
        "independent" => Ok(CoordMode::Independent),
        "shared-seed" => Ok(CoordMode::SharedSeed),
        "indep-diff" => Ok(CoordMode::IndependentDifferences),
        _ => Err(Error::config(format!(
            "unknown coordination mode {s:?} (independent|shared-seed|indep-diff)"
        ))),
    }
}

pub fn mode_to_str(mode: CoordMode) -> &'static str {
    match mode {
        CoordMode::Independent => "independent",
        CoordMode::SharedSeed => "shared-seed",
        CoordMode::IndependentDifferences => "indep-diff",
    }
}

pub fn family_to_str(family: RankFamily) -> &'static str {
    match family {
        RankFamily::Exp => "exp",
        RankFamily::Ipps => "ipps",
    }
}

/// Salt for one Monte-Carlo run.
pub fn run_salt(master: u64, run: usize) -> u64 {
    Hash64::new().write_u64(master).write_u64(run as u64).finish()
}

/// One metric cell: (estimator, spec, model, mode, family, k).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub estimator: String,
    pub spec: String,
    pub model: String,
    pub mode: String,
    pub family: String,
    pub k: usize,
}

/// Mergeable per-cell moments: totals of the subpopulation estimate and the
/// per-run sum of squared per-key errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellStats {
    pub runs: usize,
    pub sum_total: f64,
    pub sum_total_sq: f64,
    pub sum_sqerr: f64,
    pub sum_sqerr_sq: f64,
}

impl CellStats {
    fn add(&mut self, total: f64, sqerr: f64) {
        self.runs += 1;
        self.sum_total += total;
        self.sum_total_sq += total * total;
        self.sum_sqerr += sqerr;
        self.sum_sqerr_sq += sqerr * sqerr;
    }

    fn merge(&mut self, other: &CellStats) {
        self.runs += other.runs;
        self.sum_total += other.sum_total;
        self.sum_total_sq += other.sum_total_sq;
        self.sum_sqerr += other.sum_sqerr;
        self.sum_sqerr_sq += other.sum_sqerr_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum_total / self.runs as f64
    }

    pub fn stderr(&self) -> f64 {
        if self.runs < 2 {
            return f64::NAN;
        }
        let n = self.runs as f64;
        let var = (self.sum_total_sq - self.sum_total * self.sum_total / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }

    /// Monte-Carlo estimate of SV = Σ_i Var[a(i)].
    pub fn sv(&self) -> f64 {
        self.sum_sqerr / self.runs as f64
    }

    pub fn sv_stderr(&self) -> f64 {
        if self.runs < 2 {
            return f64::NAN;
        }
        let n = self.runs as f64;
        let var = (self.sum_sqerr_sq - self.sum_sqerr * self.sum_sqerr / n) / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

/// Mergeable Monte-Carlo accumulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct McAccum {
    pub cells: BTreeMap<CellKey, CellStats>,
    pub audit_failures: Vec<String>,
}

impl McAccum {
    pub fn merge(&mut self, other: &McAccum) {
        for (key, stats) in &other.cells {
            self.cells.entry(key.clone()).or_default().merge(stats);
        }
        self.audit_failures.extend(other.audit_failures.iter().cloned());
    }
}

struct KindTruth {
    kind: AggKind,
    label: String,
    f_by_key: Vec<(KeyId, f64)>,
}

fn kind_truths(ds: &ColocatedDataset, kinds: &[AggKind]) -> Result<Vec<KindTruth>> {
    kinds
        .iter()
        .map(|kind| {
            let resolved = kind.resolve(ds.assignments())?;
            let f_by_key: Vec<(KeyId, f64)> = ds
                .rows()
                .map(|(k, wv)| (k.clone(), resolved.value(wv)))
                .collect();
            Ok(KindTruth {
                kind: kind.clone(),
                label: kind.to_string(),
                f_by_key,
            })
        })
        .collect()
}

fn sq_err(aw: &AdjustedWeights, truth: &KindTruth) -> f64 {
    truth
        .f_by_key
        .iter()
        .map(|(key, f)| {
            let d = aw.value(key) - f;
            d * d
        })
        .sum()
}

/// Which estimators run for an aggregate under a coordination mode.
fn estimator_plan(mode: CoordMode, kind: &AggKind) -> Vec<&'static str> {
    let mut plan = vec!["inclusive"];
    if mode.is_consistent() {
        plan.push("generic");
    }
    if let AggKind::Single(_) = kind {
        plan.push("rc");
    }
    match kind {
        AggKind::L1(_) => {
            if mode.is_consistent() && mode != CoordMode::IndependentDifferences {
                plan.push("l1-sset");
                plan.push("l1-lset");
            }
        }
        other => {
            let ell = other.top_ell().unwrap();
            let size = other.assignment_ids().len();
            match mode {
                CoordMode::SharedSeed => {
                    plan.push("sset");
                    plan.push("lset");
                }
                CoordMode::Independent => {
                    if ell == size {
                        plan.push("sset");
                    }
                    plan.push("lset");
                }
                CoordMode::IndependentDifferences => {}
            }
        }
    }
    plan
}

fn evaluate(
    name: &str,
    colocated: &Summary,
    dispersed: Option<&Summary>,
    kind: &AggKind,
) -> Result<(AdjustedWeights, &'static str)> {
    Ok(match name {
        "inclusive" => (colocated_inclusive(colocated, kind)?, "colocated"),
        "generic" => (colocated_generic_consistent(colocated, kind)?, "colocated"),
        "rc" => {
            let AggKind::Single(b) = kind else {
                return Err(Error::config("rc runs on single-assignment aggregates"));
            };
            (rc_single(colocated, b)?, "colocated")
        }
        "sset" => (
            dispersed_sset(dispersed.expect("dispersed summary"), kind)?,
            "dispersed",
        ),
        "lset" => (
            dispersed_lset(dispersed.expect("dispersed summary"), kind)?,
            "dispersed",
        ),
        "l1-sset" | "l1-lset" => {
            let AggKind::L1(r) = kind else {
                return Err(Error::config("l1 estimators run on l1 aggregates"));
            };
            let variant = if name == "l1-sset" {
                L1Variant::SSet
            } else {
                L1Variant::LSet
            };
            (
                dispersed_l1(dispersed.expect("dispersed summary"), r, variant)?,
                "dispersed",
            )
        }
        _ => return Err(Error::config(format!("unknown estimator {name:?}"))),
    })
}

/// Deterministic per-run invariant audit (acceptance criterion material):
/// rank consistency, nonnegative adjusted weights, s-set/l-set and
/// generic/inclusive dominance, the max/min probability-ratio bound, and
/// the ≥ k−1 positive max-weights guarantee.
fn audit_run(
    colocated: &Summary,
    dispersed: Option<&Summary>,
    ds: &ColocatedDataset,
    k: usize,
) -> std::result::Result<(), String> {
    audit_summary(colocated).map_err(|e| e.to_string())?;
    let r: Vec<String> = ds.assignments().to_vec();
    let max_kind = AggKind::Max(r.clone());
    let min_kind = AggKind::Min(r.clone());
    let incl = colocated_inclusive(colocated, &max_kind).map_err(|e| e.to_string())?;
    for (_, v) in incl.iter() {
        if !(v >= 0.0) {
            return Err("negative inclusive adjusted weight".into());
        }
    }
    if colocated.rank_spec.mode.is_consistent() {
        let gen = colocated_generic_consistent(colocated, &max_kind).map_err(|e| e.to_string())?;
        for key in colocated.union.keys() {
            if let (Some(pg), Some(pi)) = (gen.prob(key), incl.prob(key)) {
                if pg > pi + 1e-12 {
                    return Err(format!("p_generic {pg} > p_inclusive {pi} for {key}"));
                }
            } else if gen.prob(key).is_some() && incl.prob(key).is_none() {
                return Err(format!("generic applicable but inclusive not for {key}"));
            }
        }
        let l1 = colocated_inclusive(colocated, &AggKind::L1(r.clone())).map_err(|e| e.to_string())?;
        for (_, v) in l1.iter() {
            if !(v >= 0.0) {
                return Err("negative inclusive L1 adjusted weight".into());
            }
        }
    }
    let Some(d) = dispersed else { return Ok(()) };
    audit_summary(d).map_err(|e| e.to_string())?;
    if d.rank_spec.mode.is_consistent() {
        let a_max = dispersed_sset(d, &max_kind).map_err(|e| e.to_string())?;
        let npos = ds
            .rows()
            .filter(|(_, wv)| wv.iter().any(|&w| w > 0.0))
            .count();
        if a_max.positive_count() < (k - 1).min(npos) {
            return Err(format!(
                "only {} positive max adjusted weights (k = {k})",
                a_max.positive_count()
            ));
        }
        let s_min = dispersed_sset(d, &min_kind).map_err(|e| e.to_string())?;
        let l_min = dispersed_lset(d, &min_kind).map_err(|e| e.to_string())?;
        for key in d.union.keys() {
            if let Some(ps) = s_min.prob(key) {
                let Some(pl) = l_min.prob(key) else {
                    return Err(format!("s-set applicable but l-set not for {key}"));
                };
                if ps > pl + 1e-12 {
                    return Err(format!("p_s {ps} > p_l {pl} for {key}"));
                }
            }
            // Probability-ratio lemma on keys applicable for both bounds.
            if let (Some(pmin), Some(pmax)) = (l_min.prob(key), a_max.prob(key)) {
                let e = &d.union[key];
                let known: Vec<f64> = e.weights.iter().flatten().copied().collect();
                if known.len() == e.weights.len() {
                    let w_max = known.iter().cloned().fold(0.0f64, f64::max);
                    let w_min = known.iter().cloned().fold(f64::INFINITY, f64::min);
                    if w_min > 0.0 && pmax / pmin > w_max / w_min + 1e-9 {
                        return Err(format!("probability-ratio bound violated for {key}"));
                    }
                }
            }
        }
        for variant in [L1Variant::SSet, L1Variant::LSet] {
            let l1 = dispersed_l1(d, &r, variant).map_err(|e| e.to_string())?;
            for (_, v) in l1.iter() {
                if !(v >= 0.0) {
                    return Err("negative L1 adjusted weight".into());
                }
            }
        }
    }
    Ok(())
}

/// Run the Monte-Carlo experiment and return the mergeable accumulator.
pub fn monte_carlo(cfg: &ExperimentConfig, ds: &ColocatedDataset) -> Result<McAccum> {
    let kinds: Vec<AggKind> = cfg
        .aggregates
        .iter()
        .map(|a| parse_agg(a))
        .collect::<Result<_>>()?;
    let predicate = match &cfg.where_ {
        Some(w) => parse_predicate(w)?,
        None => Predicate::All,
    };
    let truths = kind_truths(ds, &kinds)?;
    let disp = ds.to_dispersed();
    let mut combos: Vec<(RankFamily, CoordMode)> = Vec::new();
    for f in &cfg.families {
        for m in &cfg.modes {
            let family = family_from_str(f)?;
            let mode = mode_from_str(m)?;
            if RankSpec::new(family, mode, 0).is_ok() {
                combos.push((family, mode));
            }
        }
    }
    if combos.is_empty() {
        return Err(Error::config("no valid (family, mode) combination"));
    }
    if cfg.runs == 0 {
        return Err(Error::config("runs must be ≥ 1"));
    }

    let source = match &cfg.seed_file {
        Some(path) => SeedSource::Table(crate::io::read_seed_file(std::fs::File::open(path)?)?),
        None => SeedSource::Hashed,
    };
    const CHUNK: usize = 64;
    let chunk_count = cfg.runs.div_ceil(CHUNK);
    let chunks: Vec<McAccum> = (0..chunk_count)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(cfg.runs);
            let mut acc = McAccum::default();
            for run in lo..hi {
                let salt = run_salt(cfg.salt, run);
                for &(family, mode) in &combos {
                    let spec = RankSpec::new(family, mode, salt).unwrap();
                    for &k in &cfg.ks {
                        run_once(
                            &mut acc, ds, &disp, &truths, &predicate, &spec, k, cfg.audit, &source,
                        );
                    }
                }
            }
            acc
        })
        .collect();
    let mut acc = McAccum::default();
    for c in &chunks {
        acc.merge(c);
    }
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn run_once(
    acc: &mut McAccum,
    ds: &ColocatedDataset,
    disp: &DispersedDataset,
    truths: &[KindTruth],
    predicate: &Predicate,
    spec: &RankSpec,
    k: usize,
    audit: bool,
    source: &SeedSource,
) {
    let colocated = build_colocated_summary(ds, k, spec, source)
        .expect("colocated build cannot fail on valid data");
    let dispersed = if spec.mode == CoordMode::IndependentDifferences {
        None
    } else {
        Some(
            build_dispersed_summary(disp, k, spec, source)
                .expect("dispersed build cannot fail on valid data"),
        )
    };
    let mode = mode_to_str(spec.mode);
    let family = family_to_str(spec.family);
    if audit && matches!(source, SeedSource::Hashed) {
        if let Err(msg) = audit_run(&colocated, dispersed.as_ref(), ds, k) {
            acc.audit_failures
                .push(format!("salt {:#x} {mode}/{family} k={k}: {msg}", spec.salt));
        }
    }
    for truth in truths {
        for name in estimator_plan(spec.mode, &truth.kind) {
            let (aw, model) = evaluate(name, &colocated, dispersed.as_ref(), &truth.kind)
                .expect("planned estimator cannot be rejected");
            let total = subpop_estimate(&aw, if model == "colocated" { &colocated } else { dispersed.as_ref().unwrap() }, predicate);
            let sqerr = sq_err(&aw, truth);
            let key = CellKey {
                estimator: name.to_string(),
                spec: truth.label.clone(),
                model: model.to_string(),
                mode: mode.to_string(),
                family: family.to_string(),
                k,
            };
            acc.cells.entry(key).or_default().add(total, sqerr);
        }
    }
    // Sharing index and distinct-key cells per model.
    let mut sharing_cell = |summary: &Summary, model: &str| {
        let key = CellKey {
            estimator: "sharing".to_string(),
            spec: "-".to_string(),
            model: model.to_string(),
            mode: mode.to_string(),
            family: family.to_string(),
            k,
        };
        acc.cells
            .entry(key)
            .or_default()
            .add(summary.sharing_index(), summary.distinct_keys() as f64);
    };
    sharing_cell(&colocated, "colocated");
    if let Some(d) = &dispersed {
        sharing_cell(d, "dispersed");
    }
}

/// Empirical probe of the zero-covariance conjecture: for every key pair,
/// the studentized deviation of Cov[a(i), a(j)] from zero. Pairs are
/// flagged, never asserted — the conjecture is tested with loose
/// statistical tolerance only.
pub fn zero_covariance_probe(
    ds: &ColocatedDataset,
    spec: &RankSpec,
    kind: &AggKind,
    k: usize,
    runs: usize,
    master_salt: u64,
) -> Result<Vec<(KeyId, KeyId, f64)>> {
    let resolved = kind.resolve(ds.assignments())?;
    let keys: Vec<KeyId> = ds.rows().map(|(key, _)| key.clone()).collect();
    let f: Vec<f64> = ds.rows().map(|(_, wv)| resolved.value(wv)).collect();
    let n = keys.len();
    if n > 24 {
        return Err(Error::config("covariance probe is for small instances (≤ 24 keys)"));
    }
    let mut sum_prod = vec![0.0f64; n * n];
    let mut sum_prod_sq = vec![0.0f64; n * n];
    for run in 0..runs {
        let salt = run_salt(master_salt, run);
        let run_spec = RankSpec::new(spec.family, spec.mode, salt).unwrap();
        let summary = build_colocated_summary(ds, k, &run_spec, &SeedSource::Hashed)?;
        let aw = colocated_inclusive(&summary, kind)?;
        let a: Vec<f64> = keys.iter().map(|key| aw.value(key)).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let p = a[i] * a[j];
                sum_prod[i * n + j] += p;
                sum_prod_sq[i * n + j] += p * p;
            }
        }
    }
    let r = runs as f64;
    let mut flagged = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let mean = sum_prod[i * n + j] / r;
            let var = (sum_prod_sq[i * n + j] - sum_prod[i * n + j] * mean) / (r - 1.0);
            let se = (var.max(0.0) / r).sqrt();
            let cov = mean - f[i] * f[j];
            if se > 0.0 {
                let z = cov / se;
                if z.abs() > 5.0 {
                    flagged.push((keys[i].clone(), keys[j].clone(), z));
                }
            }
        }
    }
    Ok(flagged)
}

/// A rendered report row.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportRow {
    pub estimator: String,
    pub spec: String,
    pub model: String,
    pub mode: String,
    pub family: String,
    pub k: usize,
    pub sv: f64,
    pub nsv: f64,
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VarianceReport {
    pub rows: Vec<ReportRow>,
}

fn fmt17(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

/// RFC 4180 quoting for fields that may contain commas (aggregate labels).
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl VarianceReport {
    pub fn from_accum(acc: &McAccum, ds: &ColocatedDataset) -> Result<Self> {
        let mut rows = Vec::new();
        for (key, stats) in &acc.cells {
            if key.estimator == "sharing" {
                continue;
            }
            let kind = parse_agg(&key.spec)?;
            let truth = true_aggregate(ds, &AggregateSpec::new(kind))?;
            let sv = stats.sv();
            rows.push(ReportRow {
                estimator: key.estimator.clone(),
                spec: key.spec.clone(),
                model: key.model.clone(),
                mode: key.mode.clone(),
                family: key.family.clone(),
                k: key.k,
                sv,
                nsv: if truth > 0.0 { sv / (truth * truth) } else { f64::NAN },
                mean: stats.mean(),
                stderr: stats.stderr(),
                runs: stats.runs,
            });
        }
        Ok(VarianceReport { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,spec,model,mode,family,k,sv,nsv,mean,stderr,runs\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.estimator,
                csv_field(&r.spec),
                r.model,
                r.mode,
                r.family,
                r.k,
                fmt17(r.sv),
                fmt17(r.nsv),
                fmt17(r.mean),
                fmt17(r.stderr),
                r.runs
            );
        }
        out
    }
}

/// One ratio-table row.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioRow {
    pub table: String,
    pub pair: String,
    pub spec: String,
    pub family: String,
    pub k: usize,
    pub ratio: f64,
    pub stderr: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,pair,spec,family,k,ratio,stderr,runs\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.table,
                csv_field(&r.pair),
                csv_field(&r.spec),
                r.family,
                r.k,
                fmt17(r.ratio),
                fmt17(r.stderr),
                r.runs
            );
        }
        out
    }
}

fn cell<'a>(
    acc: &'a McAccum,
    estimator: &str,
    spec: &str,
    model: &str,
    mode: &str,
    family: &str,
    k: usize,
) -> Option<&'a CellStats> {
    acc.cells.get(&CellKey {
        estimator: estimator.to_string(),
        spec: spec.to_string(),
        model: model.to_string(),
        mode: mode.to_string(),
        family: family.to_string(),
        k,
    })
}

fn ratio_of(num: &CellStats, den: &CellStats) -> (f64, f64) {
    let ratio = num.sv() / den.sv();
    let rel_n = num.sv_stderr() / num.sv();
    let rel_d = den.sv_stderr() / den.sv();
    (ratio, ratio * (rel_n * rel_n + rel_d * rel_d).sqrt())
}

/// Comparison tables: independent vs coordinated min estimators,
/// s-set vs l-set, inclusive vs plain, and the sharing index per mode.
pub fn ratio_report(cfg: &ExperimentConfig, ds: &ColocatedDataset) -> Result<(McAccum, RatioReport)> {
    let acc = monte_carlo(cfg, ds)?;
    let mut rows = Vec::new();
    let min_spec = AggKind::Min(ds.assignments().to_vec()).to_string();
    let l1_spec = AggKind::L1(ds.assignments().to_vec()).to_string();
    for f in &cfg.families {
        let family = f.as_str();
        for &k in &cfg.ks {
            if let (Some(ind), Some(coord)) = (
                cell(&acc, "lset", &min_spec, "dispersed", "independent", family, k),
                cell(&acc, "lset", &min_spec, "dispersed", "shared-seed", family, k),
            ) {
                let (ratio, stderr) = ratio_of(ind, coord);
                rows.push(RatioRow {
                    table: "ind_vs_coord".into(),
                    pair: "lset-min-independent/lset-min-shared-seed".into(),
                    spec: min_spec.clone(),
                    family: family.into(),
                    k,
                    ratio,
                    stderr,
                    runs: ind.runs,
                });
            }
            for (spec_label, s_name, l_name) in [
                (&min_spec, "sset", "lset"),
                (&l1_spec, "l1-sset", "l1-lset"),
            ] {
                if let (Some(s), Some(l)) = (
                    cell(&acc, s_name, spec_label, "dispersed", "shared-seed", family, k),
                    cell(&acc, l_name, spec_label, "dispersed", "shared-seed", family, k),
                ) {
                    let (ratio, stderr) = ratio_of(s, l);
                    rows.push(RatioRow {
                        table: "sset_vs_lset".into(),
                        pair: format!("{s_name}/{l_name}"),
                        spec: spec_label.clone(),
                        family: family.into(),
                        k,
                        ratio,
                        stderr,
                        runs: s.runs,
                    });
                }
            }
            for m in &cfg.modes {
                for agg in &cfg.aggregates {
                    if !agg.starts_with("single:") {
                        continue;
                    }
                    if let (Some(incl), Some(plain)) = (
                        cell(&acc, "inclusive", agg, "colocated", m, family, k),
                        cell(&acc, "rc", agg, "colocated", m, family, k),
                    ) {
                        let (ratio, stderr) = ratio_of(incl, plain);
                        rows.push(RatioRow {
                            table: "inclusive_vs_plain".into(),
                            pair: format!("inclusive-{m}/plain"),
                            spec: agg.clone(),
                            family: family.into(),
                            k,
                            ratio,
                            stderr,
                            runs: incl.runs,
                        });
                    }
                }
            }
            for m in &cfg.modes {
                if let Some(s) = cell(&acc, "sharing", "-", "colocated", m, family, k) {
                    rows.push(RatioRow {
                        table: "sharing".into(),
                        pair: format!("sharing-{m}"),
                        spec: "-".into(),
                        family: family.into(),
                        k,
                        ratio: s.mean(),
                        stderr: s.stderr(),
                        runs: s.runs,
                    });
                }
            }
        }
    }
    Ok((acc, RatioReport { rows }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(runs: usize, salt: u64) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SynthConfig {
                keys: 12,
                assignments: 2,
                zipf_alpha: 1.0,
                jitter_sigma: 0.3,
                dropout: 0.15,
                seed: 5,
            }),
            ks: vec![3],
            families: vec!["ipps".into()],
            modes: vec!["shared-seed".into(), "independent".into()],
            aggregates: vec!["single:1".into(), "min:1,2".into()],
            where_: None,
            runs,
            salt,
            grid: 64,
            oracle_budget: None,
            audit: true,
            seed_file: None,
        }
    }

    #[test]
    fn deterministic_and_mergeable() {
        let cfg = tiny_cfg(130, 9);
        let ds = load_dataset(&cfg.dataset).unwrap();
        let a = monte_carlo(&cfg, &ds).unwrap();
        let b = monte_carlo(&cfg, &ds).unwrap();
        assert_eq!(a, b, "same config must give bit-identical accumulators");
        assert!(a.audit_failures.is_empty(), "{:?}", a.audit_failures);

        // Merging two disjoint run ranges reproduces the full accumulator:
        // runs are salted by index, so run the first 64 and the rest apart.
        let mut first = tiny_cfg(64, 9);
        first.runs = 64;
        let acc1 = monte_carlo(&first, &ds).unwrap();
        let rest = 130 - 64;
        let mut acc2 = McAccum::default();
        {
            // Re-run the remaining indices by shifting manually.
            let kinds: Vec<AggKind> = cfg.aggregates.iter().map(|a| parse_agg(a).unwrap()).collect();
            let truths = kind_truths(&ds, &kinds).unwrap();
            let disp = ds.to_dispersed();
            for run in 64..64 + rest {
                let salt = run_salt(9, run);
                for f in &cfg.families {
                    for m in &cfg.modes {
                        let spec =
                            RankSpec::new(family_from_str(f).unwrap(), mode_from_str(m).unwrap(), salt)
                                .unwrap();
                        run_once(&mut acc2, &ds, &disp, &truths, &Predicate::All, &spec, 3, false, &SeedSource::Hashed);
                    }
                }
            }
        }
        let mut merged = acc1.clone();
        merged.merge(&acc2);
        for (key, stats) in &a.cells {
            let m = &merged.cells[key];
            assert_eq!(stats.runs, m.runs);
            assert!((stats.sum_total - m.sum_total).abs() < 1e-9 * stats.sum_total.abs().max(1.0));
        }
    }

    #[test]
    fn single_run_stderr_blank() {
        let cfg = tiny_cfg(1, 3);
        let ds = load_dataset(&cfg.dataset).unwrap();
        let acc = monte_carlo(&cfg, &ds).unwrap();
        let report = VarianceReport::from_accum(&acc, &ds).unwrap();
        assert!(report.rows.iter().all(|r| r.stderr.is_nan()));
        let csv = report.to_csv();
        assert!(csv.lines().count() > 1);
    }
}
