//! Rank-value distributions and the three rank-coordination modes.
//!
//! A rank family assigns each weight w a distribution on (0, ∞); smaller
//! ranks are sampled first. Zero-weight entries always rank +∞. Coordination
//! decides how the per-assignment ranks of one key relate: independent,
//! shared-seed (one uniform placement reused through every inverse CDF), or
//! independent-differences (exponential ranks built from independent
//! increments over the sorted weight vector, so that a larger weight never
//! gets a larger rank).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hash::{unit_interval, Hash64};
use crate::math;
use crate::model::KeyId;

/// Rank-value distribution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RankFamily {
    /// Exponential with rate w: F_w(x) = 1 − e^{−wx}. Bottom-k sampling is
    /// successive weighted sampling without replacement.
    Exp,
    /// Uniform on [0, 1/w]: F_w(x) = min(1, wx). Bottom-k sampling is
    /// priority sampling; Poisson-τ is probability-proportional-to-size.
    Ipps,
}

/// How per-assignment ranks of the same key are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CoordMode {
    Independent,
    SharedSeed,
    IndependentDifferences,
}

impl CoordMode {
    /// Shared-seed and independent-differences ranks are consistent:
    /// w^(b1)(i) ≥ w^(b2)(i) ⇒ r^(b1)(i) ≤ r^(b2)(i).
    pub fn is_consistent(self) -> bool {
        !matches!(self, CoordMode::Independent)
    }
}

/// Rank configuration: family × coordination mode × salt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankSpec {
    pub family: RankFamily,
    pub mode: CoordMode,
    pub salt: u64,
}

impl RankSpec {
    pub fn new(family: RankFamily, mode: CoordMode, salt: u64) -> Result<Self> {
        if mode == CoordMode::IndependentDifferences && family != RankFamily::Exp {
            return Err(Error::Config(
                "independent-differences coordination requires the exponential rank family".into(),
            ));
        }
        Ok(RankSpec { family, mode, salt })
    }
}

/// F_w(x): probability that a rank drawn for weight `w` is below `x`.
///
/// Zero-weight keys are never sampled, so F_0 ≡ 0; for w > 0 an infinite
/// threshold has F = 1 (certain inclusion once conditioning is exhausted).
pub fn cdf(family: RankFamily, w: f64, x: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("cdf: weight must be nonnegative, got {w}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("cdf: rank must be nonnegative, got {x}")));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(match family {
        RankFamily::Exp => -math::expm1(-w * x),
        RankFamily::Ipps => (w * x).min(1.0),
    })
}

/// F_w^{-1}(u): the rank value whose CDF is `u`, for seed u ∈ (0, 1).
/// Zero weight maps to +∞.
pub fn inv_cdf(family: RankFamily, w: f64, u: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("inv_cdf: weight must be nonnegative, got {w}")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("inv_cdf: seed must lie in (0,1), got {u}")));
    }
    if w == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(match family {
        RankFamily::Exp => -math::ln_1p(-u) / w,
        RankFamily::Ipps => u / w,
    })
}

/// Which uniform seed a rank draw consumes.
#[derive(Debug, Clone, Copy)]
pub enum SeedChannel<'a> {
    /// One seed per key, shared by every assignment.
    Shared,
    /// The shared seed as consumed by one assignment's draw. Hash sources
    /// ignore the assignment; seed tables may override it per assignment so
    /// printed reference tables can be reproduced verbatim.
    SharedFor(&'a str),
    /// One seed per (key, assignment).
    Assignment(&'a str),
    /// One seed per (key, sorted-difference position); used by the
    /// independent-differences construction.
    Difference(usize),
}

/// Test-only seed injection: key → u, with optional (key, assignment)
/// overrides that take precedence in the assignment channel.
#[derive(Debug, Clone, Default)]
pub struct SeedTable {
    pub base: BTreeMap<String, f64>,
    pub per_assignment: BTreeMap<(String, String), f64>,
}

impl SeedTable {
    pub fn insert(&mut self, key: &str, u: f64) {
        self.base.insert(key.into(), u);
    }

    pub fn insert_for(&mut self, key: &str, assignment: &str, u: f64) {
        self.per_assignment.insert((key.into(), assignment.into()), u);
    }
}

/// Source of uniform seeds: the documented salted hash, or an injected table.
#[derive(Debug, Clone)]
pub enum SeedSource {
    Hashed,
    Table(SeedTable),
}

impl SeedSource {
    /// The seed u(key[, channel]) ∈ (0, 1).
    pub fn unit(&self, salt: u64, key: &KeyId, channel: SeedChannel<'_>) -> Result<f64> {
        match self {
            SeedSource::Hashed => {
                let h = Hash64::new().write_u64(salt);
                let h = match channel {
                    SeedChannel::Shared | SeedChannel::SharedFor(_) => h.write(&[1]),
                    SeedChannel::Assignment(b) => h.write(&[2]).write(b.as_bytes()).write(&[0xff]),
                    SeedChannel::Difference(j) => h.write(&[3]).write_u64(j as u64),
                };
                Ok(unit_interval(h.write(key.as_str().as_bytes()).finish()))
            }
            SeedSource::Table(t) => {
                let u = match channel {
                    SeedChannel::Shared => t.base.get(key.as_str()).copied(),
                    SeedChannel::SharedFor(b) | SeedChannel::Assignment(b) => t
                        .per_assignment
                        .get(&(key.0.clone(), String::from(b)))
                        .copied()
                        .or_else(|| t.base.get(key.as_str()).copied()),
                    SeedChannel::Difference(_) => {
                        return Err(Error::Config(
                            "seed tables drive shared-seed or independent modes only".into(),
                        ))
                    }
                };
                let u = u.ok_or_else(|| Error::Lookup(format!("no seed for key {key}")))?;
                if !(u > 0.0 && u < 1.0) {
                    return Err(Error::Domain(format!("seed for key {key} must lie in (0,1), got {u}")));
                }
                Ok(u)
            }
        }
    }
}

/// Weight-vector positions ordered by ascending weight (ties by position);
/// the shared ordering used by the independent-differences construction and
/// its inclusion-probability chain.
pub fn ascending_weight_order(weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .partial_cmp(&weights[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    order
}

/// Per-assignment rank vector for one key.
///
/// Independent mode draws one seed per assignment; shared-seed reuses one
/// placement through every inverse CDF; independent-differences draws
/// exponential increments over the ascending weight order and takes running
/// minima, so per-assignment marginals stay EXP[w^(b)].
pub fn rank_vector(
    spec: &RankSpec,
    source: &SeedSource,
    key: &KeyId,
    weights: &[f64],
    assignments: &[String],
) -> Result<Vec<f64>> {
    if weights.len() != assignments.len() {
        return Err(Error::Config(format!(
            "weight vector has {} entries for {} assignments",
            weights.len(),
            assignments.len()
        )));
    }
    match spec.mode {
        CoordMode::Independent => {
            let mut out = Vec::with_capacity(weights.len());
            for (b, &w) in assignments.iter().zip(weights) {
                let u = source.unit(spec.salt, key, SeedChannel::Assignment(b))?;
                out.push(inv_cdf(spec.family, w, u)?);
            }
            Ok(out)
        }
        CoordMode::SharedSeed => {
            let mut out = Vec::with_capacity(weights.len());
            for (b, &w) in assignments.iter().zip(weights) {
                let u = source.unit(spec.salt, key, SeedChannel::SharedFor(b))?;
                out.push(inv_cdf(spec.family, w, u)?);
            }
            Ok(out)
        }
        CoordMode::IndependentDifferences => {
            if spec.family != RankFamily::Exp {
                return Err(Error::Config(
                    "independent-differences coordination requires the exponential rank family".into(),
                ));
            }
            let order = ascending_weight_order(weights);
            let mut out = alloc::vec![f64::INFINITY; weights.len()];
            let mut prev_w = 0.0;
            let mut running_min = f64::INFINITY;
            for (j, &pos) in order.iter().enumerate() {
                let delta = weights[pos] - prev_w;
                prev_w = weights[pos];
                let u = source.unit(spec.salt, key, SeedChannel::Difference(j))?;
                // EXP[0] increments never fire (inv_cdf maps w = 0 to +∞).
                let d = inv_cdf(RankFamily::Exp, delta, u)?;
                running_min = running_min.min(d);
                out[pos] = if weights[pos] > 0.0 {
                    running_min
                } else {
                    f64::INFINITY
                };
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn key(s: &str) -> KeyId {
        KeyId::new(s)
    }

    #[test]
    fn cdf_goldens() {
        // Priority-rank inclusion probability from the worked weighted-set
        // example: w = 20 against threshold 0.046.
        assert!((cdf(RankFamily::Ipps, 20.0, 0.046).unwrap() - 0.92).abs() < 1e-12);
        assert_eq!(cdf(RankFamily::Exp, 5.0, 0.0).unwrap(), 0.0);
        // Closed form: 1 − e^{−0.367}.
        assert!((cdf(RankFamily::Exp, 10.0, 0.0367).unwrap() - 0.3071903549556083).abs() < 1e-15);
        assert_eq!(cdf(RankFamily::Ipps, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(cdf(RankFamily::Ipps, 0.0, f64::INFINITY).unwrap(), 0.0);
        assert_eq!(cdf(RankFamily::Exp, 2.0, f64::INFINITY).unwrap(), 1.0);
        assert!(cdf(RankFamily::Ipps, -1.0, 0.5).is_err());
        assert!(cdf(RankFamily::Exp, 1.0, -0.5).is_err());
    }

    #[test]
    fn inv_cdf_goldens() {
        assert!((inv_cdf(RankFamily::Ipps, 20.0, 0.22).unwrap() - 0.011).abs() < 1e-15);
        assert_eq!(inv_cdf(RankFamily::Ipps, 0.0, 0.5).unwrap(), f64::INFINITY);
        // −ln(0.63)/10.
        assert!((inv_cdf(RankFamily::Exp, 10.0, 0.37).unwrap() - 0.04620354595965587).abs() < 1e-15);
        assert!(inv_cdf(RankFamily::Exp, 1.0, 0.0).is_err());
        assert!(inv_cdf(RankFamily::Exp, 1.0, 1.0).is_err());
    }

    #[test]
    fn shared_seed_ipps_rank_vector_matches_figure() {
        let spec = RankSpec::new(RankFamily::Ipps, CoordMode::SharedSeed, 0).unwrap();
        let mut table = SeedTable::default();
        table.insert("i1", 0.22);
        let source = SeedSource::Table(table);
        let assignments = vec!["1".to_string(), "2".to_string(), "3".to_string()];
        let r = rank_vector(&spec, &source, &key("i1"), &[15.0, 20.0, 10.0], &assignments).unwrap();
        assert!((r[0] - 0.22 / 15.0).abs() < 1e-15);
        assert!((r[1] - 0.011).abs() < 1e-15);
        assert!((r[2] - 0.022).abs() < 1e-15);
    }

    #[test]
    fn single_positive_entry_gives_single_finite_rank() {
        for mode in [
            CoordMode::Independent,
            CoordMode::SharedSeed,
            CoordMode::IndependentDifferences,
        ] {
            let family = if mode == CoordMode::IndependentDifferences {
                RankFamily::Exp
            } else {
                RankFamily::Ipps
            };
            let spec = RankSpec::new(family, mode, 11).unwrap();
            let assignments = vec!["a".to_string(), "b".to_string(), "c".to_string()];
            let r = rank_vector(
                &spec,
                &SeedSource::Hashed,
                &key("k"),
                &[0.0, 7.0, 0.0],
                &assignments,
            )
            .unwrap();
            assert_eq!(r[0], f64::INFINITY);
            assert!(r[1].is_finite() && r[1] > 0.0);
            assert_eq!(r[2], f64::INFINITY);
        }
    }

    #[test]
    fn independent_differences_equal_weights_collapse() {
        // All-equal weights: every increment after the first is EXP[0] and
        // never fires, so all ranks equal the first draw.
        let spec = RankSpec::new(RankFamily::Exp, CoordMode::IndependentDifferences, 3).unwrap();
        let assignments = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let r = rank_vector(
            &spec,
            &SeedSource::Hashed,
            &key("k9"),
            &[4.0, 4.0, 4.0],
            &assignments,
        )
        .unwrap();
        assert!(r[0].is_finite());
        assert_eq!(r[0], r[1]);
        assert_eq!(r[1], r[2]);
    }

    #[test]
    fn independent_differences_requires_exp() {
        assert!(RankSpec::new(RankFamily::Ipps, CoordMode::IndependentDifferences, 0).is_err());
        let spec = RankSpec {
            family: RankFamily::Ipps,
            mode: CoordMode::IndependentDifferences,
            salt: 0,
        };
        let assignments = vec!["a".to_string()];
        assert!(rank_vector(&spec, &SeedSource::Hashed, &key("k"), &[1.0], &assignments).is_err());
    }

    #[test]
    fn hashed_seeds_deterministic_and_channel_separated() {
        let s = SeedSource::Hashed;
        let u1 = s.unit(5, &key("k"), SeedChannel::Shared).unwrap();
        let u2 = s.unit(5, &key("k"), SeedChannel::Shared).unwrap();
        assert_eq!(u1, u2);
        let ua = s.unit(5, &key("k"), SeedChannel::Assignment("a")).unwrap();
        let ub = s.unit(5, &key("k"), SeedChannel::Assignment("b")).unwrap();
        assert_ne!(ua, ub);
        assert_ne!(u1, ua);
    }

    #[test]
    fn cdf_inv_cdf_round_trip() {
        for family in [RankFamily::Exp, RankFamily::Ipps] {
            for &w in &[1e-6, 0.5, 1.0, 42.0, 1e6] {
                for &u in &[1e-9, 0.1, 0.5, 0.9, 1.0 - 1e-9] {
                    let r = inv_cdf(family, w, u).unwrap();
                    let back = cdf(family, w, r).unwrap();
                    assert!(
                        (back - u).abs() <= 1e-12 * u.max(1e-300),
                        "family {family:?} w {w} u {u} back {back}"
                    );
                }
            }
        }
    }
}
