//! Parsers shared by the CLI and the experiment config: aggregate specs
//! (`single:b`, `max:R`, `min:R`, `l1:R`, `nth:R:l`) and attribute
//! predicates (`attr op value[, ...]`).

use coordsketch_core::model::{AttrCmp, CmpOp};
use coordsketch_core::{AggKind, Predicate};

use crate::error::{Error, Result};

fn split_ids(list: &str) -> Result<Vec<String>> {
    let ids: Vec<String> = list
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if ids.is_empty() {
        return Err(Error::config(format!("empty assignment list in {list:?}")));
    }
    Ok(ids)
}

/// Parse an aggregate expression: `single:b | max:R | min:R | l1:R | nth:R:l`
/// with R a comma-separated assignment list.
pub fn parse_agg(text: &str) -> Result<AggKind> {
    let (head, rest) = text
        .split_once(':')
        .ok_or_else(|| Error::config(format!("aggregate {text:?} needs a `kind:...` form")))?;
    match head {
        "single" => Ok(AggKind::Single(rest.trim().to_string())),
        "max" => Ok(AggKind::Max(split_ids(rest)?)),
        "min" => Ok(AggKind::Min(split_ids(rest)?)),
        "l1" => Ok(AggKind::L1(split_ids(rest)?)),
        "nth" => {
            let (ids, ell) = rest
                .rsplit_once(':')
                .ok_or_else(|| Error::config(format!("nth aggregate {text:?} needs `nth:R:l`")))?;
            let ell: usize = ell
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("cannot parse ℓ in {text:?}")))?;
            Ok(AggKind::NthLargest(split_ids(ids)?, ell))
        }
        other => Err(Error::config(format!("unknown aggregate kind {other:?}"))),
    }
}

/// Parse a predicate: comma-joined `attr op value` comparisons with ops
/// `= != < <= > >=`; the pseudo-attribute `key` matches the key id.
pub fn parse_predicate(text: &str) -> Result<Predicate> {
    let text = text.trim();
    if text.is_empty() || text == "all" {
        return Ok(Predicate::All);
    }
    let mut cmps = Vec::new();
    for clause in text.split(',') {
        let clause = clause.trim();
        let (op_str, op) = ["<=", ">=", "!=", "=", "<", ">"]
            .iter()
            .filter_map(|op| clause.find(op).map(|pos| (pos, *op)))
            .min_by_key(|(pos, _)| *pos)
            .map(|(_, op)| {
                (
                    op,
                    match op {
                        "=" => CmpOp::Eq,
                        "!=" => CmpOp::Ne,
                        "<" => CmpOp::Lt,
                        "<=" => CmpOp::Le,
                        ">" => CmpOp::Gt,
                        ">=" => CmpOp::Ge,
                        _ => unreachable!(),
                    },
                )
            })
            .ok_or_else(|| Error::config(format!("no comparison operator in {clause:?}")))?;
        let (name, value) = clause.split_once(op_str).unwrap();
        let name = name.trim();
        let value = value.trim();
        if name.is_empty() {
            return Err(Error::config(format!("empty attribute name in {clause:?}")));
        }
        cmps.push(AttrCmp {
            name: name.to_string(),
            op,
            value: value.to_string(),
        });
    }
    Ok(Predicate::Attrs(cmps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agg_forms() {
        assert_eq!(parse_agg("single:b").unwrap(), AggKind::Single("b".into()));
        assert_eq!(
            parse_agg("max:1,2").unwrap(),
            AggKind::Max(vec!["1".into(), "2".into()])
        );
        assert_eq!(
            parse_agg("nth:1,2,3:2").unwrap(),
            AggKind::NthLargest(vec!["1".into(), "2".into(), "3".into()], 2)
        );
        assert!(parse_agg("median:1").is_err());
        assert!(parse_agg("max:").is_err());
    }

    #[test]
    fn predicate_forms() {
        assert_eq!(parse_predicate("").unwrap(), Predicate::All);
        let p = parse_predicate("parity = even, size >= 3").unwrap();
        match p {
            Predicate::Attrs(cmps) => {
                assert_eq!(cmps.len(), 2);
                assert_eq!(cmps[0].name, "parity");
                assert_eq!(cmps[0].op, CmpOp::Eq);
                assert_eq!(cmps[1].op, CmpOp::Ge);
            }
            _ => panic!(),
        }
        assert!(parse_predicate("parity even").is_err());
    }
}
