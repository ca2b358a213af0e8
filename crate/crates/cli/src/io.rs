//! CSV ingestion and emission, seed-file parsing, and summary JSON.
//!
//! Colocated CSV: header `key,<b1>,<b2>,...[,attr:<name>...]`, one row per
//! key, nonnegative decimal weights. Dispersed CSV: header
//! `assignment,key,weight` with strictly positive weights, rows in any
//! order. Seed files (test hook) carry `key,u` or `key,assignment,u`
//! headers; an empty assignment field is the base entry.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use coordsketch_core::model::Attrs;
use coordsketch_core::rank::SeedTable;
use coordsketch_core::{ColocatedDataset, DispersedDataset, KeyId, Summary};

use crate::error::{Error, Result};

pub const SUMMARY_FORMAT: &str = "coordsketch-summary-v1";

fn csv_reader(r: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(r)
}

fn parse_weight(field: &str, row: usize) -> Result<f64> {
    let w: f64 = field
        .parse()
        .map_err(|_| Error::data(row, format!("cannot parse weight {field:?}")))?;
    if !w.is_finite() || w < 0.0 {
        return Err(Error::data(row, format!("negative or non-finite weight {field}")));
    }
    Ok(w)
}

/// Parse colocated CSV. Row numbers in errors are 1-based file lines
/// (header is line 1).
pub fn read_colocated_csv(reader: impl Read) -> Result<ColocatedDataset> {
    let mut rdr = csv_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(1, e.to_string()))?
        .clone();
    let mut cols = header.iter();
    if cols.next() != Some("key") {
        return Err(Error::data(1, "colocated header must start with `key`"));
    }
    let mut assignments: Vec<String> = Vec::new();
    let mut attr_names: Vec<String> = Vec::new();
    for c in cols {
        if let Some(name) = c.strip_prefix("attr:") {
            if name.is_empty() {
                return Err(Error::data(1, "empty attribute name"));
            }
            attr_names.push(name.to_string());
        } else if !attr_names.is_empty() {
            return Err(Error::data(
                1,
                "assignment columns must precede attr: columns",
            ));
        } else if c.is_empty() {
            return Err(Error::data(1, "empty assignment name"));
        } else {
            assignments.push(c.to_string());
        }
    }
    if assignments.is_empty() {
        return Err(Error::data(1, "no assignment columns"));
    }
    let mut rows: Vec<(KeyId, Vec<f64>, Attrs)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::data(row, e.to_string()))?;
        if record.len() != 1 + assignments.len() + attr_names.len() {
            return Err(Error::data(
                row,
                format!(
                    "expected {} fields, found {}",
                    1 + assignments.len() + attr_names.len(),
                    record.len()
                ),
            ));
        }
        let key = KeyId::new(record.get(0).unwrap());
        if key.as_str().is_empty() {
            return Err(Error::data(row, "empty key"));
        }
        let mut wv = Vec::with_capacity(assignments.len());
        for b in 0..assignments.len() {
            wv.push(parse_weight(record.get(1 + b).unwrap(), row)?);
        }
        let mut attrs = Attrs::new();
        for (a, name) in attr_names.iter().enumerate() {
            let v = record.get(1 + assignments.len() + a).unwrap();
            if !v.is_empty() {
                attrs.insert(name.clone(), v.to_string());
            }
        }
        rows.push((key, wv, attrs));
    }
    ColocatedDataset::new(assignments, rows).map_err(Error::from)
}

pub fn write_colocated_csv(ds: &ColocatedDataset, mut w: impl Write) -> Result<()> {
    let mut attr_names: Vec<String> = Vec::new();
    for (key, _) in ds.rows() {
        if let Some(attrs) = ds.attrs(key) {
            for name in attrs.keys() {
                if !attr_names.contains(name) {
                    attr_names.push(name.clone());
                }
            }
        }
    }
    attr_names.sort();
    write!(w, "key")?;
    for b in ds.assignments() {
        write!(w, ",{b}")?;
    }
    for a in &attr_names {
        write!(w, ",attr:{a}")?;
    }
    writeln!(w)?;
    for (key, wv) in ds.rows() {
        write!(w, "{key}")?;
        for v in wv {
            write!(w, ",{v}")?;
        }
        for a in &attr_names {
            let empty = String::new();
            let val = ds.attrs(key).and_then(|m| m.get(a)).unwrap_or(&empty);
            write!(w, ",{val}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parse dispersed CSV (`assignment,key,weight`).
pub fn read_dispersed_csv(reader: impl Read) -> Result<DispersedDataset> {
    let mut rdr = csv_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(1, e.to_string()))?
        .clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields != ["assignment", "key", "weight"] {
        return Err(Error::data(
            1,
            "dispersed header must be `assignment,key,weight`",
        ));
    }
    let mut assignments: Vec<String> = Vec::new();
    let mut records: Vec<(String, KeyId, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::data(row, e.to_string()))?;
        let b = record.get(0).unwrap_or("").to_string();
        let key = KeyId::new(record.get(1).unwrap_or(""));
        let w = parse_weight(record.get(2).unwrap_or(""), row)?;
        if !(w > 0.0) {
            return Err(Error::data(row, "dispersed weights must be strictly positive"));
        }
        if b.is_empty() || key.as_str().is_empty() {
            return Err(Error::data(row, "empty assignment or key"));
        }
        if !assignments.contains(&b) {
            assignments.push(b.clone());
        }
        records.push((b, key, w));
    }
    if assignments.is_empty() {
        return Err(Error::data(1, "no records"));
    }
    DispersedDataset::from_records(assignments, records, BTreeMap::new()).map_err(Error::from)
}

pub fn write_dispersed_csv(ds: &DispersedDataset, mut w: impl Write) -> Result<()> {
    writeln!(w, "assignment,key,weight")?;
    for b in ds.assignments() {
        for (key, weight) in ds.stream(b)? {
            writeln!(w, "{b},{key},{weight}")?;
        }
    }
    Ok(())
}

/// Parse a seed file (test hook): `key,u` or `key,assignment,u`; rows with
/// an empty assignment field set a key's base seed.
pub fn read_seed_file(reader: impl Read) -> Result<SeedTable> {
    let mut rdr = csv_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(1, e.to_string()))?
        .clone();
    let fields: Vec<&str> = header.iter().collect();
    let with_assignment = match fields.as_slice() {
        ["key", "u"] => false,
        ["key", "assignment", "u"] => true,
        _ => {
            return Err(Error::data(
                1,
                "seed file header must be `key,u` or `key,assignment,u`",
            ))
        }
    };
    let mut table = SeedTable::default();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::data(row, e.to_string()))?;
        let key = record.get(0).unwrap_or("");
        let (assignment, u_field) = if with_assignment {
            (record.get(1).unwrap_or(""), record.get(2).unwrap_or(""))
        } else {
            ("", record.get(1).unwrap_or(""))
        };
        let u: f64 = u_field
            .parse()
            .map_err(|_| Error::data(row, format!("cannot parse seed {u_field:?}")))?;
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::data(row, format!("seed {u} outside (0,1)")));
        }
        if key.is_empty() {
            return Err(Error::data(row, "empty key"));
        }
        if assignment.is_empty() {
            table.insert(key, u);
        } else {
            table.insert_for(key, assignment, u);
        }
    }
    Ok(table)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SummaryDoc {
    format: String,
    summary: Summary,
}

/// Serialize a summary as a self-describing JSON document. Floats are
/// emitted as shortest-round-trip decimals and parse back bit-exactly; the
/// +∞ rank sentinel is the string "inf".
pub fn summary_to_json(summary: &Summary) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SummaryDoc {
        format: SUMMARY_FORMAT.to_string(),
        summary: summary.clone(),
    })?)
}

pub fn summary_from_json(text: &str) -> Result<Summary> {
    let doc: SummaryDoc = serde_json::from_str(text)?;
    if doc.format != SUMMARY_FORMAT {
        return Err(Error::config(format!(
            "unsupported summary format {:?} (expected {SUMMARY_FORMAT:?})",
            doc.format
        )));
    }
    Ok(doc.summary)
}
