//! Dataset files: headerless CSV with unsigned integer columns
//! `start,end` and an optional third `id` column. When ids are absent, rows
//! are numbered sequentially from zero.

use std::collections::HashSet;
use std::path::Path;

use super::WorkloadError;
use crate::types::{Interval, Relation};
use crate::TupleId;

pub fn load_relation(path: impl AsRef<Path>) -> Result<Relation, WorkloadError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| WorkloadError::Csv { path: name.clone(), source: Box::new(e) })?;

    let mut items = Vec::new();
    let mut seen: HashSet<TupleId> = HashSet::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record =
            record.map_err(|e| WorkloadError::Csv { path: name.clone(), source: Box::new(e) })?;
        let invalid = |message: String| WorkloadError::InvalidRow {
            path: name.clone(),
            row,
            message,
        };
        if record.len() < 2 || record.len() > 3 {
            return Err(invalid(format!("expected 2 or 3 columns, found {}", record.len())));
        }
        let start: u64 = record[0]
            .parse()
            .map_err(|e| invalid(format!("bad start `{}`: {e}", &record[0])))?;
        let end: u64 = record[1]
            .parse()
            .map_err(|e| invalid(format!("bad end `{}`: {e}", &record[1])))?;
        if start >= end {
            return Err(invalid(format!("start {start} is not before end {end}")));
        }
        let id: TupleId = if record.len() == 3 {
            record[2]
                .parse()
                .map_err(|e| invalid(format!("bad id `{}`: {e}", &record[2])))?
        } else {
            idx as TupleId
        };
        if !seen.insert(id) {
            return Err(invalid(format!("duplicate id {id}")));
        }
        items.push((Interval::new(start, end), id));
    }
    if items.is_empty() {
        return Err(WorkloadError::EmptyFile { path: name });
    }
    Ok(Relation::new(items))
}

pub fn save_relation(relation: &Relation, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| WorkloadError::Csv { path: name.clone(), source: Box::new(e) })?;
    for (interval, id) in relation.iter() {
        writer
            .write_record([
                interval.start.to_string(),
                interval.end.to_string(),
                id.to_string(),
            ])
            .map_err(|e| WorkloadError::Csv { path: name.clone(), source: Box::new(e) })?;
    }
    writer
        .flush()
        .map_err(|e| WorkloadError::Io { path: name, source: e })?;
    Ok(())
}
