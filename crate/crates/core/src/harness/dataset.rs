use std::path::Path;

use crate::error::{Error, Result};
use crate::wdro::SupervisedDataset;

/// Reads a classification dataset: one row per sample, feature columns
/// followed by a label in `{-1, +1}`. A first row that does not parse as
/// numbers is taken as a header.
pub fn ingest_csv(path: &Path) -> Result<SupervisedDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<SupervisedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if features.is_empty() && width.is_none() => {
                // header row
                width = Some(rec.len());
                continue;
            }
            Err(e) => {
                return Err(Error::Data {
                    line,
                    message: format!("non-numeric field: {e}"),
                })
            }
        };
        if values.len() < 2 {
            return Err(Error::Data {
                line,
                message: "need at least one feature column and a label".into(),
            });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Data {
                    line,
                    message: format!("expected {w} columns, found {}", values.len()),
                })
            }
            _ => width = Some(values.len()),
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data {
                line,
                message: format!("non-finite value {v}"),
            });
        }
        let (f, l) = values.split_at(values.len() - 1);
        if l[0] != 1.0 && l[0] != -1.0 {
            return Err(Error::Data {
                line,
                message: format!("label {} is not -1 or +1", l[0]),
            });
        }
        features.push(f.to_vec());
        labels.push(l[0]);
    }
    if labels.is_empty() {
        return Err(Error::Data {
            line: 0,
            message: "no data rows".into(),
        });
    }
    SupervisedDataset::new(features, labels).map_err(|e| Error::Data {
        line: 0,
        message: e.to_string(),
    })
}

/// Writes `data` with a header `x1,...,x{d-1},label`. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(path: &Path, data: &SupervisedDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=data.feature_dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (phi, psi) in data.rows() {
        let mut row: Vec<String> = phi.iter().map(|v| format!("{v:?}")).collect();
        row.push(format!("{psi}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dense matrix (one row per line, no header).
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        let row: Vec<f64> = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Data {
                    line,
                    message: format!("{e}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != row.len() {
                return Err(Error::Data {
                    line,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data {
            line: 0,
            message: "empty matrix file".into(),
        });
    }
    Ok(rows)
}
