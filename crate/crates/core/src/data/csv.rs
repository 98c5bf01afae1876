//! `label,v1,...,vD` files. A first line whose value columns are not all
//! numeric is treated as a header.

use std::path::Path;

use super::{DataError, Dataset};

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))
}

/// Labels become class indices in first-appearance order.
pub fn load_csv(path: &Path) -> Result<Dataset, DataError> {
    parse_csv(&read(path)?, None)
}

/// Loads with a fixed class order; labels outside it are rejected.
pub fn load_csv_with_classes(path: &Path, classes: &[String]) -> Result<Dataset, DataError> {
    parse_csv(&read(path)?, Some(classes))
}

pub fn parse_csv(text: &str, fixed_classes: Option<&[String]>) -> Result<Dataset, DataError> {
    let mut classes: Vec<String> = fixed_classes.map(<[String]>::to_vec).unwrap_or_default();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let label = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        let parsed: Result<Vec<f64>, _> = values.iter().map(|v| v.parse::<f64>()).collect();
        let parsed = match parsed {
            Ok(p) => p,
            Err(_) if labels.is_empty() && dim.is_none() => {
                // header row; it still fixes the column count
                dim = Some(values.len());
                continue;
            }
            Err(_) => {
                let bad = values.iter().find(|v| v.parse::<f64>().is_err()).unwrap_or(&"");
                return Err(DataError::Csv {
                    line: line_no,
                    message: format!("non-numeric value `{bad}`"),
                });
            }
        };
        if parsed.is_empty() {
            return Err(DataError::Csv {
                line: line_no,
                message: "row has a label but no feature values".into(),
            });
        }
        match dim {
            None => dim = Some(parsed.len()),
            Some(d) if d != parsed.len() => {
                return Err(DataError::Csv {
                    line: line_no,
                    message: format!("ragged row: expected {d} values, found {}", parsed.len()),
                })
            }
            _ => {}
        }
        if let Some(bad) = parsed.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Csv {
                line: line_no,
                message: format!("non-finite value {bad}"),
            });
        }
        let class = match classes.iter().position(|c| c == label) {
            Some(c) => c,
            None if fixed_classes.is_some() => {
                return Err(DataError::Csv {
                    line: line_no,
                    message: format!("unknown label `{label}`"),
                })
            }
            None => {
                classes.push(label.to_string());
                classes.len() - 1
            }
        };
        labels.push(class);
        features.extend(parsed);
    }
    if labels.is_empty() {
        return Err(DataError::Csv {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let dim = dim.unwrap_or_default();
    Dataset::new(features, vec![dim], labels, classes)
}
