//! Preparation of the IBM Telco customer churn table (the 33-column CSV
//! export with coordinates and CLTV).
//!
//! Keeps 22 explanatory variables, drops rows with a blank `TotalCharges`,
//! maps yes/no style columns to 0/1 and one-hot encodes the multi-class
//! columns into one feature group each. Header names are matched with
//! whitespace removed, so both `Tenure Months` and `TenureMonths` work.

use std::path::Path;

use crate::data::{read_table, Dataset, FeatureSet, RawTable, Task};
use crate::error::{Error, Result};

pub const TARGET: &str = "ChurnValue";

pub const NUMERIC: [&str; 6] = [
    "Latitude",
    "Longitude",
    "TenureMonths",
    "MonthlyCharges",
    "TotalCharges",
    "CLTV",
];

pub const BINARY: [&str; 6] = [
    "Gender",
    "SeniorCitizen",
    "Partner",
    "Dependents",
    "PhoneService",
    "PaperlessBilling",
];

pub const MULTICLASS: [&str; 10] = [
    "MultipleLines",
    "InternetService",
    "OnlineSecurity",
    "OnlineBackup",
    "DeviceProtection",
    "TechSupport",
    "StreamingTV",
    "StreamingMovies",
    "Contract",
    "PaymentMethod",
];

#[derive(Debug, Clone)]
pub struct TelcoData {
    pub dataset: Dataset,
    pub features: FeatureSet,
    pub rows_read: usize,
    /// Rows removed for a blank `TotalCharges`.
    pub rows_dropped: usize,
}

fn binary_value(column: &str, row: usize, cell: &str) -> Result<&'static str> {
    match cell.to_ascii_lowercase().as_str() {
        "yes" | "male" | "1" => Ok("1"),
        "no" | "female" | "0" => Ok("0"),
        _ => Err(Error::NonNumeric {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

pub(crate) fn prepare(raw: RawTable) -> Result<TelcoData> {
    let compact: Vec<String> = raw.headers.iter().map(|h| h.split_whitespace().collect()).collect();
    let find = |name: &str| compact.iter().position(|h| h == name);
    let wanted: Vec<&str> = NUMERIC.iter().chain(&BINARY).chain(&MULTICLASS).copied().collect();
    let missing: Vec<String> = wanted
        .iter()
        .chain(std::iter::once(&TARGET))
        .filter(|c| find(c).is_none())
        .map(|c| format!("missing Telco column `{c}`"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(missing));
    }
    let source: Vec<usize> = wanted.iter().map(|c| find(c).expect("checked")).collect();
    let target_col = find(TARGET).expect("checked");
    let total_charges = find("TotalCharges").expect("checked");

    let rows_read = raw.rows.len();
    let mut rows = Vec::with_capacity(rows_read);
    for (r, row) in raw.rows.iter().enumerate() {
        if row[total_charges].is_empty() {
            continue;
        }
        let mut out = Vec::with_capacity(wanted.len() + 1);
        for (name, &col) in wanted.iter().zip(&source) {
            let cell = row[col].as_str();
            if BINARY.contains(name) {
                out.push(binary_value(name, r + 1, cell)?.to_string());
            } else {
                out.push(cell.to_string());
            }
        }
        out.push(binary_value(TARGET, r + 1, &row[target_col])?.to_string());
        rows.push(out);
    }
    let rows_dropped = rows_read - rows.len();
    let headers = wanted.iter().map(|s| s.to_string()).chain(std::iter::once(TARGET.to_string())).collect();
    let categorical: Vec<String> = MULTICLASS.iter().map(|s| s.to_string()).collect();
    let (dataset, features) = RawTable { headers, rows }.into_dataset(TARGET, Task::Classification, &categorical)?;
    Ok(TelcoData {
        dataset,
        features,
        rows_read,
        rows_dropped,
    })
}

/// Reads and prepares a Telco CSV export.
pub fn load_telco(path: impl AsRef<Path>) -> Result<TelcoData> {
    prepare(read_table(path.as_ref())?)
}
