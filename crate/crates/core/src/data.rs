//! Tabular data handling: CSV ingestion, train/validation splits, one-hot
//! encoding into atomic feature groups, and SMOTE rebalancing.
//!
//! Every operation here is a pure function of its inputs and an explicit seed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            other => Err(Error::InvalidParameter(format!(
                "unknown task `{other}` (expected \"classification\" or \"regression\")"
            ))),
        }
    }
}

/// Predictor matrix, column names and target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    x: Array2<f64>,
    y: Array1<f64>,
    task: Task,
}

impl Dataset {
    pub fn new(columns: Vec<String>, x: Array2<f64>, y: Array1<f64>, task: Task) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != columns.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature columns but {} column names",
                x.ncols(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if task == Task::Classification {
            if let Some((row, &value)) = y.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
                return Err(Error::NonBinaryTarget { row, value });
            }
        }
        Ok(Self { columns, x, y, task })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Rows in the given order; indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            task: self.task,
        }
    }

    /// Count of rows per class, `(zeros, ones)`. Meaningless for regression.
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.y.iter().filter(|v| **v == 1.0).count();
        (self.y.len() - ones, ones)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub members: Vec<String>,
    #[serde(default)]
    pub fixed: bool,
}

impl FeatureGroup {
    pub fn singleton(column: impl Into<String>) -> Self {
        let column = column.into();
        Self {
            name: column.clone(),
            members: vec![column],
            fixed: false,
        }
    }
}

/// Ordered feature groups; each group is kept or removed as a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    groups: Vec<FeatureGroup>,
}

impl FeatureSet {
    pub fn new(groups: Vec<FeatureGroup>) -> Self {
        Self { groups }
    }

    /// One group per column.
    pub fn singletons(d: &Dataset) -> Self {
        Self::new(d.columns().iter().map(FeatureGroup::singleton).collect())
    }

    /// Bind listed dummy columns into named groups; every other column
    /// becomes a singleton group. A group takes the position of its first
    /// member column.
    pub fn with_dummy_groups(d: &Dataset, dummies: &[(String, Vec<String>)]) -> Result<Self> {
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for (gi, (name, members)) in dummies.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidFeatureSet(format!("dummy group `{name}` is empty")));
            }
            for m in members {
                if d.column_index(m).is_none() {
                    return Err(Error::ColumnNotFound(m.clone()));
                }
                if owner.insert(m.as_str(), gi).is_some() {
                    return Err(Error::InvalidFeatureSet(format!(
                        "column `{m}` appears in more than one dummy group"
                    )));
                }
            }
        }
        let mut emitted = vec![false; dummies.len()];
        let mut groups = Vec::new();
        for c in d.columns() {
            match owner.get(c.as_str()) {
                Some(&gi) if !emitted[gi] => {
                    emitted[gi] = true;
                    groups.push(FeatureGroup {
                        name: dummies[gi].0.clone(),
                        members: dummies[gi].1.clone(),
                        fixed: false,
                    });
                }
                Some(_) => {}
                None => groups.push(FeatureGroup::singleton(c)),
            }
        }
        Ok(Self::new(groups))
    }

    /// Mark groups as exempt from elimination. Names may refer to a group
    /// name or to any member column of a group.
    pub fn fix(mut self, names: &[String]) -> Result<Self> {
        for name in names {
            let group = self
                .groups
                .iter_mut()
                .find(|g| &g.name == name || g.members.contains(name))
                .ok_or_else(|| Error::ColumnNotFound(name.clone()))?;
            group.fixed = true;
        }
        Ok(self)
    }

    pub fn groups(&self) -> &[FeatureGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn removable_count(&self) -> usize {
        self.groups.iter().filter(|g| !g.fixed).count()
    }

    /// Checks that the groups partition the dataset's columns and that at
    /// least one group can be eliminated.
    pub fn validate(&self, d: &Dataset) -> Result<()> {
        let mut seen = HashSet::new();
        let mut names = HashSet::new();
        for g in &self.groups {
            if !names.insert(g.name.as_str()) {
                return Err(Error::InvalidFeatureSet(format!("duplicate group name `{}`", g.name)));
            }
            if g.members.is_empty() {
                return Err(Error::InvalidFeatureSet(format!("group `{}` is empty", g.name)));
            }
            for m in &g.members {
                if d.column_index(m).is_none() {
                    return Err(Error::ColumnNotFound(m.clone()));
                }
                if !seen.insert(m.as_str()) {
                    return Err(Error::InvalidFeatureSet(format!(
                        "column `{m}` belongs to more than one group"
                    )));
                }
            }
        }
        if let Some(missing) = d.columns().iter().find(|c| !seen.contains(c.as_str())) {
            return Err(Error::InvalidFeatureSet(format!(
                "column `{missing}` is not assigned to any group"
            )));
        }
        if self.removable_count() == 0 {
            return Err(Error::InvalidFeatureSet(
                "at least one non-fixed group is required".into(),
            ));
        }
        Ok(())
    }

    /// Column indices (in dataset order) covered by the given groups.
    pub fn column_indices(&self, d: &Dataset, group_ids: &[usize]) -> Vec<usize> {
        let wanted: HashSet<&str> = group_ids
            .iter()
            .flat_map(|&gi| self.groups[gi].members.iter().map(String::as_str))
            .collect();
        d.columns()
            .iter()
            .enumerate()
            .filter(|(_, c)| wanted.contains(c.as_str()))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train_fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction, seed })
    }
}

/// Header plus raw string cells, as read from disk.
#[derive(Debug, Clone)]
pub(crate) struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub(crate) fn read_table(path: &Path) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    Ok(RawTable { headers, rows })
}

impl RawTable {
    /// Converts to a dataset, one-hot encoding the listed (possibly
    /// non-numeric) columns. Row numbers in errors are 1-based data rows.
    pub(crate) fn into_dataset(
        self,
        target: &str,
        task: Task,
        categorical: &[String],
    ) -> Result<(Dataset, FeatureSet)> {
        let target_idx = self
            .headers
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| Error::MissingTarget(target.to_string()))?;
        for c in categorical {
            if c == target || !self.headers.contains(c) {
                return Err(Error::ColumnNotFound(c.clone()));
            }
        }
        let cat: HashSet<&str> = categorical.iter().map(String::as_str).collect();

        for (r, row) in self.rows.iter().enumerate() {
            for (h, cell) in self.headers.iter().zip(row) {
                if cell.is_empty() {
                    return Err(Error::MissingValue {
                        row: r + 1,
                        column: h.clone(),
                    });
                }
            }
        }

        let parse = |r: usize, col: usize| -> Result<f64> {
            let cell = &self.rows[r][col];
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::NonNumeric {
                row: r + 1,
                column: self.headers[col].clone(),
                value: cell.clone(),
            })
        };

        let n = self.rows.len();
        let mut columns = Vec::new();
        let mut data: Vec<Vec<f64>> = Vec::new();
        let mut groups = Vec::new();
        for (col, name) in self.headers.iter().enumerate() {
            if col == target_idx {
                continue;
            }
            if cat.contains(name.as_str()) {
                let cells: Vec<&str> = self.rows.iter().map(|row| row[col].as_str()).collect();
                let levels = categorical_levels(name, &cells)?;
                let mut members = Vec::with_capacity(levels.len());
                for level in &levels {
                    let dummy = format!("{name}={level}");
                    data.push(cells.iter().map(|c| f64::from(u8::from(c == level))).collect());
                    columns.push(dummy.clone());
                    members.push(dummy);
                }
                groups.push(FeatureGroup {
                    name: name.clone(),
                    members,
                    fixed: false,
                });
            } else {
                data.push((0..n).map(|r| parse(r, col)).collect::<Result<_>>()?);
                columns.push(name.clone());
                groups.push(FeatureGroup::singleton(name));
            }
        }
        let y = (0..n).map(|r| parse(r, target_idx)).collect::<Result<Vec<_>>>()?;
        let x = Array2::from_shape_fn((n, columns.len()), |(r, c)| data[c][r]);
        let d = Dataset::new(columns, x, Array1::from(y), task)?;
        Ok((d, FeatureSet::new(groups)))
    }
}

/// Distinct values of a categorical column, sorted numerically when every
/// value parses as a number and lexicographically otherwise.
fn categorical_levels(column: &str, cells: &[&str]) -> Result<Vec<String>> {
    let distinct: BTreeSet<&str> = cells.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::DegenerateColumn(column.to_string()));
    }
    let mut levels: Vec<&str> = distinct.into_iter().collect();
    if levels.iter().all(|l| l.parse::<f64>().is_ok()) {
        levels.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    Ok(levels.into_iter().map(str::to_string).collect())
}

/// Loads an all-numeric CSV. Missing cells are rejected rather than imputed.
pub fn load_csv(path: impl AsRef<Path>, target: &str, task: Task) -> Result<Dataset> {
    let (d, _) = read_table(path.as_ref())?.into_dataset(target, task, &[])?;
    Ok(d)
}

/// Loads a CSV whose listed categorical columns may hold arbitrary labels;
/// those are one-hot encoded into `<column>=<level>` dummies and returned as
/// feature groups alongside singleton groups for the numeric columns.
pub fn load_csv_encoded(
    path: impl AsRef<Path>,
    target: &str,
    task: Task,
    categorical: &[String],
) -> Result<(Dataset, FeatureSet)> {
    read_table(path.as_ref())?.into_dataset(target, task, categorical)
}

/// Seeded shuffle, then the first `floor(n * train_fraction)` rows become
/// the training partition and the remainder the validation partition.
pub fn train_val_split(d: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cfg = SplitConfig::new(cfg.train_fraction, cfg.seed)?;
    let n = d.n_rows();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    idx.shuffle(&mut rng);
    let n_train = (n as f64 * cfg.train_fraction).floor() as usize;
    let (train, val) = idx.split_at(n_train);
    Ok((d.select_rows(train), d.select_rows(val)))
}

/// Replaces each listed column by one 0/1 dummy per distinct value, in
/// place. Every level is kept. Unlisted columns pass through as singleton
/// groups.
pub fn one_hot_encode(d: &Dataset, categorical: &[String]) -> Result<(Dataset, Vec<FeatureGroup>)> {
    for c in categorical {
        if d.column_index(c).is_none() {
            return Err(Error::ColumnNotFound(c.clone()));
        }
    }
    let cat: HashSet<&str> = categorical.iter().map(String::as_str).collect();
    let n = d.n_rows();
    let mut columns = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    let mut groups = Vec::new();
    for (ci, name) in d.columns().iter().enumerate() {
        let col = d.x().column(ci);
        if !cat.contains(name.as_str()) {
            data.push(col.to_vec());
            columns.push(name.clone());
            groups.push(FeatureGroup::singleton(name));
            continue;
        }
        let mut levels: Vec<f64> = col.to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        if levels.len() < 2 {
            return Err(Error::DegenerateColumn(name.clone()));
        }
        let mut members = Vec::new();
        for level in levels {
            let dummy = format!("{name}={level}");
            data.push(col.iter().map(|v| f64::from(u8::from(*v == level))).collect());
            columns.push(dummy.clone());
            members.push(dummy);
        }
        groups.push(FeatureGroup {
            name: name.clone(),
            members,
            fixed: false,
        });
    }
    let x = Array2::from_shape_fn((n, columns.len()), |(r, c)| data[c][r]);
    let encoded = Dataset::new(columns, x, d.y().clone(), d.task())?;
    Ok((encoded, groups))
}

/// Default neighbour count for [`smote_balance`].
pub const SMOTE_DEFAULT_K: usize = 5;

/// Oversamples the minority class until both classes have equal counts.
///
/// Each synthetic row is `x_i + u * (x_nn - x_i)` with `x_i` a uniformly
/// drawn minority row, `x_nn` one of its `k` nearest minority neighbours by
/// Euclidean distance on the raw columns, and `u` uniform in `[0, 1)`.
/// Columns are not rescaled; callers that need scale-invariant neighbours
/// must standardize first. Synthetic rows are appended after the originals.
pub fn smote_balance(train: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    if train.task() != Task::Classification {
        return Err(Error::TaskMismatch("SMOTE".into(), train.task().name().into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("SMOTE needs k >= 1".into()));
    }
    let (zeros, ones) = train.class_counts();
    if zeros == 0 || ones == 0 {
        return Err(Error::Smote("SMOTE needs both classes present".into()));
    }
    if zeros == ones {
        return Ok(train.clone());
    }
    let (minority_label, n_min, n_maj) = if ones < zeros {
        (1.0, ones, zeros)
    } else {
        (0.0, zeros, ones)
    };
    if n_min <= k {
        return Err(Error::Smote(format!(
            "minority class has {n_min} rows; SMOTE with k = {k} needs more than {k}"
        )));
    }
    let minority: Vec<usize> = (0..train.n_rows())
        .filter(|&r| train.y()[r] == minority_label)
        .collect();
    let x = train.x();
    let neighbours: Vec<Vec<usize>> = (0..minority.len())
        .map(|i| {
            let xi = x.row(minority[i]);
            let mut dist: Vec<(f64, usize)> = (0..minority.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d2 = xi
                        .iter()
                        .zip(x.row(minority[j]).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                    (d2, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let n_new = n_maj - n_min;
    let p = train.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut synth = Array2::<f64>::zeros((n_new, p));
    for mut row in synth.rows_mut() {
        let i = rng.random_range(0..minority.len());
        let j = neighbours[i][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let (xi, xj) = (x.row(minority[i]), x.row(minority[j]));
        for c in 0..p {
            row[c] = xi[c] + u * (xj[c] - xi[c]);
        }
    }
    let x_out = ndarray::concatenate(Axis(0), &[x.view(), synth.view()])
        .expect("column counts agree");
    let mut y_out = train.y().to_vec();
    y_out.extend(std::iter::repeat_n(minority_label, n_new));
    Dataset::new(train.columns().to_vec(), x_out, Array1::from(y_out), Task::Classification)
}
