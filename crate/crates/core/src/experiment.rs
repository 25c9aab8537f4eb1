//! JSON-configured experiments: load data, optionally rebalance, run the
//! comparison and write the result files.
//!
//! A config looks like
//!
//! ```json
//! {
//!   "data": {"path": "churn.csv", "train_fraction": 0.8},
//!   "target": "churned",
//!   "task": "classification",
//!   "categorical": ["plan"],
//!   "models": [{"kind": "logistic"}, {"kind": "forest", "n_trees": 100}],
//!   "criterion": "f1",
//!   "agreeability": "cohen_kappa",
//!   "seed": 7,
//!   "smote": {"enabled": true, "k": 5}
//! }
//! ```
//!
//! `data` may instead name separate `train_path` and `val_path` files.
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agreeability::AgreeMetric;
use crate::data::{self, Dataset, FeatureGroup, FeatureSet, RawTable, SplitConfig, Task, SMOTE_DEFAULT_K};
use crate::error::{Error, Result};
use crate::metrics::Criterion;
use crate::models::{ModelKind, ModelSpec, TrainParams};
use crate::report::{export_results, ExportFormat};
use crate::search::{compare_models_with_progress, CompareOptions, ComparisonRun, IterationResult, DEFAULT_THRESHOLD};
use crate::seeds::mix;
use crate::telco;

pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const MANIFEST_JSON: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DataSource {
    Single {
        path: PathBuf,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
    Split {
        train_path: PathBuf,
        val_path: PathBuf,
    },
}

fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Numeric CSV, with listed categorical columns one-hot encoded.
    #[default]
    Generic,
    /// The IBM Telco churn export, prepared by [`crate::telco`].
    Telco,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DummyGroup {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_smote_k")]
    pub k: usize,
}

fn default_smote_k() -> usize {
    SMOTE_DEFAULT_K
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            k: SMOTE_DEFAULT_K,
        }
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    pub format: DataFormat,
    pub target: String,
    pub task: Task,
    pub categorical: Vec<String>,
    pub dummy_groups: Vec<DummyGroup>,
    pub fixed: Vec<String>,
    pub models: [ModelSpec; 2],
    pub criterion: Criterion,
    pub agreeability: AgreeMetric,
    pub train_params: Option<TrainParams>,
    pub threshold: f64,
    pub seed: u64,
    pub smote: SmoteConfig,
    pub out_dir: PathBuf,
}

/// Config as written by the user, before name resolution.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    data: Option<serde_json::Value>,
    #[serde(default)]
    format: DataFormat,
    target: Option<String>,
    task: Option<String>,
    #[serde(default)]
    categorical: Vec<String>,
    #[serde(default)]
    dummy_groups: Vec<DummyGroup>,
    #[serde(default)]
    fixed: Vec<String>,
    #[serde(default)]
    models: Vec<serde_json::Value>,
    criterion: Option<String>,
    agreeability: Option<String>,
    train_params: Option<serde_json::Value>,
    threshold: Option<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    smote: SmoteConfig,
    out_dir: Option<PathBuf>,
}

fn detail(e: Error) -> String {
    match e {
        Error::InvalidParameter(s) => s,
        other => other.to_string(),
    }
}

impl RunConfig {
    /// Parses and validates a config, reporting every problem found rather
    /// than stopping at the first. Relative paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let mut errs = Vec::new();

        let data = match raw.data {
            None => {
                errs.push("field `data`: required".to_string());
                None
            }
            Some(v) => match serde_json::from_value::<DataSource>(v) {
                Ok(d) => Some(d),
                Err(_) => {
                    errs.push(
                        "field `data`: expected {\"path\", \"train_fraction\"} or {\"train_path\", \"val_path\"}".into(),
                    );
                    None
                }
            },
        };
        let data = data.map(|d| match d {
            DataSource::Single { path, train_fraction } => {
                if let Err(e) = SplitConfig::new(train_fraction, 0) {
                    errs.push(format!("field `data.train_fraction`: {}", detail(e)));
                }
                DataSource::Single {
                    path: base.join(path),
                    train_fraction,
                }
            }
            DataSource::Split { train_path, val_path } => DataSource::Split {
                train_path: base.join(train_path),
                val_path: base.join(val_path),
            },
        });
        if let Some(d) = &data {
            let paths: Vec<&PathBuf> = match d {
                DataSource::Single { path, .. } => vec![path],
                DataSource::Split { train_path, val_path } => vec![train_path, val_path],
            };
            for p in paths {
                if !p.is_file() {
                    errs.push(format!("field `data`: file `{}` does not exist", p.display()));
                }
            }
        }

        let task = match (raw.format, raw.task.as_deref()) {
            (DataFormat::Telco, None) => Some(Task::Classification),
            (_, None) => {
                errs.push("field `task`: required; valid options: \"classification\", \"regression\"".into());
                None
            }
            (_, Some(t)) => match Task::from_str(t) {
                Ok(t) => Some(t),
                Err(e) => {
                    errs.push(format!("field `task`: {}", detail(e)));
                    None
                }
            },
        };
        let target = match (raw.format, raw.target) {
            (DataFormat::Telco, None) => telco::TARGET.to_string(),
            (_, Some(t)) => t,
            (DataFormat::Generic, None) => {
                errs.push("field `target`: required".into());
                String::new()
            }
        };
        if raw.format == DataFormat::Telco {
            if target != telco::TARGET {
                errs.push(format!("field `target`: Telco data always uses `{}`", telco::TARGET));
            }
            if task == Some(Task::Regression) {
                errs.push("field `task`: Telco data is a classification task".into());
            }
            if !raw.categorical.is_empty() {
                errs.push("field `categorical`: Telco data encodes its own categorical columns".into());
            }
        }

        let criterion = match raw.criterion.as_deref().map(Criterion::from_str) {
            None => {
                let options: Vec<_> = Criterion::ALL.iter().map(|c| format!("\"{}\"", c.name())).collect();
                errs.push(format!("field `criterion`: required; valid options: {}", options.join(", ")));
                None
            }
            Some(Err(e)) => {
                errs.push(format!("field `criterion`: {}", detail(e)));
                None
            }
            Some(Ok(c)) => Some(c),
        };
        let agreeability = match raw.agreeability.as_deref() {
            None => task.map(|t| match t {
                Task::Classification => AgreeMetric::CohenKappa,
                Task::Regression => AgreeMetric::Pearson,
            }),
            Some(s) => match AgreeMetric::from_str(s) {
                Ok(a) => Some(a),
                Err(e) => {
                    errs.push(format!("field `agreeability`: {}", detail(e)));
                    None
                }
            },
        };
        if let Some(t) = task {
            if let Some(Err(e)) = criterion.map(|c| c.check_task(t)) {
                errs.push(format!("field `criterion`: {e}"));
            }
            if let Some(Err(e)) = agreeability.map(|a| a.check_task(t)) {
                errs.push(format!("field `agreeability`: {e}"));
            }
        }

        if raw.models.len() != 2 {
            errs.push(format!("field `models`: exactly two model specs are required, got {}", raw.models.len()));
        }
        let mut models = Vec::new();
        for (i, v) in raw.models.into_iter().enumerate() {
            match serde_json::from_value::<ModelSpec>(v) {
                Ok(m) => {
                    if let Err(e) = m.validate() {
                        errs.push(format!("field `models[{i}]`: {}", detail(e)));
                    }
                    if task.is_some_and(|t| t != m.task()) {
                        errs.push(format!(
                            "field `models[{i}]`: a {} model does not fit a {} task",
                            m.kind_name(),
                            task.expect("checked").name()
                        ));
                    }
                    models.push(m);
                }
                Err(e) => errs.push(format!("field `models[{i}]`: {e}")),
            }
        }

        let train_params = match raw.train_params.map(serde_json::from_value::<TrainParams>) {
            None => None,
            Some(Err(e)) => {
                errs.push(format!("field `train_params`: {e}"));
                None
            }
            Some(Ok(p)) => {
                if let Err(e) = p.validate() {
                    errs.push(format!("field `train_params`: {}", detail(e)));
                }
                Some(p)
            }
        };
        if train_params.is_none() && models.iter().any(|m| matches!(m.kind, ModelKind::LayeredNet(_))) {
            errs.push("field `train_params`: required when a model is a layered_net".into());
        }

        let threshold = raw.threshold.unwrap_or(DEFAULT_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            errs.push(format!("field `threshold`: must lie in [0, 1], got {threshold}"));
        }
        if raw.smote.enabled {
            if raw.smote.k == 0 {
                errs.push("field `smote.k`: must be positive".into());
            }
            if task == Some(Task::Regression) {
                errs.push("field `smote`: only applies to classification".into());
            }
        }
        for g in &raw.dummy_groups {
            if g.members.is_empty() {
                errs.push(format!("field `dummy_groups`: group `{}` has no members", g.name));
            }
        }

        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let [m1, m2]: [ModelSpec; 2] = models.try_into().expect("two models checked");
        Ok(RunConfig {
            data: data.expect("checked"),
            format: raw.format,
            target,
            task: task.expect("checked"),
            categorical: raw.categorical,
            dummy_groups: raw.dummy_groups,
            fixed: raw.fixed,
            models: [m1, m2],
            criterion: criterion.expect("checked"),
            agreeability: agreeability.expect("checked"),
            train_params,
            threshold,
            seed: raw.seed,
            smote: raw.smote,
            out_dir: base.join(raw.out_dir.unwrap_or_else(|| PathBuf::from("results"))),
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn options(&self) -> CompareOptions {
        CompareOptions {
            criterion: self.criterion,
            agree_metric: self.agreeability,
            threshold: self.threshold,
            seed: self.seed,
            params: self.train_params.clone(),
        }
    }
}

/// Prepared inputs of an experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub val: Dataset,
    pub features: FeatureSet,
    /// Rows appended to the training set by SMOTE.
    pub synthetic_rows: usize,
}

fn read_raw(cfg: &RunConfig) -> Result<(RawTable, Option<usize>)> {
    match &cfg.data {
        DataSource::Single { path, .. } => Ok((data::read_table(path)?, None)),
        DataSource::Split { train_path, val_path } => {
            let mut train = data::read_table(train_path)?;
            let val = data::read_table(val_path)?;
            if train.headers != val.headers {
                return Err(Error::Config(vec![format!(
                    "field `data`: `{}` and `{}` have different headers",
                    train_path.display(),
                    val_path.display()
                )]));
            }
            let n_train = train.rows.len();
            train.rows.extend(val.rows);
            Ok((train, Some(n_train)))
        }
    }
}

/// Loads, encodes, groups, splits and (optionally) rebalances the data.
pub fn prepare_data(cfg: &RunConfig) -> Result<PreparedData> {
    let (raw, split_at) = read_raw(cfg)?;
    let (dataset, encoded) = match cfg.format {
        DataFormat::Telco => {
            let t = telco::prepare(raw)?;
            (t.dataset, t.features)
        }
        DataFormat::Generic => {
            let mut errs = Vec::new();
            if !raw.headers.contains(&cfg.target) {
                errs.push(format!("field `target`: column `{}` not found", cfg.target));
            }
            for c in &cfg.categorical {
                if !raw.headers.contains(c) {
                    errs.push(format!("field `categorical`: column `{c}` not found"));
                }
            }
            if !errs.is_empty() {
                return Err(Error::Config(errs));
            }
            raw.into_dataset(&cfg.target, cfg.task, &cfg.categorical)?
        }
    };

    let mut dummies: Vec<(String, Vec<String>)> = encoded
        .groups()
        .iter()
        .filter(|g| g.members.len() > 1 || g.members[0] != g.name)
        .map(|g| (g.name.clone(), g.members.clone()))
        .collect();
    let mut errs = Vec::new();
    for g in &cfg.dummy_groups {
        for m in &g.members {
            if dataset.column_index(m).is_none() {
                errs.push(format!("field `dummy_groups`: column `{m}` of group `{}` not found", g.name));
            }
        }
        dummies.push((g.name.clone(), g.members.clone()));
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let grouped = FeatureSet::with_dummy_groups(&dataset, &dummies).map_err(|e| Error::Config(vec![format!("field `dummy_groups`: {e}")]))?;
    let unknown: Vec<String> = cfg
        .fixed
        .iter()
        .filter(|n| !grouped.groups().iter().any(|g: &FeatureGroup| &g.name == *n || g.members.contains(n)))
        .map(|n| format!("field `fixed`: `{n}` is neither a group nor a column"))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Config(unknown));
    }
    let features = grouped.fix(&cfg.fixed)?;
    features.validate(&dataset).map_err(|e| Error::Config(vec![format!("feature groups: {e}")]))?;

    let (train, val) = match (split_at, &cfg.data) {
        (Some(n), _) => {
            let all: Vec<usize> = (0..dataset.n_rows()).collect();
            (dataset.select_rows(&all[..n]), dataset.select_rows(&all[n..]))
        }
        (None, DataSource::Single { train_fraction, .. }) => {
            data::train_val_split(&dataset, &SplitConfig::new(*train_fraction, cfg.seed)?)?
        }
        (None, DataSource::Split { .. }) => unreachable!("split sources always report a split point"),
    };
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train, synthetic_rows) = if cfg.smote.enabled {
        let before = train.n_rows();
        let balanced = data::smote_balance(&train, cfg.smote.k, mix(&[cfg.seed, 0x5_307e]))?;
        let added = balanced.n_rows() - before;
        (balanced, added)
    } else {
        (train, 0)
    };
    Ok(PreparedData {
        train,
        val,
        features,
        synthetic_rows,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    library: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    threads: usize,
    n_train: usize,
    n_validation: usize,
    synthetic_rows: usize,
    n_fits: usize,
    wall_time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub run: ComparisonRun,
    pub results_json: PathBuf,
    pub results_csv: PathBuf,
    pub manifest: PathBuf,
}

/// Runs one experiment end to end and writes `results.json`,
/// `results.csv` and `run_manifest.json` into the config's output directory.
pub fn run_experiment(cfg: &RunConfig, on_iteration: impl FnMut(&IterationResult)) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let prepared = prepare_data(cfg).map_err(|e| if e.is_config() { e } else { Error::in_stage("data preparation")(e) })?;
    let run = compare_models_with_progress(
        &cfg.models[0],
        &cfg.models[1],
        &prepared.train,
        &prepared.val,
        &prepared.features,
        &cfg.options(),
        on_iteration,
    )
    .map_err(Error::in_stage("comparison"))?;

    let write = |name: &str, text: String| -> Result<PathBuf> {
        let path = cfg.out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(&cfg.out_dir, e))
        .map_err(Error::in_stage("writing results"))?;
    let results_json = write(RESULTS_JSON, export_results(&run, ExportFormat::Json)).map_err(Error::in_stage("writing results"))?;
    let results_csv = write(RESULTS_CSV, export_results(&run, ExportFormat::Csv)).map_err(Error::in_stage("writing results"))?;
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        threads: rayon::current_num_threads(),
        n_train: prepared.train.n_rows(),
        n_validation: prepared.val.n_rows(),
        synthetic_rows: prepared.synthetic_rows,
        n_fits: run.n_fits,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let manifest = write(MANIFEST_JSON, serde_json::to_string_pretty(&manifest)?).map_err(Error::in_stage("writing results"))?;
    Ok(ExperimentOutput {
        run,
        results_json,
        results_csv,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_csv(dir: &Path) -> PathBuf {
        let path = dir.join("toy.csv");
        let mut text = String::from("a,b,plan,y\n");
        for i in 0..60 {
            let a = (i as f64 * 0.37).sin();
            let b = (i as f64 * 1.3).cos();
            let plan = ["basic", "plus", "pro"][i % 3];
            let y = u8::from(a + 0.2 * b > 0.0);
            text.push_str(&format!("{a},{b},{plan},{y}\n"));
        }
        std::fs::write(&path, text).unwrap();
        path
    }

    fn config_text() -> String {
        r#"{
            "data": {"path": "toy.csv"},
            "target": "y",
            "task": "classification",
            "categorical": ["plan"],
            "models": [{"kind": "logistic"}, {"kind": "forest", "n_trees": 5}],
            "criterion": "accuracy",
            "agreeability": "cohen_kappa",
            "seed": 3,
            "smote": {"enabled": true}
        }"#
        .to_string()
    }

    #[test]
    fn runs_and_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path());
        let cfg = RunConfig::from_json(&config_text(), dir.path()).unwrap();
        let mut lines = 0;
        let out = run_experiment(&cfg, |_| lines += 1).unwrap();
        assert_eq!(lines, 3);
        assert_eq!(out.run.iterations.len(), 3);
        for p in [&out.results_json, &out.results_csv, &out.manifest] {
            assert!(p.is_file());
        }
        let groups: Vec<&str> = out.run.config.groups.iter().map(|g| g.name.as_str()).collect();
        assert_eq!(groups, vec!["a", "b", "plan"]);
    }

    #[test]
    fn errors_are_collected() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{
            "data": {"path": "missing.csv"},
            "target": "y",
            "task": "classification",
            "models": [{"kind": "logistic"}],
            "criterion": "auc",
            "agreeability": "spearman"
        }"#;
        let Err(Error::Config(errs)) = RunConfig::from_json(text, dir.path()) else {
            panic!("expected config error")
        };
        assert_eq!(errs.len(), 4, "{errs:?}");
        let crit = errs.iter().find(|e| e.contains("`criterion`")).unwrap();
        assert!(crit.contains("auc") && crit.contains("\"f1\""));
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path());
        let text = config_text().replace("\"seed\": 3,", "\"seed\": 3, \"fixed\": [\"nope\"],");
        let cfg = RunConfig::from_json(&text, dir.path()).unwrap();
        assert!(matches!(run_experiment(&cfg, |_| {}), Err(Error::Config(_))));
        let text = config_text().replace("\"target\": \"y\"", "\"target\": \"label\"");
        let cfg = RunConfig::from_json(&text, dir.path()).unwrap();
        assert!(matches!(prepare_data(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn layered_net_needs_train_params() {
        let dir = tempfile::tempdir().unwrap();
        write_csv(dir.path());
        let text = config_text().replace(
            r#"{"kind": "forest", "n_trees": 5}"#,
            r#"{"kind": "layered_net", "layers": [{"units": 1, "activation": "sigmoid"}]}"#,
        );
        let Err(Error::Config(errs)) = RunConfig::from_json(&text, dir.path()) else {
            panic!("expected config error")
        };
        assert!(errs.iter().any(|e| e.contains("train_params")));
    }
}
