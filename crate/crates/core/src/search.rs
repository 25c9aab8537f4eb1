//! Simultaneous backward elimination on two models with rank-paired
//! agreeability, and n-best significance testing over a finished run.
//!
//! Iteration 1 fits both models on the full feature set. Each later
//! iteration refits every model once per remaining removable group (with that
//! group left out), ranks the candidates best to worst, pairs the two models'
//! candidates by rank and measures their agreement, then drops the group
//! whose removal gave each model its best score. With `k` removable groups a
//! run has `k` iterations and one removable group is never dropped.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreeability::AgreeMetric;
use crate::data::{Dataset, FeatureGroup, FeatureSet, Task};
use crate::error::{Error, Result};
use crate::metrics::{self, Comparison, Criterion};
use crate::models::{self, ModelSpec, TrainParams};
use crate::seeds::mix;
use crate::stat_tests::{TestKind, TestResult};

/// Decision threshold applied to classifier probabilities.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One refit of a model on a feature subset, scored on the validation rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// `None` for the full-set fit of iteration 1.
    pub removed_group: Option<String>,
    pub remaining_groups: Vec<String>,
    pub score: f64,
    /// Thresholded labels for classification, raw outputs for regression.
    pub predictions: Vec<f64>,
}

/// One model's side of an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStep {
    /// Sorted best to worst.
    pub candidates: Vec<Candidate>,
    pub dropped_group: Option<String>,
    pub best_score: f64,
    /// Groups still in the model after this iteration's drop.
    pub remaining_groups: Vec<String>,
}

impl ModelStep {
    pub fn best(&self) -> &Candidate {
        &self.candidates[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    /// 1-based.
    pub index: usize,
    pub m1: ModelStep,
    pub m2: ModelStep,
    /// Agreement of the rank-paired candidates, best pair first.
    pub paired_agreeability: Vec<f64>,
    pub best_agreeability: f64,
    /// Absent when the iteration has a single candidate pair.
    pub mean_agreeability: Option<f64>,
    pub std_agreeability: Option<f64>,
}

impl IterationResult {
    pub fn summary_line(&self, criterion: Criterion) -> String {
        let side = |s: &ModelStep| match &s.dropped_group {
            Some(g) => format!("dropped `{g}` ({} {:.4})", criterion, s.best_score),
            None => format!("full set ({} {:.4})", criterion, s.best_score),
        };
        let mut line = format!(
            "iteration {}: m1 {}, m2 {}, best agreeability {:.4}",
            self.index,
            side(&self.m1),
            side(&self.m2),
            self.best_agreeability
        );
        if let (Some(m), Some(s)) = (self.mean_agreeability, self.std_agreeability) {
            line.push_str(&format!(", mean {m:.4} (std {s:.4})"));
        }
        line
    }
}

/// Settings shared by both models for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub criterion: Criterion,
    pub agree_metric: AgreeMetric,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Option<TrainParams>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl CompareOptions {
    pub fn new(criterion: Criterion, agree_metric: AgreeMetric) -> Self {
        Self {
            criterion,
            agree_metric,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            params: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_params(mut self, params: TrainParams) -> Self {
        self.params = Some(params);
        self
    }
}

/// Inputs of a run, echoed into its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub m1: ModelSpec,
    pub m2: ModelSpec,
    pub task: Task,
    pub options: CompareOptions,
    pub groups: Vec<FeatureGroup>,
    pub n_train: usize,
    pub n_validation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRun {
    pub config: RunSnapshot,
    pub iterations: Vec<IterationResult>,
    /// Model fits performed, counted as they happen.
    pub n_fits: usize,
}

impl ComparisonRun {
    /// Each model's dropped groups in elimination order.
    pub fn elimination_orders(&self) -> (Vec<String>, Vec<String>) {
        let order = |pick: fn(&IterationResult) -> &ModelStep| {
            self.iterations
                .iter()
                .filter_map(|it| pick(it).dropped_group.clone())
                .collect()
        };
        (order(|it| &it.m1), order(|it| &it.m2))
    }
}

/// Fits predicted by the elimination convention for `k` removable groups:
/// `2 * (1 + sum_{j=2..k} (k - j + 2))`.
pub fn expected_fit_count(k: usize) -> usize {
    2 * (1 + (2..=k).map(|j| k - j + 2).sum::<usize>())
}

/// Seed of one candidate fit. Depends only on the run seed, the model's own
/// seed, the iteration and the group's position, never on scheduling.
fn candidate_seed(run_seed: u64, spec: &ModelSpec, iteration: usize, group: Option<usize>) -> u64 {
    mix(&[run_seed, spec.seed, iteration as u64, group.map_or(u64::MAX, |g| g as u64)])
}

struct Engine<'a> {
    train: &'a Dataset,
    val: &'a Dataset,
    fs: &'a FeatureSet,
    opts: &'a CompareOptions,
    fits: AtomicUsize,
}

impl Engine<'_> {
    fn group_names(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&g| self.fs.groups()[g].name.clone()).collect()
    }

    fn fit_subset(
        &self,
        spec: &ModelSpec,
        model_label: &str,
        iteration: usize,
        kept: &[usize],
        removed: Option<usize>,
    ) -> Result<Candidate> {
        let wrap = |e: Error| Error::Fit {
            model: model_label.to_string(),
            iteration,
            group: removed.map_or_else(|| "<full set>".to_string(), |g| self.fs.groups()[g].name.clone()),
            source: Box::new(e),
        };
        let cols = self.fs.column_indices(self.train, kept);
        let x_tr: Array2<f64> = self.train.x().select(Axis(1), &cols);
        let x_val: Array2<f64> = self.val.x().select(Axis(1), &cols);
        let seeded = spec.with_seed(candidate_seed(self.opts.seed, spec, iteration, removed));
        self.fits.fetch_add(1, Ordering::Relaxed);
        let fitted = models::fit(&seeded, x_tr.view(), self.train.y().view(), self.opts.params.as_ref()).map_err(wrap)?;
        let raw = models::predict(&fitted, x_val.view()).map_err(wrap)?;
        let predictions = match self.train.task() {
            Task::Classification => models::apply_threshold(raw.as_slice().expect("contiguous"), self.opts.threshold)
                .map_err(wrap)?,
            Task::Regression => raw.to_vec(),
        };
        let score = metrics::score(
            self.opts.criterion,
            self.val.y().as_slice().expect("contiguous"),
            &predictions,
        )
        .map_err(wrap)?;
        Ok(Candidate {
            removed_group: removed.map(|g| self.fs.groups()[g].name.clone()),
            remaining_groups: self.group_names(kept),
            score,
            predictions,
        })
    }

    /// One candidate per removable group of `current`, in feature-set order.
    fn candidates(&self, spec: &ModelSpec, label: &str, iteration: usize, current: &[usize]) -> Result<Vec<(usize, Candidate)>> {
        let removable: Vec<usize> = current.iter().copied().filter(|&g| !self.fs.groups()[g].fixed).collect();
        removable
            .par_iter()
            .map(|&g| {
                let kept: Vec<usize> = current.iter().copied().filter(|&h| h != g).collect();
                self.fit_subset(spec, label, iteration, &kept, Some(g)).map(|c| (g, c))
            })
            .collect()
    }

    /// Best to worst; ties keep the earlier group in feature-set order.
    fn rank(&self, mut cands: Vec<(usize, Candidate)>) -> Vec<(usize, Candidate)> {
        cands.sort_by(|(ga, a), (gb, b)| {
            match metrics::better(self.opts.criterion, a.score, b.score).expect("scores are finite") {
                Comparison::ABetter => std::cmp::Ordering::Less,
                Comparison::BBetter => std::cmp::Ordering::Greater,
                Comparison::Tie => ga.cmp(gb),
            }
        });
        cands
    }
}

fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.len() < 2 {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn validate_inputs(
    m1: &ModelSpec,
    m2: &ModelSpec,
    train: &Dataset,
    val: &Dataset,
    fs: &FeatureSet,
    opts: &CompareOptions,
) -> Result<()> {
    let task = train.task();
    if val.task() != task {
        return Err(Error::TaskMismatch(task.name().into(), val.task().name().into()));
    }
    if train.columns() != val.columns() {
        return Err(Error::ShapeMismatch("train and validation columns differ".into()));
    }
    opts.criterion.check_task(task)?;
    opts.agree_metric.check_task(task)?;
    for m in [m1, m2] {
        m.validate()?;
        if m.task() != task {
            return Err(Error::TaskMismatch(
                format!("{} model", m.kind_name()),
                format!("{} data", task.name()),
            ));
        }
    }
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [0, 1], got {}",
            opts.threshold
        )));
    }
    if let Some(p) = &opts.params {
        p.validate()?;
    }
    fs.validate(train)?;
    Ok(())
}

/// Runs the elimination without progress reporting.
pub fn compare_models(
    m1: &ModelSpec,
    m2: &ModelSpec,
    train: &Dataset,
    val: &Dataset,
    fs: &FeatureSet,
    opts: &CompareOptions,
) -> Result<ComparisonRun> {
    compare_models_with_progress(m1, m2, train, val, fs, opts, |_| {})
}

/// Runs the elimination, calling `on_iteration` as each iteration completes.
pub fn compare_models_with_progress(
    m1: &ModelSpec,
    m2: &ModelSpec,
    train: &Dataset,
    val: &Dataset,
    fs: &FeatureSet,
    opts: &CompareOptions,
    mut on_iteration: impl FnMut(&IterationResult),
) -> Result<ComparisonRun> {
    validate_inputs(m1, m2, train, val, fs, opts)?;
    let engine = Engine {
        train,
        val,
        fs,
        opts,
        fits: AtomicUsize::new(0),
    };
    let k = fs.removable_count();
    let all: Vec<usize> = (0..fs.len()).collect();
    let mut current = [all.clone(), all];
    let specs = [m1, m2];
    let labels = ["m1", "m2"];
    let mut iterations = Vec::with_capacity(k);

    for index in 1..=k {
        let ranked: Vec<Vec<(usize, Candidate)>> = if index == 1 {
            let (a, b) = rayon::join(
                || engine.fit_subset(specs[0], labels[0], 1, &current[0], None),
                || engine.fit_subset(specs[1], labels[1], 1, &current[1], None),
            );
            vec![vec![(usize::MAX, a?)], vec![(usize::MAX, b?)]]
        } else {
            let (a, b) = rayon::join(
                || engine.candidates(specs[0], labels[0], index, &current[0]),
                || engine.candidates(specs[1], labels[1], index, &current[1]),
            );
            vec![engine.rank(a?), engine.rank(b?)]
        };
        debug_assert_eq!(ranked[0].len(), ranked[1].len());

        let paired = ranked[0]
            .iter()
            .zip(&ranked[1])
            .map(|((_, a), (_, b))| opts.agree_metric.agreement(&a.predictions, &b.predictions))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| Error::Fit {
                model: "m1/m2".into(),
                iteration: index,
                group: "<agreeability>".into(),
                source: Box::new(e),
            })?;
        let (mean, std) = mean_and_sample_std(&paired);

        let mut steps = Vec::with_capacity(2);
        for (side, cands) in ranked.into_iter().enumerate() {
            let dropped = (index > 1).then(|| cands[0].0);
            if let Some(g) = dropped {
                current[side].retain(|&h| h != g);
            }
            steps.push(ModelStep {
                dropped_group: dropped.map(|g| fs.groups()[g].name.clone()),
                best_score: cands[0].1.score,
                remaining_groups: engine.group_names(&current[side]),
                candidates: cands.into_iter().map(|(_, c)| c).collect(),
            });
        }
        let m2_step = steps.pop().expect("two steps");
        let m1_step = steps.pop().expect("two steps");
        let result = IterationResult {
            index,
            m1: m1_step,
            m2: m2_step,
            best_agreeability: paired[0],
            paired_agreeability: paired,
            mean_agreeability: mean,
            std_agreeability: std,
        };
        on_iteration(&result);
        iterations.push(result);
    }

    Ok(ComparisonRun {
        config: RunSnapshot {
            m1: m1.clone(),
            m2: m2.clone(),
            task: train.task(),
            options: opts.clone(),
            groups: fs.groups().to_vec(),
            n_train: train.n_rows(),
            n_validation: val.n_rows(),
        },
        iterations,
        n_fits: engine.fits.into_inner(),
    })
}

/// Refits `spec` once per removable group in `groups` (or once on the full
/// set when `drop_each` is false). Candidates come back in the order of
/// `groups`, whatever order the worker pool ran them in.
pub fn evaluate_candidates(
    spec: &ModelSpec,
    groups: &[String],
    drop_each: bool,
    train: &Dataset,
    val: &Dataset,
    fs: &FeatureSet,
    opts: &CompareOptions,
    iteration: usize,
) -> Result<Vec<Candidate>> {
    let mut ids = Vec::with_capacity(groups.len());
    for name in groups {
        let id = fs
            .groups()
            .iter()
            .position(|g| &g.name == name)
            .ok_or_else(|| Error::InvalidFeatureSet(format!("unknown group `{name}`")))?;
        ids.push(id);
    }
    ids.sort_unstable();
    let engine = Engine {
        train,
        val,
        fs,
        opts,
        fits: AtomicUsize::new(0),
    };
    if !drop_each {
        return Ok(vec![engine.fit_subset(spec, spec.kind_name(), iteration, &ids, None)?]);
    }
    if !ids.iter().any(|&g| !fs.groups()[g].fixed) {
        return Err(Error::InvalidFeatureSet("no removable group to evaluate".into()));
    }
    Ok(engine
        .candidates(spec, spec.kind_name(), iteration, &ids)?
        .into_iter()
        .map(|(_, c)| c)
        .collect())
}

/// Outcome of testing one pair of ranked best predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOutcome {
    Tested(TestResult),
    /// The test could not run on this pair (e.g. no discordant pairs).
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub first_iteration: usize,
    pub second_iteration: usize,
    pub first_score: f64,
    pub second_score: f64,
    pub outcome: PairOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestComparison {
    pub test: TestKind,
    pub n: usize,
    pub m1: Vec<PairComparison>,
    pub m2: Vec<PairComparison>,
}

/// Ranks each model's per-iteration best predictions by score and tests
/// consecutive pairs among the top `n`: 1st vs 2nd, 2nd vs 3rd, and so on.
pub fn compare_n_best(run: &ComparisonRun, n: usize, test: TestKind) -> Result<NBestComparison> {
    let iters = run.iterations.len();
    if n < 2 || n > iters {
        return Err(Error::InvalidParameter(format!(
            "n must lie in [2, {iters}] for a run with {iters} iterations, got {n}"
        )));
    }
    if test.task() != run.config.task {
        return Err(Error::TaskMismatch(test.name().into(), run.config.task.name().into()));
    }
    let criterion = run.config.options.criterion;
    let side = |pick: fn(&IterationResult) -> &ModelStep| -> Result<Vec<PairComparison>> {
        let mut order: Vec<&IterationResult> = run.iterations.iter().collect();
        let mut failure = None;
        order.sort_by(|a, b| match metrics::better(criterion, pick(a).best_score, pick(b).best_score) {
            Ok(Comparison::ABetter) => std::cmp::Ordering::Less,
            Ok(Comparison::BBetter) => std::cmp::Ordering::Greater,
            Ok(Comparison::Tie) => a.index.cmp(&b.index),
            Err(e) => {
                failure.get_or_insert(e);
                std::cmp::Ordering::Equal
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(order[..n]
            .windows(2)
            .map(|w| {
                let (a, b) = (pick(w[0]), pick(w[1]));
                let outcome = match test.run(&a.best().predictions, &b.best().predictions) {
                    Ok(r) => PairOutcome::Tested(r),
                    Err(e) => PairOutcome::Failed(e.to_string()),
                };
                PairComparison {
                    first_iteration: w[0].index,
                    second_iteration: w[1].index,
                    first_score: a.best_score,
                    second_score: b.best_score,
                    outcome,
                }
            })
            .collect())
    };
    Ok(NBestComparison {
        test,
        n,
        m1: side(|it| &it.m1)?,
        m2: side(|it| &it.m2)?,
    })
}
