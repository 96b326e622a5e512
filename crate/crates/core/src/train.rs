//! Adam, early stopping, grid search and repeated-seed runs.

use std::cmp::Ordering;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{mean_std, task_metric, ConfusionMatrix, MetricReport};
use crate::model::{Model, Prepared, Variant};
use crate::params::{Binding, ParamKind, ParamStore};
use crate::rng::Rng;
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::text::{LabeledCorpus, LabeledExample, Task};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    /// Learning rate 0.001, betas 0.9 / 0.999, epsilon 1e-8.
    pub fn new(store: &ParamStore) -> Self {
        AdamState {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: store.zeros_like(),
            v: store.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update. The L2 penalty `l2·‖θ‖²` contributes
/// `2·l2·θ` to the gradient of every parameter except biases.
pub fn adam_step(store: &mut ParamStore, grads: &[Tensor], state: &mut AdamState, l2: f64) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::Invalid(format!(
            "expected {} gradient tensors, got {}",
            store.len(),
            grads.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let i = id.0;
        let decay = if store.kind(id) == ParamKind::Bias { 0.0 } else { 2.0 * l2 };
        let theta = store.get_mut(id);
        if !theta.same_shape(&grads[i]) {
            return Err(Error::Shape {
                op: "adam_step",
                left: theta.shape().to_vec(),
                right: grads[i].shape().to_vec(),
            });
        }
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (((th, &g), m), v) in theta.data_mut().iter_mut().zip(grads[i].data()).zip(m).zip(v) {
            let g = g + decay * *th;
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            *th -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub dropout: f64,
    pub l2: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            dropout: 0.0,
            l2: 0.0,
            max_epochs: 50,
            patience: 5,
            seed: 0,
        }
    }
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            epoch: 0,
            since_best: 0,
        }
    }

    /// Records one epoch's validation metric; returns whether it is the new
    /// best.
    pub fn observe(&mut self, metric: f64) -> bool {
        self.epoch += 1;
        let improved = self.best.is_none_or(|(_, b)| metric > b);
        if improved {
            self.best = Some((self.epoch, metric));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    /// 1-based epoch and value of the best metric so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best_val: f64,
    pub best_epoch: usize,
    pub epochs_trained: usize,
    pub test_metric: f64,
    pub test_report: MetricReport,
    pub val_trajectory: Vec<f64>,
    pub train_loss: Vec<f64>,
    /// Wall time; not serialized so result files are reproducible.
    #[serde(skip)]
    pub seconds: f64,
}

/// Confusion matrix and task metric of `model` on prepared examples.
pub fn evaluate_prepared(model: &Model, examples: &[Prepared], task: Task, rng: &mut Rng) -> Result<(f64, ConfusionMatrix)> {
    let preds = model.predict_batch(examples, rng)?;
    let mut cm = ConfusionMatrix::new(task.num_classes());
    for (e, p) in examples.iter().zip(&preds) {
        cm.add(e.label, p.class)?;
    }
    Ok((task_metric(task, &cm)?, cm))
}

pub fn evaluate(model: &Model, examples: &[LabeledExample], rng: &mut Rng) -> Result<MetricReport> {
    let prepared = model.prepare(examples)?;
    let (_, cm) = evaluate_prepared(model, &prepared, model.config.task, rng)?;
    MetricReport::new(model.config.task, &cm)
}

/// Mean cross-entropy over one mini-batch, its gradients accumulated
/// example by example into `acc` (scaled by `1/|batch|`).
fn batch_gradients(
    model: &Model,
    batch: &[&Prepared],
    dropout: f64,
    rng: &mut Rng,
    acc: &mut [Tensor],
) -> Result<f64> {
    acc.iter_mut().for_each(|t| t.fill(0.0));
    let mut loss = 0.0;
    for ex in batch {
        let mut tape = Tape::new();
        let mut bind = Binding::new(&model.store);
        let (logits, _) = model.forward(&mut tape, &mut bind, ex, dropout, true, rng)?;
        let l = tape.cross_entropy(logits, ex.label)?;
        loss += tape.value(l).item()?;
        let grads = tape.backward(l)?;
        bind.accumulate(&grads, acc);
    }
    let scale = 1.0 / batch.len() as f64;
    for t in acc.iter_mut() {
        t.data_mut().iter_mut().for_each(|x| *x *= scale);
    }
    Ok(loss * scale)
}

/// Trains `model` in place with early stopping on the validation metric and
/// leaves it holding the best-validation parameters.
pub fn train_model(model: &mut Model, corpus: &LabeledCorpus, cfg: &TrainConfig) -> Result<RunResult> {
    let start = Instant::now();
    if corpus.train.is_empty() || corpus.val.is_empty() {
        return Err(Error::Empty("training needs nonempty train and validation splits".into()));
    }
    if cfg.batch_size == 0 || !(0.0..1.0).contains(&cfg.dropout) || cfg.l2 < 0.0 {
        return Err(Error::Parameter(format!("invalid training config {cfg:?}")));
    }
    let task = corpus.task;
    let mut rng = Rng::derive(cfg.seed, 1);
    let mut eval_rng = Rng::derive(cfg.seed, 2);

    if model.config.variant == Variant::Frequency {
        let labels: Vec<usize> = corpus.train.iter().map(|e| e.label).collect();
        *model = Model::frequency(task, &labels)?;
        let val = model.prepare(&corpus.val)?;
        let (best_val, _) = evaluate_prepared(model, &val, task, &mut eval_rng)?;
        let test = model.prepare(&corpus.test)?;
        let (test_metric, cm) = evaluate_prepared(model, &test, task, &mut eval_rng)?;
        return Ok(RunResult {
            seed: cfg.seed,
            best_val,
            best_epoch: 0,
            epochs_trained: 0,
            test_metric,
            test_report: MetricReport::new(task, &cm)?,
            val_trajectory: vec![best_val],
            train_loss: Vec::new(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let train = model.prepare(&corpus.train)?;
    let val = model.prepare(&corpus.val)?;
    let test = model.prepare(&corpus.test)?;
    let mut adam = AdamState::new(&model.store);
    let mut acc = model.store.zeros_like();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_store = model.store.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut val_trajectory = Vec::new();
    let mut train_loss = Vec::new();

    for epoch in 0..cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&i| &train[i]).collect();
            let loss = batch_gradients(model, &batch, cfg.dropout, &mut rng, &mut acc)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite training loss in epoch {}", epoch + 1)));
            }
            epoch_loss += loss * batch.len() as f64;
            adam_step(&mut model.store, &acc, &mut adam, cfg.l2)?;
        }
        train_loss.push(epoch_loss / train.len() as f64);
        model.mark_trained();
        let (metric, _) = evaluate_prepared(model, &val, task, &mut eval_rng)?;
        val_trajectory.push(metric);
        if stopper.observe(metric) {
            best_store = model.store.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    model.store = best_store;
    let (best_epoch, best_val) = stopper.best().unwrap_or((0, f64::NAN));
    let (test_metric, cm) = evaluate_prepared(model, &test, task, &mut eval_rng)?;
    Ok(RunResult {
        seed: cfg.seed,
        best_val,
        best_epoch,
        epochs_trained: val_trajectory.len(),
        test_metric,
        test_report: MetricReport::new(task, &cm)?,
        val_trajectory,
        train_loss,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Hyperparameter grids. The GAT dimensions are searched only for LING_GAT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub batch_size: Vec<usize>,
    pub dropout: Vec<f64>,
    pub l2: Vec<f64>,
    pub gat_hidden: Vec<usize>,
    pub gat_heads: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            batch_size: vec![4, 8, 16, 32, 64],
            dropout: (0..10).map(|i| i as f64 / 10.0).collect(),
            l2: vec![0.0, 1e-5, 1e-4],
            gat_hidden: crate::gat::HIDDEN_GRID.to_vec(),
            gat_heads: crate::gat::HEADS_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub batch_size: usize,
    pub dropout: f64,
    pub l2: f64,
    pub gat_hidden: Option<usize>,
    pub gat_heads: Option<usize>,
}

impl GridPoint {
    /// Lexicographic order over (batch size, dropout, l2, d', heads).
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.batch_size
            .cmp(&other.batch_size)
            .then(self.dropout.total_cmp(&other.dropout))
            .then(self.l2.total_cmp(&other.l2))
            .then(self.gat_hidden.cmp(&other.gat_hidden))
            .then(self.gat_heads.cmp(&other.gat_heads))
    }
}

impl Grid {
    pub fn points(&self, variant: Variant) -> Vec<GridPoint> {
        let gat: Vec<(Option<usize>, Option<usize>)> = if variant == Variant::LingGat {
            self.gat_hidden
                .iter()
                .flat_map(|&d| self.gat_heads.iter().map(move |&h| (Some(d), Some(h))))
                .collect()
        } else {
            vec![(None, None)]
        };
        let mut out = Vec::new();
        for &batch_size in &self.batch_size {
            for &dropout in &self.dropout {
                for &l2 in &self.l2 {
                    for &(gat_hidden, gat_heads) in &gat {
                        out.push(GridPoint {
                            batch_size,
                            dropout,
                            l2,
                            gat_hidden,
                            gat_heads,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub point: GridPoint,
    pub seed: u64,
    pub val_metric: f64,
    pub test_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridPoint,
    pub leaderboard: Vec<LeaderboardEntry>,
}

/// Sorts descending by validation metric, breaking ties by the smaller
/// configuration.
pub fn sort_leaderboard(entries: &mut [LeaderboardEntry]) {
    entries.sort_by(|a, b| b.val_metric.total_cmp(&a.val_metric).then(a.point.lex_cmp(&b.point)));
}

/// Exhaustive search: `run(point, seed)` trains one configuration. Job `i`
/// receives a seed derived from `(seed, i)`.
pub fn grid_search<F>(grid: &Grid, variant: Variant, seed: u64, mut run: F) -> Result<GridResult>
where
    F: FnMut(&GridPoint, u64) -> Result<RunResult>,
{
    let points = grid.points(variant);
    if points.is_empty() {
        return Err(Error::Empty("grid has no points".into()));
    }
    let mut leaderboard = Vec::with_capacity(points.len());
    for (i, point) in points.into_iter().enumerate() {
        let job_seed = Rng::derive(seed, i as u64).next_u64();
        let r = run(&point, job_seed)?;
        leaderboard.push(LeaderboardEntry {
            point,
            seed: job_seed,
            val_metric: r.best_val,
            test_metric: r.test_metric,
        });
    }
    sort_leaderboard(&mut leaderboard);
    Ok(GridResult {
        best: leaderboard[0].point.clone(),
        leaderboard,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRun {
    pub mean: f64,
    pub std: f64,
    pub runs: Vec<RunResult>,
}

/// The seeds used by [`multi_run`]: `base, base+1, …`.
pub fn run_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Runs `run(seed)` for each seed and aggregates the test metric.
pub fn multi_run<F>(seeds: &[u64], mut run: F) -> Result<MultiRun>
where
    F: FnMut(u64) -> Result<RunResult>,
{
    if seeds.len() < 2 {
        return Err(Error::Invalid("multi_run needs at least two seeds".into()));
    }
    let runs = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?;
    let metrics: Vec<f64> = runs.iter().map(|r| r.test_metric).collect();
    let (mean, std) = mean_std(&metrics)?;
    Ok(MultiRun { mean, std, runs })
}
