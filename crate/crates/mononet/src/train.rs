//! Losses, optimizers, the deterministic training loop, and grid search.
//!
//! Everything here is driven by explicit seeds: weight init, per-epoch batch
//! shuffling, and split selection all come from counter-mode RNGs, so a run
//! is reproducible bit-for-bit from its config. Optimizers live behind a
//! small trait and are picked by name, mirroring the activation registry.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::data::{split_80_20, TabularDataset, Task};
use crate::error::{Error, Result};
use crate::network::{build, Architecture, FinalActivation, Network, NetworkSpec};

/// Probabilities are clipped to `[CLIP, 1 - CLIP]` before taking logs.
pub const PROB_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl LossKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => LossKind::Mse,
            Task::Classification => LossKind::CrossEntropy,
        }
    }
}

/// Mean squared error over one prediction vector and its gradient
/// `2 (pred - target) / N` w.r.t. the predictions.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::InvalidConfig("mse over an empty vector".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "mse target",
            expected: pred.len(),
            got: target.len(),
        });
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let r = p - t;
        value += r * r / n;
        grad.push(2.0 * r / n);
    }
    Ok((value, grad))
}

/// Negative log-likelihood of the target class, computed from pre-head
/// outputs so the gradient through the sigmoid/softmax head is analytic:
/// `p - y` for sigmoid, `p - onehot` for softmax.
pub fn cross_entropy_loss(
    pre_head: &[f64],
    head: FinalActivation,
    class: usize,
) -> Result<(f64, Vec<f64>)> {
    let clip = |p: f64| p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    match head {
        FinalActivation::Sigmoid => {
            if pre_head.len() != 1 {
                return Err(Error::DimensionMismatch {
                    context: "sigmoid cross-entropy output",
                    expected: 1,
                    got: pre_head.len(),
                });
            }
            if class > 1 {
                return Err(Error::InvalidConfig(format!(
                    "class {class} out of range for a binary head"
                )));
            }
            let p = crate::network::sigmoid(pre_head[0]);
            let y = class as f64;
            let value = if class == 1 {
                -clip(p).ln()
            } else {
                -clip(1.0 - p).ln()
            };
            Ok((value, vec![p - y]))
        }
        FinalActivation::Softmax => {
            if class >= pre_head.len() {
                return Err(Error::InvalidConfig(format!(
                    "class {class} out of range for {} outputs",
                    pre_head.len()
                )));
            }
            let p = crate::network::softmax(pre_head);
            let value = -clip(p[class]).ln();
            let grad = p
                .iter()
                .enumerate()
                .map(|(j, &pj)| pj - f64::from(u8::from(j == class)))
                .collect();
            Ok((value, grad))
        }
        FinalActivation::Linear => Err(Error::InvalidConfig(
            "cross-entropy needs a sigmoid or softmax head".into(),
        )),
    }
}

/// First-order update strategy; step order is the only state.
pub trait Optimizer: Send {
    fn name(&self) -> &'static str;
    /// Applies one in-place update. Rejects non-finite gradients.
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()>;
}

fn check_step_inputs(params: &[f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::DimensionMismatch {
            context: "optimizer step",
            expected: params.len(),
            got: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    Ok(())
}

pub struct Sgd {
    lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Self { lr }
    }
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_step_inputs(params, grads)?;
        for (p, &g) in params.iter_mut().zip(grads) {
            *p -= self.lr * g;
        }
        Ok(())
    }
}

/// Adam with the standard defaults (beta1 0.9, beta2 0.999, eps 1e-8).
/// Moment buffers grow lazily to the parameter count on the first step.
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_step_inputs(params, grads)?;
        if self.m.is_empty() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Optimizer lookup by name.
pub fn make_optimizer(name: &str, lr: f64) -> Result<Box<dyn Optimizer>> {
    match name.to_ascii_lowercase().as_str() {
        "sgd" => Ok(Box::new(Sgd::new(lr))),
        "adam" => Ok(Box::new(Adam::new(lr))),
        other => Err(Error::UnknownOptimizer(other.into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Mse,
            optimizer: "adam".into(),
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            loss: LossKind::for_task(task),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        make_optimizer(&self.optimizer, self.learning_rate).map(|_| ())
    }
}

/// Everything a finished run reports. `elapsed_seconds` is informational
/// and deliberately left out of the serialized form so that artifacts stay
/// byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: usize,
    pub param_count: usize,
    /// Mean per-sample training loss, one entry per epoch.
    pub train_loss: Vec<f64>,
    pub metric_name: String,
    /// De-normalized MSE for regression, accuracy for classification.
    pub test_metric: f64,
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

fn class_of(target: f64, num_outputs: usize) -> Result<usize> {
    let class_max = if num_outputs == 1 { 1 } else { num_outputs - 1 };
    let rounded = target.round();
    if (target - rounded).abs() > 1e-9 || rounded < 0.0 || rounded as usize > class_max {
        return Err(Error::InvalidConfig(format!(
            "classification target {target} is not a class index"
        )));
    }
    Ok(rounded as usize)
}

/// Metric on a held-out split: de-normalized MSE for regression (undoing
/// the target z-score stored in the descriptor), accuracy for
/// classification.
pub fn evaluate(net: &Network, data: &TabularDataset) -> Result<(String, f64)> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("evaluation split is empty".into()));
    }
    match data.descriptor.task {
        Task::Regression => {
            let scale = data
                .descriptor
                .normalization
                .as_ref()
                .map_or(1.0, |s| s.target_std);
            let mut mse = 0.0;
            for i in 0..data.len() {
                let (x, y) = data.row(i);
                let pred = net.forward_pre_head(x)?;
                if pred.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        context: "regression output",
                        expected: 1,
                        got: pred.len(),
                    });
                }
                let r = (pred[0] - y) * scale;
                mse += r * r / data.len() as f64;
            }
            Ok(("mse".into(), mse))
        }
        Task::Classification => {
            let mut correct = 0usize;
            for i in 0..data.len() {
                let (x, y) = data.row(i);
                let pre = net.forward_pre_head(x)?;
                let predicted = match net.final_activation() {
                    FinalActivation::Sigmoid => usize::from(pre[0] >= 0.0),
                    FinalActivation::Softmax => pre
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                        .map(|(j, _)| j)
                        .unwrap_or(0),
                    FinalActivation::Linear => {
                        return Err(Error::InvalidConfig(
                            "classification needs a sigmoid or softmax head".into(),
                        ))
                    }
                };
                if predicted == class_of(y, pre.len())? {
                    correct += 1;
                }
            }
            Ok(("accuracy".into(), correct as f64 / data.len() as f64))
        }
    }
}

fn sample_loss(
    net: &Network,
    loss: LossKind,
    pre_head: &[f64],
    target: f64,
) -> Result<(f64, Vec<f64>)> {
    match loss {
        LossKind::Mse => {
            if net.final_activation() != FinalActivation::Linear {
                return Err(Error::InvalidConfig(
                    "mse training expects a linear head".into(),
                ));
            }
            mse_loss(pre_head, &[target])
        }
        LossKind::CrossEntropy => {
            let class = class_of(target, pre_head.len())?;
            cross_entropy_loss(pre_head, net.final_activation(), class)
        }
    }
}

/// Mini-batch training with per-epoch seeded shuffling. Expects normalized
/// splits; the test metric comes from [`evaluate`]. Non-finite epoch loss
/// aborts with the epoch index.
pub fn train(
    net: &mut Network,
    train_data: &TabularDataset,
    test_data: &TabularDataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::InvalidConfig("training split is empty".into()));
    }
    if train_data.num_features() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training features",
            expected: net.input_dim(),
            got: train_data.num_features(),
        });
    }

    let start = Instant::now();
    let mut optimizer = make_optimizer(&config.optimizer, config.learning_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = train_data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = net.params();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut batch_loss = 0.0;
            let mut grad_acc = vec![0.0; params.len()];
            for &i in batch {
                let (x, y) = train_data.row(i);
                let (pre, cache) = net.forward_cached(x)?;
                let (value, grad_pre) = sample_loss(net, config.loss, &pre, y)?;
                batch_loss += value;
                let flat = net.backward(&cache, &grad_pre)?;
                for (a, g) in grad_acc.iter_mut().zip(&flat) {
                    *a += g;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grad_acc {
                *g *= scale;
            }
            optimizer.step(&mut params, &grad_acc)?;
            net.set_params(&params)?;
            epoch_loss += batch_loss;
        }
        let mean_loss = epoch_loss / n as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean_loss);
    }

    let (metric_name, test_metric) = evaluate(net, test_data)?;
    Ok(TrainReport {
        seed: config.seed,
        epochs: config.epochs,
        param_count: net.num_params(),
        train_loss: history,
        metric_name,
        test_metric,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Builds a fresh network from the spec (seeded by the config) and trains
/// it; the usual entry point for experiment runs.
pub fn train_fresh(
    spec: &NetworkSpec,
    train_data: &TabularDataset,
    test_data: &TabularDataset,
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    let mut net = build(spec, config.seed)?;
    let report = train(&mut net, train_data, test_data, config)?;
    Ok((net, report))
}

/// Hyperparameter ranges swept by [`grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub kinds: Vec<ActivationKind>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            widths: vec![4, 8, 16, 32, 64],
            depths: vec![1, 2],
            kinds: vec![ActivationKind::elu(), ActivationKind::relu()],
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub width: usize,
    pub depth: usize,
    pub kind: ActivationKind,
    pub param_count: usize,
    pub metric_name: String,
    pub validation_metric: f64,
}

/// Leaderboard of all cells, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub leaderboard: Vec<GridCell>,
}

impl GridSearchReport {
    pub fn best(&self) -> &GridCell {
        &self.leaderboard[0]
    }
}

/// Network spec for one grid cell: `depth` hidden layers of `width` (which
/// is also the Type 2 unit width), head chosen by task.
pub fn spec_for_cell(
    data: &TabularDataset,
    architecture: Architecture,
    width: usize,
    depth: usize,
    kind: ActivationKind,
) -> NetworkSpec {
    let indicator = data.descriptor.expanded_indicator();
    let head = match data.descriptor.task {
        Task::Regression => FinalActivation::Linear,
        Task::Classification => FinalActivation::Sigmoid,
    };
    let hidden = vec![width; depth];
    match architecture {
        Architecture::Type1 => NetworkSpec::type1(indicator, &hidden, kind, head, 1),
        Architecture::Type2 => NetworkSpec::type2_uniform(indicator, width, &hidden, kind, head, 1),
    }
}

fn lower_is_better(task: Task) -> bool {
    matches!(task, Task::Regression)
}

/// Orders cells best-first: metric, then fewer parameters, then enumeration
/// order.
fn rank_cells(cells: &mut [GridCell], lower_better: bool) {
    cells.sort_by(|a, b| {
        let (x, y) = if lower_better {
            (a.validation_metric, b.validation_metric)
        } else {
            (b.validation_metric, a.validation_metric)
        };
        x.partial_cmp(&y)
            .expect("finite metrics")
            .then(a.param_count.cmp(&b.param_count))
            .then(a.index.cmp(&b.index))
    });
}

/// Exhaustive sweep over the grid. The training split is re-split 80/20
/// (seeded by the config) into fit and validation parts; every cell trains
/// on the same fit rows and is scored on the same validation rows.
pub fn grid_search(
    train_data: &TabularDataset,
    architecture: Architecture,
    space: &SearchSpace,
    config: &TrainConfig,
) -> Result<GridSearchReport> {
    if space.widths.is_empty() || space.depths.is_empty() || space.kinds.is_empty() {
        return Err(Error::InvalidConfig("empty search space".into()));
    }
    let (fit, val) = split_80_20(train_data, config.seed)?;
    let mut cells = Vec::new();
    let mut index = 0;
    for &depth in &space.depths {
        for &width in &space.widths {
            for &kind in &space.kinds {
                let spec = spec_for_cell(train_data, architecture, width, depth, kind);
                let (_, report) = train_fresh(&spec, &fit, &val, config)?;
                cells.push(GridCell {
                    index,
                    width,
                    depth,
                    kind,
                    param_count: report.param_count,
                    metric_name: report.metric_name.clone(),
                    validation_metric: report.test_metric,
                });
                index += 1;
            }
        }
    }
    rank_cells(&mut cells, lower_is_better(train_data.descriptor.task));
    Ok(GridSearchReport { leaderboard: cells })
}

/// Mean and population standard deviation of the best `k` values.
pub fn best_k_summary(metrics: &[f64], k: usize, lower_better: bool) -> Result<(f64, f64)> {
    if metrics.is_empty() || k == 0 || k > metrics.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot summarize best {k} of {} runs",
            metrics.len()
        )));
    }
    let mut sorted = metrics.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metrics"));
    let best: Vec<f64> = if lower_better {
        sorted[..k].to_vec()
    } else {
        sorted[sorted.len() - k..].to_vec()
    };
    let mean = best.iter().sum::<f64>() / k as f64;
    let var = best.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / k as f64;
    Ok((mean, var.sqrt()))
}

/// Outcome of the repeated-runs protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRunSummary {
    pub runs: Vec<TrainReport>,
    pub best_k: usize,
    pub metric_name: String,
    pub best_mean: f64,
    pub best_std: f64,
}

/// Trains `runs` fresh networks (seeds `config.seed + r`) and summarizes
/// the best `best_k` test metrics: the aggregation used for the benchmark
/// tables.
pub fn multi_run(
    spec: &NetworkSpec,
    train_data: &TabularDataset,
    test_data: &TabularDataset,
    config: &TrainConfig,
    runs: usize,
    best_k: usize,
) -> Result<MultiRunSummary> {
    if runs == 0 {
        return Err(Error::InvalidConfig("need at least one run".into()));
    }
    let mut reports = Vec::with_capacity(runs);
    for r in 0..runs {
        let run_config = TrainConfig {
            seed: config.seed + r as u64,
            ..config.clone()
        };
        let (_, report) = train_fresh(spec, train_data, test_data, &run_config)?;
        reports.push(report);
    }
    let metrics: Vec<f64> = reports.iter().map(|r| r.test_metric).collect();
    let lower = reports[0].metric_name == "mse";
    let (best_mean, best_std) = best_k_summary(&metrics, best_k, lower)?;
    Ok(MultiRunSummary {
        best_k,
        metric_name: reports[0].metric_name.clone(),
        runs: reports,
        best_mean,
        best_std,
    })
}
