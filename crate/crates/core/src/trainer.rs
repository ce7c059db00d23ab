//! Mini-batch training of the classifier and confusion layers, validation-based
//! grid search, checkpoints, and per-epoch history.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::argmax_column;
use crate::error::{invalid, Error, Result};
use crate::model::{backward, crowd_forward, init_model, ClassifierParams, CrowdModel, Layer, DEFAULT_MU_INIT};
use crate::numerics::{adam_step, AdamState, DenseMatrix, Rng};
use crate::objective::{ccem_data_loss, crowdlayer_loss, oracle_kl_loss, DataTerm, RegularizerSpec};
use crate::simulator::{AnnotationSet, Dataset, Split};

const SHUFFLE_STREAM: u64 = 0x5EED_E90C;
pub const CHECKPOINT_MAGIC: &str = "GEOCROWD-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const HISTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub regularizer: RegularizerSpec,
    pub data_term: DataTerm,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; `None` disables.
    pub patience: Option<usize>,
    pub seed: u64,
    pub mu_init: f64,
    pub hidden: Vec<usize>,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Keep the confusion layers at their initial value.
    pub freeze_confusions: bool,
    pub lambda_grid: Option<Vec<f64>>,
    pub lr_grid: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regularizer: RegularizerSpec::none(),
            data_term: DataTerm::Ccem,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            batch_size: 128,
            epochs: 100,
            patience: Some(10),
            seed: 0,
            mu_init: DEFAULT_MU_INIT,
            hidden: vec![64, 64],
            clip_norm: 100.0,
            freeze_confusions: false,
            lambda_grid: None,
            lr_grid: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.regularizer.validate()?;
        if self.batch_size < 1 {
            return Err(invalid("batch size must be >= 1"));
        }
        if self.epochs < 1 {
            return Err(invalid("epoch budget must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid("learning rate must be positive and finite"));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(invalid("weight decay must be finite and >= 0"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(invalid("clip norm must be positive"));
        }
        if self.patience == Some(0) {
            return Err(invalid("patience must be >= 1 when set"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden layer widths must be >= 1"));
        }
        for (name, grid) in [("lambda_grid", &self.lambda_grid), ("lr_grid", &self.lr_grid)] {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(invalid(format!("{name} must not be empty")));
                }
                if g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(invalid(format!("{name} entries must be finite and >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn has_grid(&self) -> bool {
        self.lambda_grid.is_some() || self.lr_grid.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Batch-mean total loss.
    pub loss: f64,
    pub data: f64,
    pub reg: f64,
    pub val_acc: Option<f64>,
    pub seconds: f64,
    /// Largest `|column-sum(A_m) − 1|` seen after any step of the epoch.
    pub max_colsum_dev: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn best_val_acc(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.val_acc).reduce(f64::max)
    }

    /// CSV with a schema comment line; `with_time = false` blanks the wall-time column.
    pub fn to_csv_string(&self, with_time: bool) -> String {
        let mut out = format!("# train_history schema_version={HISTORY_SCHEMA_VERSION}\n");
        out.push_str("epoch,loss,data,reg,val_acc,seconds,max_colsum_dev\n");
        for r in &self.records {
            let val = r.val_acc.map(|v| v.to_string()).unwrap_or_default();
            let secs = if with_time { format!("{:.6}", r.seconds) } else { String::new() };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.loss, r.data, r.reg, val, secs, r.max_colsum_dev
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string(true))?;
        Ok(())
    }
}

/// Serializable copy of every parameter of a [`CrowdModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub layers: Vec<Layer>,
    pub confusion_logits: Vec<DenseMatrix>,
    pub mu_init: f64,
    pub seed: u64,
}

impl ModelSnapshot {
    pub fn of(model: &CrowdModel) -> Self {
        ModelSnapshot {
            layers: model.classifier().layers().to_vec(),
            confusion_logits: model.confusion_logits().to_vec(),
            mu_init: model.mu_init(),
            seed: model.seed(),
        }
    }

    pub fn restore(&self) -> Result<CrowdModel> {
        let classifier = ClassifierParams::new(self.layers.clone())?;
        CrowdModel::new(classifier, self.confusion_logits.clone(), self.mu_init, self.seed)
    }
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub adam: Vec<AdamState>,
    pub history: TrainHistory,
    pub best_val: Option<f64>,
    pub best_snapshot: Option<ModelSnapshot>,
    pub since_best: usize,
    pub stopped: bool,
    /// Parameters at the end of the last completed epoch.
    pub current: ModelSnapshot,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    magic: String,
    format_version: u32,
    model: ModelSnapshot,
    #[serde(default)]
    config: Option<TrainConfig>,
    #[serde(default)]
    training: Option<TrainState>,
}

/// Parsed checkpoint: the model plus optional training configuration and state.
pub struct Checkpoint {
    pub model: CrowdModel,
    pub config: Option<TrainConfig>,
    pub training: Option<TrainState>,
}

fn write_checkpoint(file: &CheckpointFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string(file)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn save_checkpoint(model: &CrowdModel, path: &Path) -> Result<()> {
    write_checkpoint(
        &CheckpointFile {
            magic: CHECKPOINT_MAGIC.into(),
            format_version: CHECKPOINT_VERSION,
            model: ModelSnapshot::of(model),
            config: None,
            training: None,
        },
        path,
    )
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("corrupt file: {e}")))?;
    match value.get("magic").and_then(|m| m.as_str()) {
        Some(CHECKPOINT_MAGIC) => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "wrong magic {:?}, expected {CHECKPOINT_MAGIC:?}",
                other.unwrap_or("<missing>")
            )))
        }
    }
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        other => {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {other:?}, expected {CHECKPOINT_VERSION}"
            )))
        }
    }
    let file: CheckpointFile =
        serde_json::from_value(value).map_err(|e| Error::Checkpoint(format!("corrupt file: {e}")))?;
    let model = file
        .model
        .restore()
        .map_err(|e| Error::Checkpoint(format!("invalid model: {e}")))?;
    Ok(Checkpoint {
        model,
        config: file.config,
        training: file.training,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<CrowdModel> {
    Ok(read_checkpoint(path)?.model)
}

/// Where the data term's targets come from.
#[derive(Clone, Copy)]
enum Targets<'a> {
    Labels,
    Oracle(&'a [DenseMatrix]),
}

/// Epoch-by-epoch driver; owns the model, optimizer state, and history.
pub struct Trainer<'a> {
    config: TrainConfig,
    dataset: &'a Dataset,
    annotations: &'a AnnotationSet,
    targets: Targets<'a>,
    train_items: Vec<usize>,
    val_items: Vec<usize>,
    model: CrowdModel,
    state: TrainState,
}

fn check_inputs(
    config: &TrainConfig,
    dataset: &Dataset,
    annotations: &AnnotationSet,
    oracle: Option<&[DenseMatrix]>,
) -> Result<()> {
    config.validate()?;
    if annotations.is_empty() {
        return Err(Error::EmptyAnnotations);
    }
    if annotations.num_items() > dataset.num_items() {
        return Err(Error::IndexOutOfRange {
            what: "annotated item",
            index: annotations.num_items() - 1,
            limit: dataset.num_items(),
        });
    }
    if annotations.num_classes() != dataset.num_classes {
        return Err(invalid("annotations and dataset disagree on the number of classes"));
    }
    if !dataset
        .indices(Split::Train)
        .iter()
        .any(|&n| n < annotations.num_items() && !annotations.for_item(n).is_empty())
    {
        return Err(Error::EmptyAnnotations);
    }
    if config.data_term == DataTerm::OracleKl {
        let truth = oracle.ok_or_else(|| invalid("oracle_kl mode needs the true confusions"))?;
        if truth.len() != annotations.num_annotators() {
            return Err(invalid("oracle confusions do not match the annotator count"));
        }
        if dataset.soft_labels.is_none() {
            return Err(invalid("oracle_kl mode needs true posteriors in the dataset"));
        }
    }
    Ok(())
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: TrainConfig,
        dataset: &'a Dataset,
        annotations: &'a AnnotationSet,
        oracle: Option<&'a [DenseMatrix]>,
    ) -> Result<Self> {
        check_inputs(&config, dataset, annotations, oracle)?;
        let model = init_model(
            dataset.dim(),
            dataset.num_classes,
            annotations.num_annotators(),
            &config.hidden,
            config.mu_init,
            config.seed,
        )?;
        let n_classifier = 2 * model.classifier().layers().len();
        let mut adam = Vec::new();
        for layer in model.classifier().layers() {
            adam.push(AdamState::new(layer.weight.as_slice().len(), config.learning_rate, config.weight_decay));
            adam.push(AdamState::new(layer.bias.len(), config.learning_rate, config.weight_decay));
        }
        debug_assert_eq!(adam.len(), n_classifier);
        for b in model.confusion_logits() {
            adam.push(AdamState::new(b.as_slice().len(), config.learning_rate, 0.0));
        }
        let state = TrainState {
            epoch: 0,
            adam,
            history: TrainHistory::default(),
            best_val: None,
            best_snapshot: None,
            since_best: 0,
            stopped: false,
            current: ModelSnapshot::of(&model),
        };
        Ok(Self::assemble(config, dataset, annotations, oracle, model, state))
    }

    /// Continues from a saved [`TrainState`]; the epoch budget comes from `config`.
    pub fn resume(
        config: TrainConfig,
        dataset: &'a Dataset,
        annotations: &'a AnnotationSet,
        oracle: Option<&'a [DenseMatrix]>,
        state: TrainState,
    ) -> Result<Self> {
        check_inputs(&config, dataset, annotations, oracle)?;
        let model = state.current.restore()?;
        if model.input_dim() != dataset.dim()
            || model.num_classes() != dataset.num_classes
            || model.num_annotators() != annotations.num_annotators()
        {
            return Err(Error::Checkpoint("checkpoint does not match the data dimensions".into()));
        }
        let expected = 2 * model.classifier().layers().len() + model.num_annotators();
        if state.adam.len() != expected {
            return Err(Error::Checkpoint("optimizer state does not match the model".into()));
        }
        let mut state = state;
        // A larger budget or patience can revive a run that had stopped.
        state.stopped = match (config.patience, state.best_val) {
            (Some(p), Some(_)) => state.since_best >= p,
            _ => false,
        };
        Ok(Self::assemble(config, dataset, annotations, oracle, model, state))
    }

    fn assemble(
        config: TrainConfig,
        dataset: &'a Dataset,
        annotations: &'a AnnotationSet,
        oracle: Option<&'a [DenseMatrix]>,
        model: CrowdModel,
        state: TrainState,
    ) -> Self {
        let train_items = dataset
            .indices(Split::Train)
            .into_iter()
            .filter(|&n| n < annotations.num_items())
            .collect();
        let val_items = dataset.indices(Split::Val);
        let targets = match (config.data_term, oracle) {
            (DataTerm::OracleKl, Some(t)) => Targets::Oracle(t),
            _ => Targets::Labels,
        };
        Trainer {
            config,
            dataset,
            annotations,
            targets,
            train_items,
            val_items,
            model,
            state,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn model(&self) -> &CrowdModel {
        &self.model
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn history(&self) -> &TrainHistory {
        &self.state.history
    }

    pub fn is_finished(&self) -> bool {
        self.state.stopped || self.state.epoch >= self.config.epochs
    }

    pub fn validation_accuracy(&self) -> Result<Option<f64>> {
        if self.val_items.is_empty() {
            return Ok(None);
        }
        let out = self.model.predict(&self.dataset.features_of(&self.val_items))?;
        let hits = self
            .val_items
            .iter()
            .enumerate()
            .filter(|&(c, &n)| argmax_column(&out, c) == self.dataset.labels[n])
            .count();
        Ok(Some(hits as f64 / self.val_items.len() as f64))
    }

    /// Runs one shuffled pass over the training items.
    pub fn step_epoch(&mut self) -> Result<&EpochRecord> {
        let started = Instant::now();
        let epoch = self.state.epoch + 1;
        let mut order = self.train_items.clone();
        Rng::new(self.config.seed)
            .derive(SHUFFLE_STREAM)
            .derive(epoch as u64)
            .shuffle(&mut order);

        let n_classifier = 2 * self.model.classifier().layers().len();
        let (mut sum_total, mut sum_data, mut sum_reg) = (0.0, 0.0, 0.0);
        let mut batches = 0usize;
        let mut max_dev = self.model.max_column_sum_deviation();

        for (batch, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let mut pairs = Vec::new();
            let mut labels = Vec::new();
            for (col, &n) in chunk.iter().enumerate() {
                for &(m, y) in self.annotations.for_item(n) {
                    pairs.push((col, m));
                    labels.push(y);
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let x = self.dataset.features_of(chunk);
            let fwd = crowd_forward(&self.model, &x, &pairs)?;
            let (data, d_probs) = match (self.config.data_term, self.targets) {
                (DataTerm::Ccem, _) => ccem_data_loss(&fwd.probs, &labels)?,
                (DataTerm::Crowdlayer, _) => crowdlayer_loss(&fwd.probs, &labels)?,
                (DataTerm::OracleKl, Targets::Oracle(truth)) => {
                    let mut targets = DenseMatrix::zeros(fwd.probs.rows(), pairs.len());
                    for (t, &(col, m)) in pairs.iter().enumerate() {
                        let p = truth[m].matvec(&self.dataset.posterior(chunk[col]))?;
                        targets.set_column(t, &p);
                    }
                    oracle_kl_loss(&targets, &fwd.probs)?
                }
                (DataTerm::OracleKl, Targets::Labels) => {
                    return Err(invalid("oracle_kl mode needs the true confusions"))
                }
            };
            let (reg, extra) = self
                .config
                .regularizer
                .evaluate(fwd.outputs(), self.model.confusions())?;
            let total = data + reg;
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            let mut grads = backward(&self.model, &fwd, &d_probs, &extra)?;
            let norm = grads.global_norm();
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            if norm > self.config.clip_norm {
                let s = self.config.clip_norm / norm;
                for t in grads.tensors_mut() {
                    t.iter_mut().for_each(|g| *g *= s);
                }
            }
            let frozen = self.config.freeze_confusions;
            let adam = &mut self.state.adam;
            let g = grads.tensors();
            self.model.apply(|params| {
                for (i, p) in params.iter_mut().enumerate() {
                    if frozen && i >= n_classifier {
                        continue;
                    }
                    adam_step(p, g[i], &mut adam[i])?;
                }
                Ok(())
            })?;
            max_dev = max_dev.max(self.model.max_column_sum_deviation());
            sum_total += total;
            sum_data += data;
            sum_reg += reg;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::EmptyAnnotations);
        }

        let val_acc = self.validation_accuracy()?;
        if let Some(acc) = val_acc {
            if self.state.best_val.is_none_or(|b| acc > b) {
                self.state.best_val = Some(acc);
                self.state.best_snapshot = Some(ModelSnapshot::of(&self.model));
                self.state.since_best = 0;
            } else {
                self.state.since_best += 1;
            }
            if let Some(p) = self.config.patience {
                if self.state.since_best >= p {
                    self.state.stopped = true;
                }
            }
        }
        let b = batches as f64;
        self.state.epoch = epoch;
        self.state.current = ModelSnapshot::of(&self.model);
        self.state.history.records.push(EpochRecord {
            epoch,
            loss: sum_total / b,
            data: sum_data / b,
            reg: sum_reg / b,
            val_acc,
            seconds: started.elapsed().as_secs_f64(),
            max_colsum_dev: max_dev,
        });
        Ok(self.state.history.last().expect("just pushed"))
    }

    /// Trains until the budget, early stopping, or `until_epoch` (inclusive).
    pub fn run(&mut self, until_epoch: Option<usize>) -> Result<()> {
        while !self.is_finished() && until_epoch.is_none_or(|u| self.state.epoch < u) {
            self.step_epoch()?;
        }
        Ok(())
    }

    /// Model to report: the best-validation snapshot under early stopping,
    /// the latest parameters otherwise.
    pub fn final_model(&self) -> Result<CrowdModel> {
        match (&self.state.best_snapshot, self.config.patience) {
            (Some(s), Some(_)) => s.restore(),
            _ => Ok(self.model.clone()),
        }
    }

    /// Writes the reported model together with the resumable state.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        write_checkpoint(
            &CheckpointFile {
                magic: CHECKPOINT_MAGIC.into(),
                format_version: CHECKPOINT_VERSION,
                model: ModelSnapshot::of(&self.final_model()?),
                config: Some(self.config.clone()),
                training: Some(self.state.clone()),
            },
            path,
        )
    }

    pub fn finish(self) -> Result<(CrowdModel, TrainHistory)> {
        let model = self.final_model()?;
        Ok((model, self.state.history))
    }
}

/// Trains one model to completion.
///
/// `oracle` holds the true confusions and is only consulted in `oracle_kl` mode.
pub fn train(
    config: &TrainConfig,
    dataset: &Dataset,
    annotations: &AnnotationSet,
    oracle: Option<&[DenseMatrix]>,
) -> Result<(CrowdModel, TrainHistory)> {
    let mut trainer = Trainer::new(config.clone(), dataset, annotations, oracle)?;
    trainer.run(None)?;
    trainer.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda: f64,
    pub learning_rate: f64,
    /// Validation accuracy of the model the cell would report.
    pub val_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

pub struct GridOutcome {
    pub cells: Vec<GridCell>,
    pub best: usize,
    pub config: TrainConfig,
    pub model: CrowdModel,
    pub history: TrainHistory,
}

fn sorted_grid(values: &Option<Vec<f64>>, fallback: f64) -> Vec<f64> {
    let mut v = values.clone().unwrap_or_else(|| vec![fallback]);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Trains one model per `(λ, lr)` cell with a shared seed and keeps the best
/// validation accuracy; ties go to the smaller `λ`, then the smaller `lr`.
pub fn grid_search(
    config: &TrainConfig,
    dataset: &Dataset,
    annotations: &AnnotationSet,
    oracle: Option<&[DenseMatrix]>,
) -> Result<GridOutcome> {
    config.validate()?;
    if dataset.indices(Split::Val).is_empty() {
        return Err(invalid("grid search needs a validation split"));
    }
    let lambdas = sorted_grid(&config.lambda_grid, config.regularizer.lambda);
    let rates = sorted_grid(&config.lr_grid, config.learning_rate);
    let cells: Vec<TrainConfig> = lambdas
        .iter()
        .flat_map(|&l| {
            rates.iter().map(move |&r| {
                let mut c = config.clone();
                c.regularizer.lambda = l;
                c.learning_rate = r;
                c.lambda_grid = None;
                c.lr_grid = None;
                c
            })
        })
        .collect();
    let runs: Vec<Result<(CrowdModel, TrainHistory)>> = cells
        .par_iter()
        .map(|c| train(c, dataset, annotations, oracle))
        .collect();

    let mut summary = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (c, run)) in cells.iter().zip(&runs).enumerate() {
        let cell = match run {
            Ok((_, h)) => GridCell {
                lambda: c.regularizer.lambda,
                learning_rate: c.learning_rate,
                val_accuracy: if c.patience.is_some() {
                    h.best_val_acc()
                } else {
                    h.last().and_then(|r| r.val_acc)
                },
                final_loss: h.last().map(|r| r.loss),
                error: None,
            },
            Err(e) => GridCell {
                lambda: c.regularizer.lambda,
                learning_rate: c.learning_rate,
                val_accuracy: None,
                final_loss: None,
                error: Some(e.to_string()),
            },
        };
        if let Some(acc) = cell.val_accuracy {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((i, acc));
            }
        }
        summary.push(cell);
    }
    let Some((best, _)) = best else {
        let reasons: Vec<String> = summary.iter().filter_map(|c| c.error.clone()).collect();
        return Err(invalid(format!("every grid cell failed: {}", reasons.join("; "))));
    };
    let (model, history) = runs
        .into_iter()
        .nth(best)
        .expect("best index in range")
        .expect("best cell succeeded");
    Ok(GridOutcome {
        cells: summary,
        best,
        config: cells[best].clone(),
        model,
        history,
    })
}

/// Grid search when the config carries grids, plain training otherwise.
pub fn fit(
    config: &TrainConfig,
    dataset: &Dataset,
    annotations: &AnnotationSet,
    oracle: Option<&[DenseMatrix]>,
) -> Result<(CrowdModel, TrainHistory, TrainConfig)> {
    if config.has_grid() {
        let g = grid_search(config, dataset, annotations, oracle)?;
        Ok((g.model, g.history, g.config))
    } else {
        let (m, h) = train(config, dataset, annotations, oracle)?;
        Ok((m, h, config.clone()))
    }
}
