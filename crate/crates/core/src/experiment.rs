//! Reproducible multi-trial experiments: world generation, method dispatch,
//! aggregation, and CSV/JSON reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{dawid_skene_em, majority_vote, EmOptions, PosteriorLabels};
use crate::error::{invalid, Result};
use crate::geometry::{align_permutation, evaluate, label_accuracy, Metrics};
use crate::io::SCHEMA_VERSION;
use crate::numerics::Rng;
use crate::objective::{DataTerm, RegularizerKind};
use crate::simulator::{
    gen_confusions, gen_mixture_dataset, sample_annotations, Annotation, AnnotationSet, ConfusionEnsemble, ConfusionSpec,
    Dataset, MixtureSpec, Split,
};
use crate::trainer::{fit, TrainConfig, TrainHistory};

/// Confusion-logit scale that pins a frozen confusion layer to the identity.
pub const FROZEN_MU: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GeocrowdF,
    GeocrowdW,
    Unregularized,
    Tracereg,
    Crowdlayer,
    NnMv,
    NnDsem,
    DsEm,
    Mv,
    OracleKl,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::GeocrowdF,
        Method::GeocrowdW,
        Method::Unregularized,
        Method::Tracereg,
        Method::Crowdlayer,
        Method::NnMv,
        Method::NnDsem,
        Method::DsEm,
        Method::Mv,
        Method::OracleKl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GeocrowdF => "geocrowd_f",
            Method::GeocrowdW => "geocrowd_w",
            Method::Unregularized => "unregularized",
            Method::Tracereg => "tracereg",
            Method::Crowdlayer => "crowdlayer",
            Method::NnMv => "nn_mv",
            Method::NnDsem => "nn_dsem",
            Method::DsEm => "ds_em",
            Method::Mv => "mv",
            Method::OracleKl => "oracle_kl",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Whether the method trains a classifier.
    pub fn trains(self) -> bool {
        !matches!(self, Method::DsEm | Method::Mv)
    }

    /// The training configuration this method uses, derived from `base`.
    ///
    /// `base.regularizer.lambda` is the strength for the regularized methods.
    pub fn train_config(self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        let set = |c: &mut TrainConfig, kind: RegularizerKind, term: DataTerm| {
            c.regularizer.kind = kind;
            c.data_term = term;
            if kind == RegularizerKind::None {
                c.regularizer.lambda = 0.0;
                c.lambda_grid = None;
            }
        };
        match self {
            Method::GeocrowdF => set(&mut c, RegularizerKind::LogdetF, DataTerm::Ccem),
            Method::GeocrowdW => set(&mut c, RegularizerKind::LogdetW, DataTerm::Ccem),
            Method::Tracereg => set(&mut c, RegularizerKind::Trace, DataTerm::Ccem),
            Method::Unregularized => set(&mut c, RegularizerKind::None, DataTerm::Ccem),
            Method::Crowdlayer => set(&mut c, RegularizerKind::None, DataTerm::Crowdlayer),
            Method::NnMv | Method::NnDsem | Method::DsEm | Method::Mv => {
                set(&mut c, RegularizerKind::None, DataTerm::Ccem);
                c.freeze_confusions = true;
                c.mu_init = FROZEN_MU;
            }
            Method::OracleKl => c.data_term = DataTerm::OracleKl,
        }
        c
    }
}

/// Generator of one synthetic world; the mixture seed is replaced per trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub mixture: MixtureSpec,
    pub annotators: usize,
    pub confusions: ConfusionSpec,
    /// Probability that an annotator labels a given training item.
    pub p: f64,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(invalid(format!(
                "observation probability p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if self.annotators < 1 {
            return Err(invalid("at least one annotator is required"));
        }
        Ok(())
    }
}

/// Per-purpose seeds of one trial, all derived from the trial seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSeeds {
    pub trial_seed: u64,
    pub data: u64,
    pub confusions: u64,
    pub annotations: u64,
    pub train: u64,
}

impl WorldSeeds {
    pub fn from_seed(seed: u64) -> Self {
        let root = Rng::new(seed);
        let draw = |stream: u64| root.derive(stream).next_u64();
        WorldSeeds {
            trial_seed: seed,
            data: draw(1),
            confusions: draw(2),
            annotations: draw(3),
            train: draw(4),
        }
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub dataset: Dataset,
    pub ensemble: ConfusionEnsemble,
    pub annotations: AnnotationSet,
    pub seeds: WorldSeeds,
}

pub fn build_world(spec: &WorldSpec, seed: u64) -> Result<World> {
    spec.validate()?;
    let seeds = WorldSeeds::from_seed(seed);
    let mut mixture = spec.mixture.clone();
    mixture.seed = seeds.data;
    let dataset = gen_mixture_dataset(&mixture)?;
    let ensemble = gen_confusions(&spec.confusions, mixture.classes, spec.annotators, seeds.confusions)?;
    let annotations = sample_annotations(&dataset, &ensemble, spec.p, seeds.annotations)?;
    Ok(World {
        dataset,
        ensemble,
        annotations,
        seeds,
    })
}

/// Single-annotator set carrying the integrated hard labels of every annotated item.
pub fn integrated_annotations(posteriors: &PosteriorLabels, annotations: &AnnotationSet) -> Result<AnnotationSet> {
    let hard = posteriors.hard_labels();
    let triples = (0..annotations.num_items())
        .filter(|&n| !annotations.for_item(n).is_empty())
        .map(|n| Annotation {
            item: n,
            annotator: 0,
            label: hard[n],
        })
        .collect();
    AnnotationSet::new(annotations.num_items(), 1, annotations.num_classes(), triples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: Method,
    pub p: f64,
    pub trial: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub final_loss: Option<f64>,
    pub max_colsum_dev: Option<f64>,
    pub losses_finite: Option<bool>,
    pub seconds: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub history: Option<TrainHistory>,
}

fn history_fields(r: &mut TrialResult, h: &TrainHistory) {
    r.epochs = Some(h.len());
    r.final_loss = h.last().map(|e| e.loss);
    r.max_colsum_dev = Some(h.records.iter().map(|e| e.max_colsum_dev).fold(0.0, f64::max));
    r.losses_finite = Some(
        h.records
            .iter()
            .all(|e| e.loss.is_finite() && e.data.is_finite() && e.reg.is_finite()),
    );
    r.history = Some(h.clone());
}

fn annotated_train_items(world: &World) -> Vec<usize> {
    world
        .dataset
        .indices(Split::Train)
        .into_iter()
        .filter(|&n| !world.annotations.for_item(n).is_empty())
        .collect()
}

fn run_method_inner(method: Method, base: &TrainConfig, em: &EmOptions, world: &World, r: &mut TrialResult) -> Result<()> {
    let k = world.dataset.num_classes;
    let m = world.ensemble.num_annotators();
    let truth = &world.ensemble.matrices;
    let mut config = method.train_config(base);
    config.seed = world.seeds.train;
    match method {
        Method::Mv | Method::NnMv | Method::DsEm | Method::NnDsem => {
            let (labels, confusions) = if matches!(method, Method::Mv | Method::NnMv) {
                (majority_vote(&world.annotations, k), None)
            } else {
                let fit = dawid_skene_em(&world.annotations, k, m, em)?;
                (fit.posteriors, Some(fit.confusions))
            };
            let items = annotated_train_items(world);
            r.metrics.label_accuracy = Some(label_accuracy(&labels.hard_labels(), &world.dataset.labels, &items));
            if let Some(c) = &confusions {
                r.metrics.confusion_mse = Some(align_permutation(c, truth)?.confusion_mse());
            }
            if method.trains() {
                let single = integrated_annotations(&labels, &world.annotations)?;
                let (model, history, used) = fit(&config, &world.dataset, &single, None)?;
                let metrics = evaluate(&model, &world.dataset, None, None)?;
                r.metrics.test_accuracy = metrics.test_accuracy;
                r.metrics.predictor_error = metrics.predictor_error;
                r.metrics.bayes_accuracy = metrics.bayes_accuracy;
                r.metrics.test_items = metrics.test_items;
                r.learning_rate = Some(used.learning_rate);
                history_fields(r, &history);
            }
        }
        _ => {
            let (model, history, used) = fit(&config, &world.dataset, &world.annotations, Some(truth))?;
            let label_acc = r.metrics.label_accuracy;
            r.metrics = evaluate(&model, &world.dataset, Some(truth), Some(&world.annotations))?;
            r.metrics.label_accuracy = label_acc;
            r.lambda = Some(used.regularizer.lambda);
            r.learning_rate = Some(used.learning_rate);
            history_fields(r, &history);
        }
    }
    Ok(())
}

/// Runs one method on one world; failures are recorded, not propagated.
pub fn run_method(method: Method, base: &TrainConfig, em: &EmOptions, world: &World, p: f64, trial: usize) -> TrialResult {
    let started = Instant::now();
    let mut r = TrialResult {
        method,
        p,
        trial,
        seed: world.seeds.trial_seed,
        metrics: Metrics::default(),
        lambda: None,
        learning_rate: None,
        epochs: None,
        final_loss: None,
        max_colsum_dev: None,
        losses_finite: None,
        seconds: 0.0,
        error: None,
        history: None,
    };
    if let Err(e) = run_method_inner(method, base, em, world, &mut r) {
        r.error = Some(e.to_string());
    }
    r.seconds = started.elapsed().as_secs_f64();
    r
}

fn default_trials() -> usize {
    5
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub world: WorldSpec,
    /// Observation probabilities to sweep; `world.p` alone when absent.
    #[serde(default)]
    pub p_sweep: Option<Vec<f64>>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Per-method JSON patches merged over the derived training configuration.
    #[serde(default)]
    pub method_train: BTreeMap<Method, serde_json::Value>,
    #[serde(default)]
    pub em: EmOptions,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Trial `t` uses seed `seed + t`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.trials < 1 {
            return Err(invalid("trial count must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        self.world.validate()?;
        for p in self.settings() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(invalid(format!("observation probability p must lie in (0, 1], got {p}")));
            }
        }
        for &m in &self.methods {
            self.method_config(m)?.validate()?;
        }
        Ok(())
    }

    pub fn settings(&self) -> Vec<f64> {
        self.p_sweep.clone().unwrap_or_else(|| vec![self.world.p])
    }

    /// Base training config for `method`, patches applied.
    pub fn method_config(&self, method: Method) -> Result<TrainConfig> {
        let derived = method.train_config(&self.train);
        match self.method_train.get(&method) {
            None => Ok(derived),
            Some(patch) => {
                let mut value = serde_json::to_value(&derived)?;
                merge(&mut value, patch);
                Ok(serde_json::from_value(value)?)
            }
        }
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        (0..self.trials as u64).map(|t| self.seed.wrapping_add(t)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

impl Stat {
    /// Mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat {
            mean: Some(mean),
            std: Some(std),
            count: n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub p: f64,
    pub trials: usize,
    pub failures: usize,
    pub test_accuracy: Stat,
    pub aligned_test_accuracy: Stat,
    pub confusion_mse: Stat,
    pub predictor_error: Stat,
    pub label_accuracy: Stat,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub summary: Vec<SummaryRow>,
    pub raw: Vec<TrialResult>,
}

impl ExperimentReport {
    pub fn results(&self, method: Method, p: f64) -> Vec<&TrialResult> {
        self.raw.iter().filter(|r| r.method == method && r.p == p).collect()
    }

    pub fn row(&self, method: Method, p: f64) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method && r.p == p)
    }
}

fn summarize(methods: &[Method], settings: &[f64], raw: &[TrialResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &p in settings {
        for &method in methods {
            let cell: Vec<&TrialResult> = raw.iter().filter(|r| r.method == method && r.p == p).collect();
            let ok: Vec<&&TrialResult> = cell.iter().filter(|r| r.error.is_none()).collect();
            let stat = |f: fn(&Metrics) -> Option<f64>| Stat::of(&ok.iter().filter_map(|r| f(&r.metrics)).collect::<Vec<_>>());
            rows.push(SummaryRow {
                method,
                p,
                trials: cell.len(),
                failures: cell.len() - ok.len(),
                test_accuracy: stat(|m| m.test_accuracy),
                aligned_test_accuracy: stat(|m| m.aligned_test_accuracy),
                confusion_mse: stat(|m| m.confusion_mse),
                predictor_error: stat(|m| m.predictor_error),
                label_accuracy: stat(|m| m.label_accuracy),
            });
        }
    }
    rows
}

/// Thread pool sized by `GEOCROWD_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("GEOCROWD_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("GEOCROWD_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(invalid("GEOCROWD_THREADS must be a positive integer"));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| invalid(format!("cannot build thread pool: {e}")))
}

/// Runs every `(p, trial, method)` cell; cells fail independently.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let settings = config.settings();
    let seeds = config.trial_seeds();
    let configs: BTreeMap<Method, TrainConfig> = config
        .methods
        .iter()
        .map(|&m| config.method_config(m).map(|c| (m, c)))
        .collect::<Result<_>>()?;
    let worlds_spec: Vec<(f64, usize, u64)> = settings
        .iter()
        .flat_map(|&p| seeds.iter().enumerate().map(move |(t, &s)| (p, t, s)))
        .collect();
    let pool = thread_pool()?;
    let raw = pool.install(|| -> Result<Vec<TrialResult>> {
        let worlds: Vec<World> = worlds_spec
            .par_iter()
            .map(|&(p, _, seed)| {
                let mut spec = config.world.clone();
                spec.p = p;
                build_world(&spec, seed)
            })
            .collect::<Result<_>>()?;
        let jobs: Vec<(usize, Method)> = (0..worlds.len())
            .flat_map(|w| config.methods.iter().map(move |&m| (w, m)))
            .collect();
        Ok(jobs
            .par_iter()
            .map(|&(w, method)| {
                let (p, trial, _) = worlds_spec[w];
                run_method(method, &configs[&method], &config.em, &worlds[w], p, trial)
            })
            .collect())
    })?;
    Ok(ExperimentReport {
        summary: summarize(&config.methods, &settings, &raw),
        raw,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = format!("# summary schema_version={SCHEMA_VERSION}\n");
    out.push_str("method,p,trials,failures");
    for name in ["test_accuracy", "aligned_test_accuracy", "confusion_mse", "predictor_error", "label_accuracy"] {
        let _ = write!(out, ",{name}_mean,{name}_std");
    }
    out.push('\n');
    for r in &report.summary {
        let _ = write!(out, "{},{},{},{}", r.method.name(), r.p, r.trials, r.failures);
        for s in [&r.test_accuracy, &r.aligned_test_accuracy, &r.confusion_mse, &r.predictor_error, &r.label_accuracy] {
            let _ = write!(out, ",{},{}", opt(s.mean), opt(s.std));
        }
        out.push('\n');
    }
    out
}

pub fn raw_csv(report: &ExperimentReport) -> String {
    let mut out = format!("# raw_results schema_version={SCHEMA_VERSION}\n");
    out.push_str(
        "method,p,trial,seed,test_accuracy,aligned_test_accuracy,confusion_mse,predictor_error,mean_kl,bayes_accuracy,label_accuracy,lambda,learning_rate,epochs,final_loss,max_colsum_dev,error\n",
    );
    for r in &report.raw {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method.name(),
            r.p,
            r.trial,
            r.seed,
            opt(m.test_accuracy),
            opt(m.aligned_test_accuracy),
            opt(m.confusion_mse),
            opt(m.predictor_error),
            opt(m.mean_kl),
            opt(m.bayes_accuracy),
            opt(m.label_accuracy),
            opt(r.lambda),
            opt(r.learning_rate),
            r.epochs.map(|e| e.to_string()).unwrap_or_default(),
            opt(r.final_loss),
            opt(r.max_colsum_dev),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        );
    }
    out
}

pub fn loss_curves_csv(report: &ExperimentReport) -> String {
    let mut out = format!("# loss_curves schema_version={SCHEMA_VERSION}\n");
    out.push_str("method,p,trial,epoch,loss,data,reg,val_acc\n");
    for r in &report.raw {
        if let Some(h) = &r.history {
            for e in &h.records {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    r.method.name(),
                    r.p,
                    r.trial,
                    e.epoch,
                    e.loss,
                    e.data,
                    e.reg,
                    opt(e.val_acc)
                );
            }
        }
    }
    out
}

pub fn accuracy_vs_p_csv(report: &ExperimentReport) -> String {
    let mut out = format!("# accuracy_vs_p schema_version={SCHEMA_VERSION}\n");
    out.push_str("method,p,test_accuracy_mean,test_accuracy_std,confusion_mse_mean,confusion_mse_std\n");
    for r in &report.summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method.name(),
            r.p,
            opt(r.test_accuracy.mean),
            opt(r.test_accuracy.std),
            opt(r.confusion_mse.mean),
            opt(r.confusion_mse.std)
        );
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    config: &'a ExperimentConfig,
    trials: Vec<WorldSeeds>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    schema_version: u32,
    summary: &'a [SummaryRow],
}

#[derive(Serialize)]
struct RawJson<'a> {
    schema_version: u32,
    results: &'a [TrialResult],
}

/// Writes summary, raw results, plot data, and the seed manifest into `dir`.
pub fn write_report(config: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(report))?;
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&SummaryJson {
            schema_version: SCHEMA_VERSION,
            summary: &report.summary,
        })? + "\n",
    )?;
    std::fs::write(dir.join("raw.csv"), raw_csv(report))?;
    std::fs::write(
        dir.join("raw.json"),
        serde_json::to_string_pretty(&RawJson {
            schema_version: SCHEMA_VERSION,
            results: &report.raw,
        })? + "\n",
    )?;
    std::fs::write(dir.join("loss_curves.csv"), loss_curves_csv(report))?;
    if config.p_sweep.is_some() {
        std::fs::write(dir.join("accuracy_vs_p.csv"), accuracy_vs_p_csv(report))?;
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "geocrowd",
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
        trials: config.trial_seeds().into_iter().map(WorldSeeds::from_seed).collect(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m));
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert_eq!(Method::parse("bogus"), None);
    }

    #[test]
    fn sample_std() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.std, Some(1.0));
        assert_eq!(Stat::of(&[4.0]).std, Some(0.0));
    }

    #[test]
    fn unregularized_drops_lambda() {
        let mut base = TrainConfig::default();
        base.regularizer.lambda = 0.01;
        base.lambda_grid = Some(vec![0.1]);
        let c = Method::Unregularized.train_config(&base);
        assert_eq!(c.regularizer.lambda, 0.0);
        assert!(c.lambda_grid.is_none());
        let f = Method::GeocrowdF.train_config(&base);
        assert_eq!(f.regularizer.kind, RegularizerKind::LogdetF);
        assert_eq!(f.regularizer.lambda, 0.01);
    }
}
