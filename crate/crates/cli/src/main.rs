use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

use geocrowd::baselines::{dawid_skene_em, majority_vote, EmOptions};
use geocrowd::experiment::{
    build_world, integrated_annotations, run_experiment, thread_pool, write_report, ExperimentConfig, Method, WorldSeeds,
    WorldSpec,
};
use geocrowd::geometry::{evaluate, ssc_check, Verdict, DEFAULT_SSC_SAMPLES, DEFAULT_SSC_TOL};
use geocrowd::io::{
    self, read_annotations, read_confusions, read_dataset, write_annotations, write_confusions, write_dataset, write_labels,
    ConfusionRecords, SCHEMA_VERSION,
};
use geocrowd::trainer::{grid_search, read_checkpoint, TrainConfig, Trainer};
use geocrowd::{DenseMatrix, Error};

#[derive(Parser)]
#[command(name = "geocrowd", version, about = "Learning from crowdsourced labels with identifiability-enhancing regularizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world: dataset, annotations, true confusions, manifest.
    Simulate {
        /// World spec JSON, or an experiment config (its `world` and `seed` are used).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a crowd model; writes checkpoint.json and history.csv.
    Train {
        /// Training config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// True confusions, needed by the oracle_kl method.
        #[arg(long)]
        confusions: Option<PathBuf>,
        #[arg(long, value_parser = parse_train_method)]
        method: Option<Method>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Majority vote or Dawid–Skene EM on an annotation file.
    Baseline {
        #[arg(long, value_enum)]
        method: BaselineMethod,
        #[arg(long)]
        annotations: PathBuf,
        /// EM options JSON (`max_iters`, `tol`, `smoothing`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split of a dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        confusions: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Also write the metrics JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sufficiently-scattered test of a matrix's rows.
    Ssc {
        /// Dataset CSV (uses F♮ᵀ), confusion JSON (uses W), or a plain numeric CSV.
        matrix: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long, default_value_t = DEFAULT_SSC_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SSC_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full multi-method, multi-trial experiment from a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Mv,
    DsEm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    #[value(name = "F", alias = "f")]
    F,
    #[value(name = "W", alias = "w")]
    W,
}

fn parse_train_method(s: &str) -> Result<Method, String> {
    match Method::parse(s) {
        Some(m) if m.trains() => Ok(m),
        Some(m) => Err(format!("{} has no classifier; use the baseline subcommand", m.name())),
        None => {
            let names: Vec<&str> = Method::ALL.iter().filter(|m| m.trains()).map(|m| m.name()).collect();
            Err(format!("unknown method {s:?}; expected one of: {}", names.join(", ")))
        }
    }
}

/// Error carrying its process exit code: 2 for usage/config problems, 1 otherwise.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

/// Config-shaped errors map to exit code 2, everything else to 1.
fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidArgument(_) | Error::Format { .. } | Error::Json(_) => usage(e),
        other => runtime(other),
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {what} {}", path.display()))
        .map_err(usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("malformed {what} {}", path.display()))
        .map_err(usage)
}

fn load<T>(r: geocrowd::Result<T>, what: &str, path: &Path) -> CliResult<T> {
    r.map_err(|e| {
        let code = match e {
            Error::Io(_) | Error::Format { .. } | Error::Csv(_) | Error::Json(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            error: anyhow!(e).context(format!("cannot load {what} {}", path.display())),
        }
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(runtime)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)
}

fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let value: serde_json::Value = read_json(config, "config")?;
    let (spec, file_seed): (WorldSpec, u64) = if value.get("world").is_some() {
        let exp: ExperimentConfig = serde_json::from_value(value).context("malformed experiment config").map_err(usage)?;
        (exp.world, exp.seed)
    } else {
        let mut obj = value;
        let s = obj
            .as_object_mut()
            .and_then(|o| o.remove("seed"))
            .and_then(|v| v.as_u64())
            .unwrap_or(0);
        (serde_json::from_value(obj).context("malformed world spec").map_err(usage)?, s)
    };
    let seed = seed.unwrap_or(file_seed);
    let world = build_world(&spec, seed).map_err(classify)?;
    create_dir(out)?;
    write_dataset(&world.dataset, &out.join("dataset.csv")).map_err(runtime)?;
    write_annotations(&world.annotations, &out.join("annotations.csv")).map_err(runtime)?;
    write_confusions(&ConfusionRecords::from(&world.ensemble), &out.join("confusions.json")).map_err(runtime)?;
    let manifest = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "geocrowd",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": "simulate",
        "world": spec,
        "seeds": WorldSeeds::from_seed(seed),
        "files": ["dataset.csv", "annotations.csv", "confusions.json"],
    });
    write_text(&out.join("manifest.json"), &(serde_json::to_string_pretty(&manifest).map_err(runtime)? + "\n"))?;
    println!(
        "wrote {} items, {} annotations from {} annotators to {}",
        world.dataset.num_items(),
        world.annotations.len(),
        world.ensemble.num_annotators(),
        out.display()
    );
    Ok(())
}

struct TrainArgs {
    config: Option<PathBuf>,
    dataset: PathBuf,
    annotations: PathBuf,
    confusions: Option<PathBuf>,
    method: Option<Method>,
    seed: Option<u64>,
    out: PathBuf,
    resume: Option<PathBuf>,
}

fn cmd_train(a: TrainArgs) -> CliResult<()> {
    let mut config: TrainConfig = match &a.config {
        Some(p) => read_json(p, "training config")?,
        None => TrainConfig::default(),
    };
    let resume = match &a.resume {
        Some(p) => Some(load(read_checkpoint(p), "checkpoint", p)?),
        None => None,
    };
    if let Some(m) = a.method {
        config = m.train_config(&config);
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.validate().map_err(classify)?;
    let dataset = load(read_dataset(&a.dataset), "dataset", &a.dataset)?;
    let raw_annotations = load(read_annotations(&a.annotations), "annotations", &a.annotations)?;
    let oracle = match &a.confusions {
        Some(p) => Some(load(read_confusions(p), "confusions", p)?.matrices),
        None => None,
    };
    let annotations = match a.method {
        Some(Method::NnMv) => integrated_annotations(&majority_vote(&raw_annotations, dataset.num_classes), &raw_annotations)
            .map_err(runtime)?,
        Some(Method::NnDsem) => {
            let fit = dawid_skene_em(
                &raw_annotations,
                dataset.num_classes,
                raw_annotations.num_annotators(),
                &EmOptions::default(),
            )
            .map_err(classify)?;
            integrated_annotations(&fit.posteriors, &raw_annotations).map_err(runtime)?
        }
        _ => raw_annotations,
    };
    create_dir(&a.out)?;
    let checkpoint_path = a.out.join("checkpoint.json");
    let history_path = a.out.join("history.csv");

    if config.has_grid() {
        if resume.is_some() {
            return Err(usage(anyhow!("--resume cannot be combined with grid search")));
        }
        let outcome = thread_pool()
            .map_err(classify)?
            .install(|| grid_search(&config, &dataset, &annotations, oracle.as_deref()))
            .map_err(classify)?;
        let mut grid = format!("# grid schema_version={SCHEMA_VERSION}\nlambda,learning_rate,val_accuracy,final_loss,error\n");
        for c in &outcome.cells {
            grid.push_str(&format!(
                "{},{},{},{},{}\n",
                c.lambda,
                c.learning_rate,
                c.val_accuracy.map(|v| v.to_string()).unwrap_or_default(),
                c.final_loss.map(|v| v.to_string()).unwrap_or_default(),
                c.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            ));
        }
        write_text(&a.out.join("grid.csv"), &grid)?;
        geocrowd::trainer::save_checkpoint(&outcome.model, &checkpoint_path).map_err(runtime)?;
        outcome.history.write_csv(&history_path).map_err(runtime)?;
        println!(
            "grid search chose lambda={} lr={} over {} cells",
            outcome.config.regularizer.lambda,
            outcome.config.learning_rate,
            outcome.cells.len()
        );
        return Ok(());
    }

    let mut trainer = match resume {
        Some(ckpt) => {
            let state = ckpt
                .training
                .ok_or_else(|| usage(anyhow!("checkpoint has no training state to resume from")))?;
            Trainer::resume(config, &dataset, &annotations, oracle.as_deref(), state).map_err(classify)?
        }
        None => Trainer::new(config, &dataset, &annotations, oracle.as_deref()).map_err(classify)?,
    };
    trainer.run(None).map_err(runtime)?;
    trainer.save_checkpoint(&checkpoint_path).map_err(runtime)?;
    trainer.history().write_csv(&history_path).map_err(runtime)?;
    let last = trainer.history().last();
    println!(
        "trained {} epochs, final loss {}; wrote {}",
        trainer.state().epoch,
        last.map(|r| r.loss.to_string()).unwrap_or_else(|| "n/a".into()),
        checkpoint_path.display()
    );
    Ok(())
}

fn cmd_baseline(method: BaselineMethod, annotations: &Path, config: Option<&Path>, out: &Path) -> CliResult<()> {
    let ann = load(read_annotations(annotations), "annotations", annotations)?;
    let options: EmOptions = match config {
        Some(p) => read_json(p, "EM options")?,
        None => EmOptions::default(),
    };
    create_dir(out)?;
    match method {
        BaselineMethod::Mv => {
            let q = majority_vote(&ann, ann.num_classes());
            write_labels(&q, &out.join("labels.csv")).map_err(runtime)?;
            println!("majority vote over {} items", q.num_items());
        }
        BaselineMethod::DsEm => {
            let fit = dawid_skene_em(&ann, ann.num_classes(), ann.num_annotators(), &options).map_err(classify)?;
            write_labels(&fit.posteriors, &out.join("labels.csv")).map_err(runtime)?;
            write_confusions(&ConfusionRecords::estimated(&fit.confusions), &out.join("confusions.json"))
                .map_err(runtime)?;
            let mut trace = format!("# em_trace schema_version={SCHEMA_VERSION}\niteration,objective\n");
            for (i, v) in fit.objective_trace.iter().enumerate() {
                trace.push_str(&format!("{i},{v}\n"));
            }
            write_text(&out.join("em_trace.csv"), &trace)?;
            println!(
                "dawid-skene EM: {} iterations, converged={}",
                fit.iterations, fit.converged
            );
        }
    }
    Ok(())
}

fn cmd_evaluate(
    checkpoint: &Path,
    dataset: &Path,
    confusions: Option<&Path>,
    annotations: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let model = load(read_checkpoint(checkpoint), "checkpoint", checkpoint)?.model;
    let ds = load(read_dataset(dataset), "dataset", dataset)?;
    let truth = match confusions {
        Some(p) => Some(load(read_confusions(p), "confusions", p)?.matrices),
        None => None,
    };
    let ann = match annotations {
        Some(p) => Some(load(read_annotations(p), "annotations", p)?),
        None => None,
    };
    let metrics = evaluate(&model, &ds, truth.as_deref(), ann.as_ref()).map_err(classify)?;
    let mut value = serde_json::to_value(&metrics).map_err(runtime)?;
    value["schema_version"] = serde_json::json!(SCHEMA_VERSION);
    let text = serde_json::to_string_pretty(&value).map_err(runtime)? + "\n";
    print!("{text}");
    if let Some(p) = out {
        write_text(p, &text)?;
    }
    Ok(())
}

fn ssc_matrix(path: &Path, target: Target) -> CliResult<DenseMatrix> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    if text.starts_with("# dataset") {
        let ds = load(io::dataset_from_str(&text), "dataset", path)?;
        let f = ds
            .soft_labels
            .ok_or_else(|| usage(anyhow!("dataset {} has no true posteriors", path.display())))?;
        if target == Target::W {
            eprintln!("note: dataset file supplied with --target W; testing its posterior rows");
        }
        return Ok(f.transpose());
    }
    if text.trim_start().starts_with('{') {
        let rec = load(ConfusionRecords::from_json(&text), "confusions", path)?;
        if target == Target::F {
            eprintln!("note: confusion file supplied with --target F; testing the stacked confusions");
        }
        return DenseMatrix::vstack(&rec.matrices).map_err(usage);
    }
    load(io::matrix_from_csv(&text), "matrix", path)
}

fn cmd_ssc(matrix: &Path, target: Target, samples: usize, tol: f64, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let z = ssc_matrix(matrix, target)?;
    let verdict = ssc_check(&z, samples, tol, seed).map_err(classify)?;
    let label = match target {
        Target::F => "F",
        Target::W => "W",
    };
    println!(
        "SSC ({}) on {}x{} {label}: {} ({} of {} boundary directions uncovered, max residual {:e})",
        verdict.scope,
        z.rows(),
        z.cols(),
        match verdict.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        },
        verdict.failures,
        verdict.samples,
        verdict.max_residual
    );
    let advice = match (target, verdict.verdict) {
        (Target::W, Verdict::Pass) => {
            "advice: W passes; the W-regularizer (geocrowd_w) is the natural choice when annotators are many and annotated items are few"
        }
        (Target::F, Verdict::Pass) => {
            "advice: F passes; the F-regularizer (geocrowd_f) is the natural choice when many items are annotated"
        }
        (Target::W, Verdict::Fail) => {
            "advice: W fails; prefer the F-regularizer (geocrowd_f) if the classifier outputs are scattered (large N)"
        }
        (Target::F, Verdict::Fail) => {
            "advice: F fails; prefer the W-regularizer (geocrowd_w) if some annotators are near class specialists"
        }
    };
    println!("{advice}");
    let mut value = serde_json::to_value(&verdict).map_err(runtime)?;
    value["schema_version"] = serde_json::json!(SCHEMA_VERSION);
    value["target"] = serde_json::json!(label);
    value["rows"] = serde_json::json!(z.rows());
    value["cols"] = serde_json::json!(z.cols());
    value["advice"] = serde_json::json!(advice);
    let text = serde_json::to_string_pretty(&value).map_err(runtime)? + "\n";
    println!("{text}");
    if let Some(p) = out {
        write_text(p, &text)?;
    }
    Ok(())
}

fn cmd_experiment(config: &Path, out: Option<PathBuf>, trials: Option<usize>, seed: Option<u64>) -> CliResult<()> {
    let mut cfg: ExperimentConfig = read_json(config, "experiment config")?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| usage(anyhow!("no output directory: pass --out or set output_dir")))?;
    cfg.validate().map_err(classify)?;
    let report = run_experiment(&cfg).map_err(classify)?;
    write_report(&cfg, &report, &dir).map_err(runtime)?;
    println!("{:<14} {:>6} {:>22} {:>24} {:>7}", "method", "p", "test accuracy", "confusion mse", "failed");
    for r in &report.summary {
        let fmt = |s: &geocrowd::experiment::Stat, digits: usize| match (s.mean, s.std) {
            (Some(m), Some(sd)) => format!("{m:.digits$} ± {sd:.digits$}"),
            _ => "-".into(),
        };
        println!(
            "{:<14} {:>6} {:>22} {:>24} {:>7}",
            r.method.name(),
            r.p,
            fmt(&r.test_accuracy, 4),
            fmt(&r.confusion_mse, 6),
            r.failures
        );
    }
    println!("results written to {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Train {
            config,
            dataset,
            annotations,
            confusions,
            method,
            seed,
            out,
            resume,
        } => cmd_train(TrainArgs {
            config,
            dataset,
            annotations,
            confusions,
            method,
            seed,
            out,
            resume,
        }),
        Command::Baseline {
            method,
            annotations,
            config,
            out,
        } => cmd_baseline(method, &annotations, config.as_deref(), &out),
        Command::Evaluate {
            checkpoint,
            dataset,
            confusions,
            annotations,
            out,
        } => cmd_evaluate(&checkpoint, &dataset, confusions.as_deref(), annotations.as_deref(), out.as_deref()),
        Command::Ssc {
            matrix,
            target,
            samples,
            tol,
            seed,
            out,
        } => cmd_ssc(&matrix, target, samples, tol, seed, out.as_deref()),
        Command::Experiment {
            config,
            out,
            trials,
            seed,
        } => cmd_experiment(&config, out, trials, seed),
    }
}

/// Usage line of the subcommand named on the command line, or of the tool.
fn usage_for_args() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = std::env::args().nth(1);
    match name.and_then(|n| cmd.find_subcommand_mut(&n).map(|c| c.render_usage())) {
        Some(u) => u.to_string(),
        None => cmd.render_usage().to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() && !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for_args());
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
