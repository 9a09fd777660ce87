//! `cvqx ml` — feature selection, training, evaluation, cross-validation
//! and the majority-class floor, all over fused traces.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

use cvqx_core::ingest::read_fused_csv_path;
use cvqx_core::mlkit::{
    balance, build_dataset, cross_validate, load_model_path, majority_baseline, md_select,
    save_model, train, ClassReport, ClassScheme, Dataset, DatasetBuildStats, TrainParams,
    FEATURE_NAMES,
};

use crate::config::{pick, require};
use crate::UsageError;

use super::{echo_effective, write_artifact, Ctx};

#[derive(clap::Subcommand)]
pub enum MlCmd {
    /// Rank features by joint mutual information with the delay class.
    Select(SelectArgs),
    /// Train the delay-class network and save the model.
    Train(TrainArgs),
    /// Evaluate a saved model on a fused trace.
    Eval(EvalArgs),
    /// Majority-class floor every model must beat.
    Baseline(BaselineArgs),
    /// Stratified k-fold cross-validation with pooled confusion matrices.
    Cv(CvArgs),
}

#[derive(clap::Args)]
pub struct DataArgs {
    /// Fused trace to learn from.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,

    /// Delay class scheme: binary50 or multiclass.
    #[arg(long)]
    scheme: Option<String>,

    /// Feature columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,

    /// Per-eNB packets withheld while the expected-delay feature warms up.
    #[arg(long)]
    warmup: Option<u64>,
}

#[derive(clap::Args)]
pub struct HyperArgs {
    /// Equalize class supports by subsampling before training.
    #[arg(long)]
    balance: bool,

    /// Hidden layer width.
    #[arg(long)]
    hidden: Option<usize>,

    #[arg(long)]
    learning_rate: Option<f64>,

    #[arg(long)]
    momentum: Option<f64>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(clap::Args)]
pub struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Histogram bins per feature.
    #[arg(long)]
    bins: Option<usize>,

    /// Stop after this many features.
    #[arg(long)]
    max_features: Option<usize>,
}

#[derive(clap::Args)]
pub struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(clap::Args)]
pub struct EvalArgs {
    /// Saved model file.
    #[arg(long, value_name = "QNN")]
    model: Option<PathBuf>,

    /// Fused trace to evaluate on.
    #[arg(long = "in", value_name = "CSV")]
    input: Option<PathBuf>,

    /// Per-eNB packets withheld while the expected-delay feature warms up.
    #[arg(long)]
    warmup: Option<u64>,
}

#[derive(clap::Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(clap::Args)]
pub struct CvArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    hyper: HyperArgs,

    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Serialize)]
struct DataEffective {
    input: String,
    scheme: String,
    features: Vec<String>,
    warmup: u64,
}

#[derive(Serialize)]
struct HyperEffective {
    balance: bool,
    hidden: usize,
    learning_rate: f64,
    momentum: f64,
    batch_size: usize,
    epochs: usize,
    seed: u64,
}

fn parse_scheme(text: &str) -> Result<ClassScheme> {
    text.parse::<ClassScheme>()
        .map_err(|err| anyhow!(UsageError(err.to_string())))
}

fn resolve_data(ctx: &Ctx, args: &DataArgs) -> Result<DataEffective> {
    let section = &ctx.cfg.ml;
    let features = if !args.features.is_empty() {
        args.features.clone()
    } else {
        section
            .features
            .clone()
            .unwrap_or_else(|| FEATURE_NAMES.iter().map(|s| s.to_string()).collect())
    };
    Ok(DataEffective {
        input: require(args.input.clone(), section.input.clone(), "ml input trace")?
            .display()
            .to_string(),
        scheme: pick(args.scheme.clone(), section.scheme.clone(), "binary50".into()),
        features,
        warmup: pick(args.warmup, section.warmup, 20),
    })
}

fn resolve_hyper(ctx: &Ctx, args: &HyperArgs) -> HyperEffective {
    let section = &ctx.cfg.ml;
    let defaults = TrainParams::default();
    HyperEffective {
        balance: args.balance || section.balance.unwrap_or(false),
        hidden: pick(args.hidden, section.hidden, defaults.hidden),
        learning_rate: pick(args.learning_rate, section.learning_rate, defaults.learning_rate),
        momentum: pick(args.momentum, section.momentum, defaults.momentum),
        batch_size: pick(args.batch_size, section.batch_size, defaults.batch_size),
        epochs: pick(args.epochs, section.epochs, defaults.epochs),
        seed: ctx.seed_or_default(),
    }
}

fn train_params(hyper: &HyperEffective) -> TrainParams {
    TrainParams {
        hidden: hyper.hidden,
        learning_rate: hyper.learning_rate,
        momentum: hyper.momentum,
        batch_size: hyper.batch_size,
        epochs: hyper.epochs,
        seed: hyper.seed,
    }
}

fn load_dataset(eff: &DataEffective) -> Result<(Dataset, DatasetBuildStats)> {
    let records = read_fused_csv_path(eff.input.as_ref())
        .with_context(|| format!("cannot read {}", eff.input))?;
    let scheme = parse_scheme(&eff.scheme)?;
    let names: Vec<&str> = eff.features.iter().map(|s| s.as_str()).collect();
    let built = build_dataset(&records, scheme, &names, eff.warmup)?;
    Ok(built)
}

fn describe_build(ds: &Dataset, stats: &DatasetBuildStats) -> String {
    let constants = if stats.constant_features.is_empty() {
        "none".to_string()
    } else {
        stats.constant_features.join(", ")
    };
    format!(
        "dataset: kept {} of {} rows ({} features, {} classes); constant features dropped: {constants}",
        stats.rows_kept,
        stats.rows_total,
        ds.n_features(),
        ds.n_classes
    )
}

#[derive(Serialize)]
struct ReportMetrics {
    accuracy: f64,
    n_classes: usize,
    precision: Vec<f64>,
    recall: Vec<f64>,
    f1: Vec<f64>,
    support: Vec<f64>,
    support_counts: Vec<usize>,
    confusion: Vec<Vec<usize>>,
}

fn report_metrics(report: &ClassReport) -> ReportMetrics {
    ReportMetrics {
        accuracy: report.accuracy,
        n_classes: report.n_classes,
        precision: report.precision.clone(),
        recall: report.recall.clone(),
        f1: report.f1.clone(),
        support: report.support.clone(),
        support_counts: report.support_counts.clone(),
        confusion: report.confusion.clone(),
    }
}

fn render_report(report: &ClassReport) -> String {
    let rows: usize = report.support_counts.iter().sum();
    let mut out = format!("accuracy {:.4} over {rows} rows", report.accuracy);
    for c in 0..report.n_classes {
        out.push_str(&format!(
            "\nclass {c}: precision {:.4} recall {:.4} f1 {:.4} support {} ({:.1}%)",
            report.precision[c],
            report.recall[c],
            report.f1[c],
            report.support_counts[c],
            100.0 * report.support[c]
        ));
    }
    out
}

fn write_metrics<T: Serialize>(ctx: &Ctx, name: &str, metrics: &T) -> Result<PathBuf> {
    let text = toml::to_string_pretty(metrics)?;
    write_artifact(&ctx.out_dir, name, text.as_bytes())
}

pub fn run(ctx: &Ctx, cmd: &MlCmd) -> Result<()> {
    let section = &ctx.cfg.ml;
    match cmd {
        MlCmd::Select(args) => {
            #[derive(Serialize)]
            struct Effective {
                #[serde(flatten)]
                data: DataEffective,
                bins: usize,
                max_features: usize,
            }
            let data = resolve_data(ctx, &args.data)?;
            let (ds, stats) = load_dataset(&data)?;
            println!("{}", describe_build(&ds, &stats));
            let eff = Effective {
                bins: pick(args.bins, section.bins, 10),
                max_features: pick(args.max_features, section.max_features, ds.n_features()),
                data,
            };
            let steps = md_select(&ds, eff.max_features, eff.bins)?;
            let mut buf = Vec::new();
            {
                let mut w = csv::Writer::from_writer(&mut buf);
                w.write_record(["rank", "feature", "joint_mi_bits", "gain_bits"])?;
                for (rank, step) in steps.iter().enumerate() {
                    w.write_record([
                        (rank + 1).to_string(),
                        step.feature.clone(),
                        step.joint_mi_bits.to_string(),
                        step.gain_bits.to_string(),
                    ])?;
                }
                w.flush()?;
            }
            let path = write_artifact(&ctx.out_dir, "selection.csv", &buf)?;
            echo_effective(&ctx.out_dir, "ml-select", ctx.seed, &eff)?;
            for (rank, step) in steps.iter().enumerate() {
                println!(
                    "{:2}. {:<24} joint {:.4} bits  gain {:.4} bits",
                    rank + 1,
                    step.feature,
                    step.joint_mi_bits,
                    step.gain_bits
                );
            }
            if steps.len() < eff.max_features {
                println!(
                    "selection stopped after {} features (no further gain)",
                    steps.len()
                );
            }
            println!("-> {}", path.display());
        }
        MlCmd::Train(args) => {
            #[derive(Serialize)]
            struct Effective {
                #[serde(flatten)]
                data: DataEffective,
                #[serde(flatten)]
                hyper: HyperEffective,
            }
            #[derive(Serialize)]
            struct TrainMetrics {
                rows: usize,
                n_classes: usize,
                final_loss: f64,
                train_accuracy: f64,
            }
            let eff = Effective {
                data: resolve_data(ctx, &args.data)?,
                hyper: resolve_hyper(ctx, &args.hyper),
            };
            let (ds, stats) = load_dataset(&eff.data)?;
            println!("{}", describe_build(&ds, &stats));
            let ds = if eff.hyper.balance {
                balance(&ds, eff.hyper.seed)?
            } else {
                ds
            };
            let outcome = train(&ds, &train_params(&eff.hyper))?;
            let report = outcome.model.evaluate(&ds)?;

            let mut buf = Vec::new();
            save_model(&mut buf, &outcome.model)?;
            let model_path = write_artifact(&ctx.out_dir, "model.qnn", &buf)?;
            let metrics = TrainMetrics {
                rows: ds.n_rows(),
                n_classes: ds.n_classes,
                final_loss: outcome.final_loss,
                train_accuracy: report.accuracy,
            };
            write_metrics(ctx, "train_metrics.toml", &metrics)?;
            echo_effective(&ctx.out_dir, "ml-train", Some(eff.hyper.seed), &eff)?;
            println!(
                "train: rows={} classes={} final_loss={:.6} train_accuracy={:.4} -> {}",
                metrics.rows,
                metrics.n_classes,
                metrics.final_loss,
                metrics.train_accuracy,
                model_path.display()
            );
        }
        MlCmd::Eval(args) => {
            #[derive(Serialize)]
            struct Effective {
                model: String,
                input: String,
                scheme: String,
                features: Vec<String>,
                warmup: u64,
            }
            let model_path = require(args.model.clone(), section.model.clone(), "ml model file")?;
            let input = require(args.input.clone(), section.input.clone(), "ml input trace")?;
            let model = load_model_path(&model_path)
                .with_context(|| format!("cannot load model {}", model_path.display()))?;
            let scheme = model.scheme.ok_or_else(|| {
                anyhow!(
                    "model {} does not state its class scheme",
                    model_path.display()
                )
            })?;
            let eff = Effective {
                model: model_path.display().to_string(),
                input: input.display().to_string(),
                scheme: scheme.to_string(),
                features: model.feature_names.clone(),
                warmup: pick(args.warmup, section.warmup, 20),
            };

            let records = read_fused_csv_path(&input)
                .with_context(|| format!("cannot read {}", input.display()))?;
            let names: Vec<&str> = model.feature_names.iter().map(|s| s.as_str()).collect();
            let (ds, stats) = build_dataset(&records, scheme, &names, eff.warmup)?;
            println!("{}", describe_build(&ds, &stats));
            let report = model.evaluate(&ds)?;
            let path = write_metrics(ctx, "eval_metrics.toml", &report_metrics(&report))?;
            echo_effective(&ctx.out_dir, "ml-eval", ctx.seed, &eff)?;
            println!("{}", render_report(&report));
            println!("-> {}", path.display());
        }
        MlCmd::Baseline(args) => {
            #[derive(Serialize)]
            struct Effective {
                #[serde(flatten)]
                data: DataEffective,
            }
            let eff = Effective {
                data: resolve_data(ctx, &args.data)?,
            };
            let (ds, stats) = load_dataset(&eff.data)?;
            println!("{}", describe_build(&ds, &stats));
            let report = majority_baseline(&ds.labels, ds.n_classes)?;
            let path = write_metrics(ctx, "baseline_metrics.toml", &report_metrics(&report))?;
            echo_effective(&ctx.out_dir, "ml-baseline", ctx.seed, &eff)?;
            println!("{}", render_report(&report));
            println!("-> {}", path.display());
        }
        MlCmd::Cv(args) => {
            #[derive(Serialize)]
            struct Effective {
                #[serde(flatten)]
                data: DataEffective,
                #[serde(flatten)]
                hyper: HyperEffective,
                folds: usize,
            }
            #[derive(Serialize)]
            struct CvMetrics {
                folds: usize,
                fold_accuracies: Vec<f64>,
                fold_final_losses: Vec<f64>,
                #[serde(flatten)]
                pooled: ReportMetrics,
            }
            let eff = Effective {
                data: resolve_data(ctx, &args.data)?,
                hyper: resolve_hyper(ctx, &args.hyper),
                folds: pick(args.folds, section.folds, 5),
            };
            let (ds, stats) = load_dataset(&eff.data)?;
            println!("{}", describe_build(&ds, &stats));
            let ds = if eff.hyper.balance {
                balance(&ds, eff.hyper.seed)?
            } else {
                ds
            };
            let result = cross_validate(&ds, eff.folds, &train_params(&eff.hyper))?;
            let metrics = CvMetrics {
                folds: eff.folds,
                fold_accuracies: result.fold_accuracies.clone(),
                fold_final_losses: result.fold_final_losses.clone(),
                pooled: report_metrics(&result.report),
            };
            let path = write_metrics(ctx, "cv_metrics.toml", &metrics)?;
            echo_effective(&ctx.out_dir, "ml-cv", Some(eff.hyper.seed), &eff)?;
            let folds: Vec<String> = result
                .fold_accuracies
                .iter()
                .map(|a| format!("{a:.4}"))
                .collect();
            println!("fold accuracies: {}", folds.join(" "));
            println!("{}", render_report(&result.report));
            println!("-> {}", path.display());
        }
    }
    Ok(())
}
