//! Subcommands. Each `cmd_*` function does one command's work and returns
//! its result, so tests can drive the pipeline without spawning processes.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gasfc_core::data::{
    annual_means, build_dataset, clean, drop_missing, feature_names, fit_scaler,
    generate_synthetic, train_test_split, CleanMode, CleaningReport, RawRecord, ScaleMode,
    ScalerParams, SplitMode, TensorDataset, FEATURE_COUNT,
};
use gasfc_core::eval::{
    emissions, evaluate, recursive_forecast, reporting_groups, sensitivity, EmissionsConfig,
    ForecastScenario, MetricSpace, MetricsReport, SensitivityReport,
};
use gasfc_core::models::{linreg_fit, model_init_with, HybridConfig, Model, ModelKind, Predictor};
use gasfc_core::training::{train, LogRow, OptimizerKind, TrainConfig};
use gasfc_core::{Error as CoreError, Tensor};

use crate::checkpoint::{Checkpoint, CheckpointMeta, FitMethod};
use crate::config::AppConfig;
use crate::error::{AppError, Result};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "gasfc", version, about = "Monthly gasoline demand forecasting")]
pub struct Cli {
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (else GASFC_OUT_DIR, the config, or `.`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic monthly dataset.
    Synth(SynthArgs),
    /// Drop incomplete rows and outliers.
    Clean(CleanArgs),
    /// Fit one model (or all three) and write checkpoint, log and metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Forecast annual consumption past the end of the history.
    Forecast(ForecastArgs),
    /// Perturbation sensitivity of a checkpoint.
    Sensitivity(SensitivityArgs),
    /// Convert a consumption forecast to CO2 emissions.
    Emissions(EmissionsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 180)]
    pub months: usize,
    /// Defaults to `<out-dir>/synthetic.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to `<out-dir>/cleaned.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Defaults to the output path with a `.report.json` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub zscore_threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Cleaned CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, conflicts_with = "all")]
    pub model: Option<ModelKind>,
    /// Train hybrid, ann and linreg concurrently.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub split: Option<SplitMode>,
    #[arg(long)]
    pub scale: Option<ScaleMode>,
    /// `ols` (default) or `gradient`; applies to linreg only.
    #[arg(long, value_parser = parse_fit)]
    pub linreg_fit: Option<FitMethod>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `scaled` or `original_units`.
    #[arg(long)]
    pub space: Option<MetricSpace>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Years past the last history year.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// CSV with a `year` column and feature columns that replace the trend.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Defaults to `<out-dir>/<model>.forecast.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub perturbation: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EmissionsArgs {
    /// A `year,predicted_ml_day` forecast CSV.
    #[arg(long)]
    pub forecast: PathBuf,
    /// kg CO2 emitted per liter burned.
    #[arg(long)]
    pub factor: Option<f64>,
    /// Defaults to `<out-dir>/emissions.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_fit(s: &str) -> std::result::Result<FitMethod, String> {
    match s {
        "ols" => Ok(FitMethod::Ols),
        "gradient" => Ok(FitMethod::Gradient),
        other => Err(format!("unknown fit `{other}` (expected ols or gradient)")),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| AppError::Config(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    let out_dir = cfg.resolve_out_dir(cli.out_dir.as_deref());
    match cli.command {
        Command::Synth(a) => {
            set(&mut cfg.seed, a.seed);
            let out = a.output.unwrap_or_else(|| out_dir.join("synthetic.csv"));
            let recs = cmd_synth(cfg.seed, a.months, &out)?;
            println!("wrote {} rows to {}", recs.len(), out.display());
        }
        Command::Clean(a) => {
            set(&mut cfg.zscore_threshold, a.zscore_threshold);
            let out = a.output.unwrap_or_else(|| out_dir.join("cleaned.csv"));
            let report = a
                .report
                .unwrap_or_else(|| out.with_extension("report.json"));
            let r = cmd_clean(&a.input, &out, &report, cfg.zscore_threshold)?;
            println!(
                "kept {} of {} rows ({} missing, {} box-plot, {} z-score); report in {}",
                r.rows_out,
                r.rows_in,
                r.dropped_missing.len(),
                r.dropped_boxplot.len(),
                r.dropped_zscore.len(),
                report.display()
            );
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Train(a) => {
            set(&mut cfg.model, a.model);
            set(&mut cfg.epochs, a.epochs);
            set(&mut cfg.learning_rate, a.learning_rate);
            set(&mut cfg.optimizer, a.optimizer);
            set(&mut cfg.seed, a.seed);
            set(&mut cfg.checkpoint_every, a.checkpoint_every);
            set(&mut cfg.test_fraction, a.test_fraction);
            set(&mut cfg.split, a.split);
            set(&mut cfg.scale, a.scale);
            set(&mut cfg.linreg_fit, a.linreg_fit);
            if a.batch_size.is_some() {
                cfg.batch_size = a.batch_size;
            }
            let data = require_data(a.data, &cfg)?;
            let outcomes = if a.all {
                cmd_train_all(&data, &cfg, &out_dir)?
            } else {
                vec![cmd_train(&data, cfg.model, &cfg, &out_dir)?]
            };
            for o in &outcomes {
                println!(
                    "{}: test rmse {:.6} r2 {:.6} (scaled); checkpoint {}",
                    o.metrics.model,
                    o.metrics.test.scaled.rmse,
                    o.metrics.test.scaled.r_squared,
                    o.checkpoint.display()
                );
            }
        }
        Command::Evaluate(a) => {
            set(&mut cfg.metric_space, a.space);
            let data = require_data(a.data, &cfg)?;
            let (kind, r) = cmd_evaluate(&a.checkpoint, &data, cfg.metric_space, &out_dir)?;
            println!(
                "{kind}: n {} mae {} mse {} rmse {} r2 {} ({})",
                r.n, r.mae, r.mse, r.rmse, r.r_squared, r.space
            );
        }
        Command::Forecast(a) => {
            set(&mut cfg.horizon, a.horizon);
            if a.scenario.is_some() {
                cfg.scenario = a.scenario;
            }
            let f = cmd_forecast(
                &a.checkpoint,
                cfg.horizon,
                cfg.scenario.as_deref(),
                a.output.as_deref(),
                &out_dir,
            )?;
            for (year, v) in f {
                println!("{year} {v:.4}");
            }
        }
        Command::Sensitivity(a) => {
            set(&mut cfg.perturbation, a.perturbation);
            let data = require_data(a.data, &cfg)?;
            let r = cmd_sensitivity(&a.checkpoint, &data, cfg.perturbation, &out_dir)?;
            for g in &r.groups {
                println!("{:<24} {:.4}", g.name, g.weight);
            }
        }
        Command::Emissions(a) => {
            if a.factor.is_some() {
                cfg.factor = a.factor;
            }
            let out = a.output.unwrap_or_else(|| out_dir.join("emissions.csv"));
            for (year, t) in cmd_emissions(&a.forecast, cfg.factor, &out)? {
                println!("{year} {t:.0}");
            }
        }
    }
    Ok(())
}

fn require_data(flag: Option<PathBuf>, cfg: &AppConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.data.clone())
        .ok_or(AppError::MissingFlag {
            flag: "--data",
            explanation: "no data file in the flags or the config",
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    std::fs::write(path, text).map_err(AppError::io(path))
}

pub fn cmd_synth(seed: u64, months: usize, out: &Path) -> Result<Vec<RawRecord>> {
    let recs = generate_synthetic(seed, months)?;
    io::write_records(out, &recs)?;
    Ok(recs)
}

pub fn cmd_clean(
    input: &Path,
    output: &Path,
    report_path: &Path,
    threshold: f64,
) -> Result<CleaningReport> {
    let recs = io::read_records(input)?;
    let (kept, report) = clean(&recs, threshold);
    io::write_records(output, &kept)?;
    write_json(report_path, &report)?;
    Ok(report)
}

/// Complete rows in date order.
fn load_training_rows(path: &Path) -> Result<Vec<RawRecord>> {
    let mut recs = io::read_records(path)?;
    recs.sort_by_key(|r| r.date);
    let (kept, report) = drop_missing(&recs, CleanMode::Training);
    if !report.dropped_missing.is_empty() {
        eprintln!(
            "warning: {}: ignored {} incomplete rows",
            path.display(),
            report.dropped_missing.len()
        );
    }
    if kept.is_empty() {
        return Err(CoreError::Empty("complete rows").into());
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceMetrics {
    pub scaled: MetricsReport,
    pub original_units: MetricsReport,
}

impl SpaceMetrics {
    fn compute(model: &Model, data: &TensorDataset) -> Result<Self> {
        Ok(Self {
            scaled: evaluate(model, data, MetricSpace::Scaled)?,
            original_units: evaluate(model, data, MetricSpace::OriginalUnits)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainMetrics {
    pub model: ModelKind,
    pub fit: FitMethod,
    pub n_train: usize,
    pub n_test: usize,
    pub param_count: usize,
    pub train: SpaceMetrics,
    pub test: SpaceMetrics,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<LogRow>,
    pub metrics: TrainMetrics,
    pub checkpoint: PathBuf,
}

/// Artifact paths for one model: checkpoint, log, metrics.
pub fn train_paths(out_dir: &Path, kind: ModelKind) -> [PathBuf; 3] {
    [
        out_dir.join(format!("{kind}.checkpoint.json")),
        out_dir.join(format!("{kind}.log.csv")),
        out_dir.join(format!("{kind}.metrics.json")),
    ]
}

/// Splits, scales (fitted on the training rows only), fits and scores one
/// model, then writes its checkpoint, iteration log and metrics.
pub fn cmd_train(
    data: &Path,
    kind: ModelKind,
    cfg: &AppConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    let train_cfg: TrainConfig = cfg.train_config();
    train_cfg.validate()?;
    let recs = load_training_rows(data)?;
    let (train_idx, test_idx) =
        train_test_split(recs.len(), cfg.test_fraction, cfg.seed, cfg.split)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| recs[i].clone()).collect::<Vec<_>>();
    let (train_recs, test_recs) = (pick(&train_idx), pick(&test_idx));

    let rows: Vec<Vec<f64>> = train_recs.iter().filter_map(RawRecord::values).collect();
    let names: Vec<&str> = gasfc_core::data::csv_columns()[1..].to_vec();
    let scaler: ScalerParams = fit_scaler(&names, &rows, cfg.scale)?;
    let train_ds = build_dataset(&train_recs, &scaler)?;
    let test_ds = build_dataset(&test_recs, &scaler)?;

    let hybrid_config = HybridConfig::new(FEATURE_COUNT);
    let fit = match kind {
        ModelKind::Linreg => cfg.linreg_fit,
        _ => FitMethod::Gradient,
    };
    let (model, log) = match fit {
        FitMethod::Ols => {
            let flat = train_ds.x.reshape(vec![train_ds.len(), FEATURE_COUNT])?;
            (Model::Linreg(linreg_fit(&flat, &train_ds.y)?), Vec::new())
        }
        FitMethod::Gradient => {
            let init = model_init_with(kind, hybrid_config, cfg.seed)?;
            train(init, &train_ds.x, &train_ds.y, &train_cfg)?
        }
    };

    let metrics = TrainMetrics {
        model: kind,
        fit,
        n_train: train_ds.len(),
        n_test: test_ds.len(),
        param_count: model.param_count(),
        train: SpaceMetrics::compute(&model, &train_ds)?,
        test: SpaceMetrics::compute(&model, &test_ds)?,
    };
    let ck = Checkpoint::new(
        &model,
        CheckpointMeta {
            seed: cfg.seed,
            fit,
            hybrid_config,
            train_config: train_cfg,
            scaler,
            feature_names: feature_names(),
            history: annual_means(&recs),
        },
    );
    let [ck_path, log_path, metrics_path] = train_paths(out_dir, kind);
    ck.save(&ck_path)?;
    io::write_log(&log_path, &log)?;
    write_json(&metrics_path, &metrics)?;
    Ok(TrainOutcome {
        model,
        log,
        metrics,
        checkpoint: ck_path,
    })
}

/// All three models on scoped threads; results in `ModelKind::ALL` order.
pub fn cmd_train_all(data: &Path, cfg: &AppConfig, out_dir: &Path) -> Result<Vec<TrainOutcome>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = ModelKind::ALL
            .iter()
            .map(|&kind| s.spawn(move || cmd_train(data, kind, cfg, out_dir)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    })
}

fn load_dataset(path: &Path, scaler: &ScalerParams) -> Result<TensorDataset> {
    Ok(build_dataset(&load_training_rows(path)?, scaler)?)
}

pub fn cmd_evaluate(
    checkpoint: &Path,
    data: &Path,
    space: MetricSpace,
    out_dir: &Path,
) -> Result<(ModelKind, MetricsReport)> {
    let (ck, model) = Checkpoint::load(checkpoint)?;
    let ds = load_dataset(data, &ck.scaler)?;
    let report = evaluate(&model, &ds, space)?;
    write_json(
        &out_dir.join(format!("{}.evaluation.json", ck.kind)),
        &report,
    )?;
    Ok((ck.kind, report))
}

/// Predictions for `(year, raw features)` rows, in original units.
fn predict_rows(
    model: &dyn Predictor,
    scaler: &ScalerParams,
    rows: &[(i32, Vec<f64>)],
) -> Result<Vec<(i32, f64)>> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let f = rows[0].1.len();
    let x: Vec<f64> = rows
        .iter()
        .flat_map(|(_, v)| v.iter().enumerate().map(|(j, &x)| scaler.scale_value(j, x)))
        .collect();
    let pred = model.predict(&Tensor::new(vec![rows.len(), 1, f], x)?)?;
    Ok(rows
        .iter()
        .zip(pred)
        .map(|((y, _), p)| (*y, scaler.unscale_value(f, p)))
        .collect())
}

/// Writes `<kind>.forecast.csv` (or `output`) and a long-format
/// `<kind>.forecast_series.csv` holding the annual actuals, the model's
/// fitted annual values and the forecast.
pub fn cmd_forecast(
    checkpoint: &Path,
    horizon: usize,
    scenario: Option<&Path>,
    output: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<(i32, f64)>> {
    let (ck, model) = Checkpoint::load(checkpoint)?;
    let history: Vec<(i32, Vec<f64>)> = ck
        .history
        .iter()
        .filter(|r| r.features.iter().all(|v| v.is_finite()))
        .map(|r| (r.year, r.features.to_vec()))
        .collect();
    let mut scen = ForecastScenario::linear_trend(ck.feature_names.clone(), &history, horizon)?;
    if let Some(path) = scenario {
        for (feature, values) in io::read_scenario(path)? {
            scen.set_override(feature, &values)?;
        }
    }
    let forecast = recursive_forecast(&model, &scen, &ck.scaler)?;

    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join(format!("{}.forecast.csv", ck.kind)));
    io::write_year_values(&out, io::FORECAST_HEADER, &forecast)?;

    let mut series: Vec<(String, i32, f64)> = ck
        .history
        .iter()
        .filter_map(|r| r.target.map(|t| ("actual".to_string(), r.year, t)))
        .collect();
    let fitted = predict_rows(&model, &ck.scaler, &history)?;
    series.extend(
        fitted
            .iter()
            .chain(&forecast)
            .map(|&(y, v)| (ck.kind.to_string(), y, v)),
    );
    io::write_series(
        &out_dir.join(format!("{}.forecast_series.csv", ck.kind)),
        &series,
    )?;
    Ok(forecast)
}

#[derive(Debug, Serialize)]
struct SensitivityOutput<'a> {
    model: ModelKind,
    #[serde(flatten)]
    report: &'a SensitivityReport,
}

/// Eight grouped weights (the two population columns share one row).
pub fn cmd_sensitivity(
    checkpoint: &Path,
    data: &Path,
    perturbation: f64,
    out_dir: &Path,
) -> Result<SensitivityReport> {
    let (ck, model) = Checkpoint::load(checkpoint)?;
    let ds = load_dataset(data, &ck.scaler)?;
    let report = sensitivity(
        &model,
        &ds.x,
        &ck.feature_names,
        perturbation,
        &reporting_groups(),
    )?;
    write_json(
        &out_dir.join(format!("{}.sensitivity.json", ck.kind)),
        &SensitivityOutput {
            model: ck.kind,
            report: &report,
        },
    )?;
    Ok(report)
}

pub fn cmd_emissions(
    forecast: &Path,
    factor: Option<f64>,
    output: &Path,
) -> Result<Vec<(i32, f64)>> {
    let factor = factor.ok_or(AppError::MissingFlag {
        flag: "--factor",
        explanation:
            "there is no built-in emission factor; pass the kg of CO2 emitted per liter of \
                      the fuel being modelled",
    })?;
    let cfg = EmissionsConfig::new(factor)?;
    let rows = emissions(&io::read_year_values(forecast, io::FORECAST_HEADER)?, &cfg);
    io::write_year_values(output, io::EMISSIONS_HEADER, &rows)?;
    Ok(rows)
}
