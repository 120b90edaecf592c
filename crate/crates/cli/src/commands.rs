use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use drx_core::data::{load_any, load_features, standardize, Dataset, LabelColumn, Standardizer};
use drx_core::ensemble::{train_ensemble, EnsembleConfig, EnsembleModel};
use drx_core::eval::{
    cross_validate, emit_report, read_reports, render_markdown, rank_summary, write_atomic,
    AccuracyTable, AlgorithmSpec, EvalReport, ReportFormat,
};

use crate::config::{RunArgs, RunConfig};

pub const MODEL_FORMAT: &str = "drx-model/1";
pub const RANK_SUMMARY_FILE: &str = "rank_summary.json";
pub const TABLE_FILE: &str = "table.md";

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub err: anyhow::Error,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

impl CliError {
    pub fn usage(err: anyhow::Error) -> Self {
        CliError {
            code: EXIT_USAGE,
            err,
        }
    }

    pub fn data(err: anyhow::Error) -> Self {
        CliError {
            code: EXIT_DATA,
            err,
        }
    }
}

impl From<drx_core::Error> for CliError {
    fn from(e: drx_core::Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_DATA };
        CliError {
            code,
            err: e.into(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load_dataset(path: &Path, cfg: &RunConfig) -> CliResult<Dataset> {
    let label = cfg
        .label_column
        .clone()
        .map_or(LabelColumn::Last, LabelColumn::Name);
    Ok(load_any(path, &label)?)
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

pub fn report_file_name(r: &EvalReport) -> String {
    format!(
        "{}-{}-{}.json",
        file_safe(&r.dataset),
        r.algorithm,
        r.seed
    )
}

fn to_json_line<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.into()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn benchmark_dataset(path: &Path, cfg: &RunConfig, out: &Path) -> (Vec<EvalReport>, Option<CliError>) {
    let d = match load_dataset(path, cfg) {
        Ok(d) => d,
        Err(e) => return (Vec::new(), Some(e)),
    };
    log::info!("{}: {} instances, {} features, {} classes", d.name, d.len(), d.n_features(), d.n_classes());
    let mut reports = Vec::new();
    let mut failure = None;
    for &strategy in &cfg.strategies {
        for &inducer in &cfg.inducers {
            let spec = AlgorithmSpec {
                ensemble: cfg.ensemble_config(strategy, inducer),
                standardize: cfg.standardize,
                record_time: cfg.record_time,
            };
            let run = || -> CliResult<EvalReport> {
                let r = cross_validate(&d, &spec, cfg.folds, cfg.seed)?;
                let file = out.join(report_file_name(&r));
                write_atomic(&file, &to_json_line(&r)?)?;
                Ok(r)
            };
            match run() {
                Ok(r) => {
                    println!(
                        "{} {}: {:.2} ± {:.2}",
                        r.dataset,
                        r.algorithm,
                        100.0 * r.mean,
                        100.0 * r.stdev
                    );
                    reports.push(r);
                }
                Err(e) => {
                    let e = CliError {
                        code: e.code,
                        err: e.err.context(format!("{} {}", d.name, spec.name())),
                    };
                    log::error!("{:#}", e.err);
                    failure.get_or_insert(e);
                }
            }
        }
    }
    (reports, failure)
}

pub fn benchmark(args: &RunArgs) -> CliResult<()> {
    let cfg = RunConfig::resolve(args).map_err(CliError::usage)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("reports"));
    fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(CliError::data)?;

    let mut reports = Vec::new();
    let mut failure: Option<CliError> = None;
    for path in &cfg.data {
        let (mut r, err) = benchmark_dataset(path, &cfg, &out);
        reports.append(&mut r);
        if let Some(e) = err {
            let e = CliError {
                code: e.code,
                err: e.err.context(path.display().to_string()),
            };
            if failure.is_none() {
                failure = Some(e);
            } else {
                log::error!("{:#}", e.err);
            }
        }
    }

    if !reports.is_empty() {
        let ext = match cfg.format {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        };
        let summary = out.join(format!("summary.{ext}"));
        if let Err(e) = emit_report(&reports, cfg.format, &summary) {
            log::warn!("summary not written: {e}");
        }
    }
    failure.map_or(Ok(()), Err)
}

/// Everything `predict` needs, as written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub dataset: String,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub standardizer: Option<Standardizer>,
    pub config: EnsembleConfig,
    pub seed: u64,
    pub ensemble: EnsembleModel,
}

impl ModelFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading model {}", path.display()))
            .map_err(CliError::data)?;
        #[derive(Deserialize)]
        struct Header {
            format: String,
        }
        let parse_err = |e: serde_json::Error| CliError::data(anyhow!("{}: {e}", path.display()));
        let header: Header = serde_json::from_str(&text).map_err(parse_err)?;
        if header.format != MODEL_FORMAT {
            return Err(drx_core::Error::Version {
                expected: MODEL_FORMAT.into(),
                found: header.format,
            }
            .into());
        }
        serde_json::from_str(&text).map_err(parse_err)
    }

    /// Ensemble decision and class distribution for a raw (unscaled) row.
    pub fn classify(&self, x: &[f64]) -> drx_core::Result<(usize, Vec<f64>)> {
        match &self.standardizer {
            Some(s) => {
                if x.len() != s.means.len() {
                    return Err(drx_core::Error::Arity {
                        expected: s.means.len(),
                        got: x.len(),
                    });
                }
                self.ensemble.classify(&s.apply(x))
            }
            None => self.ensemble.classify(x),
        }
    }
}

pub fn train(args: &RunArgs) -> CliResult<()> {
    let cfg = RunConfig::resolve(args).map_err(CliError::usage)?;
    let single = |what: &str, n: usize| {
        if n == 1 {
            Ok(())
        } else {
            Err(CliError::usage(anyhow!("{what}: train takes exactly one, got {n}")))
        }
    };
    single("data", cfg.data.len())?;
    single("ensemble", cfg.strategies.len())?;
    single("inducer", cfg.inducers.len())?;

    let raw = load_dataset(&cfg.data[0], &cfg)?;
    let (d, standardizer) = if cfg.standardize {
        let (d, s) = standardize(&raw)?;
        (d, Some(s))
    } else {
        (raw, None)
    };
    let ens_cfg = cfg.ensemble_config(cfg.strategies[0], cfg.inducers[0]);
    let ensemble = train_ensemble(&d, &ens_cfg, cfg.seed)?;
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        dataset: d.name.clone(),
        class_names: d.class_names.clone(),
        feature_names: d.feature_names.clone(),
        standardizer,
        config: ens_cfg,
        seed: cfg.seed,
        ensemble,
    };
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    write_atomic(&out, &to_json_line(&model)?)?;
    println!(
        "trained {} ({} members) on {} -> {}",
        model.ensemble.strategy,
        model.ensemble.len(),
        model.dataset,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Model file written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Rows to classify; a trailing label column is ignored
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV (default: standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn predict(args: &PredictArgs) -> CliResult<()> {
    let model = ModelFile::load(&args.model)?;
    let x = load_features(&args.data, model.ensemble.input_dim)?;
    let mut out = String::from("row,class");
    for c in &model.class_names {
        let _ = write!(out, ",p_{c}");
    }
    out.push('\n');
    for (i, row) in x.row_iter().enumerate() {
        let (c, p) = model.classify(row)?;
        let _ = write!(out, "{i},{}", model.class_names[c]);
        for v in p {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    match &args.out {
        Some(path) => write_atomic(path, out.as_bytes())?,
        None => print!("{out}"),
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Report files or directories of report files
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Significance level: 0.05 or 0.10
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Directory for rank_summary.json and table.md
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn is_report_file(path: &Path) -> bool {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.extension().is_some_and(|e| e == "json")
        && stem != "summary"
        && path.file_name().is_some_and(|n| n != RANK_SUMMARY_FILE)
}

fn collect_report_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))
                .map_err(CliError::data)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_report_file(f))
                .collect();
            found.sort();
            files.append(&mut found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::data(anyhow!("no report files found")));
    }
    Ok(files)
}

pub fn stats(args: &StatsArgs) -> CliResult<()> {
    let mut reports = Vec::new();
    for f in collect_report_files(&args.reports)? {
        reports.append(&mut read_reports(&f)?);
    }
    let table = AccuracyTable::from_reports(&reports)?;
    let summary = rank_summary(&table, args.alpha).map_err(|e| match e {
        drx_core::Error::InvalidArgument(_) => CliError::usage(e.into()),
        e => e.into(),
    })?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CliError::data)?;
    write_atomic(args.out.join(RANK_SUMMARY_FILE), &to_json_line(&summary)?)?;
    write_atomic(args.out.join(TABLE_FILE), render_markdown(&reports)?.as_bytes())?;

    for (a, r) in summary.algorithms.iter().zip(&summary.average_ranks) {
        println!("{a}: average rank {r:.2}");
    }
    let f = summary
        .iman_davenport_f
        .map_or_else(|| "inf".to_string(), |f| format!("{f:.2}"));
    println!(
        "Iman-Davenport F({}, {}) = {f} {} {:.2} at alpha {}; Nemenyi CD = {:.2}",
        summary.df1,
        summary.df2,
        if summary.rejects_null { ">" } else { "<=" },
        summary.f_critical,
        summary.alpha,
        summary.nemenyi_cd
    );
    Ok(())
}
