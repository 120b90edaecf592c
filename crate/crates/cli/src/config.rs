//! Run configuration: CLI flags layered over an optional TOML file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use drx_core::dimred::DmParams;
use drx_core::ensemble::{EnsembleConfig, Strategy};
use drx_core::eval::ReportFormat;
use drx_core::inducers::InducerKind;

pub fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse::<Strategy>().map_err(|_| {
        let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
        format!("unknown strategy `{s}` (expected one of {})", names.join(", "))
    })
}

pub fn parse_inducer(s: &str) -> std::result::Result<InducerKind, String> {
    match s {
        "nn" => Ok(InducerKind::Nn),
        "tree" => Ok(InducerKind::Tree),
        "nb" => Ok(InducerKind::Nb),
        _ => Err(format!("unknown inducer `{s}` (expected nn, tree or nb)")),
    }
}

pub fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse::<ReportFormat>().map_err(|e| e.to_string())
}

/// Flags shared by `benchmark` and `train`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with default values for any of these options
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file (CSV with header, label in the last column, or ARFF); repeatable
    #[arg(long = "data")]
    pub data: Vec<PathBuf>,
    /// Ensemble strategies, comma separated
    #[arg(long = "ensemble", value_delimiter = ',', value_parser = parse_strategy)]
    pub ensemble: Vec<Strategy>,
    /// Base inducers, comma separated
    #[arg(long = "inducer", value_delimiter = ',', value_parser = parse_inducer)]
    pub inducer: Vec<InducerKind>,
    /// Ensemble size
    #[arg(long)]
    pub members: Option<usize>,
    /// Reduced dimension as a fraction of the original
    #[arg(long = "dim-frac")]
    pub dim_frac: Option<f64>,
    /// Cross-validation folds
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, env = "DRX_SEED")]
    pub seed: Option<u64>,
    /// Maximum number of unique points the diffusion map is computed on
    #[arg(long = "dm-sample")]
    pub dm_sample: Option<usize>,
    /// Nyström eigenvalue cutoff relative to the largest kernel eigenvalue
    #[arg(long = "dm-delta")]
    pub dm_delta: Option<f64>,
    /// Diffusion time
    #[arg(long = "dm-t")]
    pub dm_t: Option<u32>,
    /// AdaBoost rounds
    #[arg(long = "boost-rounds")]
    pub boost_rounds: Option<usize>,
    /// Z-score features with training-set statistics
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Name of the label column in CSV input (default: last column)
    #[arg(long = "label-column")]
    pub label_column: Option<String>,
    /// Output directory (benchmark) or model file (train)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary format for benchmark: json, csv or markdown
    #[arg(long, value_parser = parse_format)]
    pub format: Option<ReportFormat>,
    /// Store measured wall time in reports (makes them non-reproducible)
    #[arg(long = "record-time")]
    pub record_time: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DmSection {
    sample: Option<usize>,
    delta: Option<f64>,
    t: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<Vec<PathBuf>>,
    ensemble: Option<Vec<String>>,
    inducer: Option<Vec<String>>,
    members: Option<usize>,
    dim_frac: Option<f64>,
    folds: Option<usize>,
    seed: Option<u64>,
    boost_rounds: Option<usize>,
    standardize: Option<bool>,
    label_column: Option<String>,
    out: Option<PathBuf>,
    format: Option<String>,
    record_time: Option<bool>,
    dm: Option<DmSection>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative data paths are relative to the config file
        if let (Some(data), Some(dir)) = (&mut cfg.data, path.parent()) {
            for p in data.iter_mut() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Vec<PathBuf>,
    pub strategies: Vec<Strategy>,
    pub inducers: Vec<InducerKind>,
    pub members: usize,
    pub dim_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub dm: DmParams,
    pub boost_rounds: usize,
    pub standardize: bool,
    pub label_column: Option<String>,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    pub record_time: bool,
}

pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let dm_file = file.dm.unwrap_or_default();
        let defaults = EnsembleConfig::default();

        let strategies = if !args.ensemble.is_empty() {
            args.ensemble.clone()
        } else if let Some(names) = &file.ensemble {
            names
                .iter()
                .map(|n| parse_strategy(n).map_err(anyhow::Error::msg))
                .collect::<Result<_>>()
                .context("ensemble")?
        } else {
            vec![Strategy::Plain]
        };
        let inducers = if !args.inducer.is_empty() {
            args.inducer.clone()
        } else if let Some(names) = &file.inducer {
            names
                .iter()
                .map(|n| parse_inducer(n).map_err(anyhow::Error::msg))
                .collect::<Result<_>>()
                .context("inducer")?
        } else {
            vec![InducerKind::Nn]
        };
        let format = match (args.format, &file.format) {
            (Some(f), _) => f,
            (None, Some(s)) => parse_format(s).map_err(anyhow::Error::msg).context("format")?,
            (None, None) => ReportFormat::Json,
        };

        let cfg = RunConfig {
            data: if args.data.is_empty() {
                file.data.unwrap_or_default()
            } else {
                args.data.clone()
            },
            strategies,
            inducers,
            members: args.members.or(file.members).unwrap_or(defaults.members),
            dim_fraction: args.dim_frac.or(file.dim_frac).unwrap_or(defaults.dim_fraction),
            folds: args.folds.or(file.folds).unwrap_or(10),
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            dm: DmParams {
                sample_size: args.dm_sample.or(dm_file.sample).unwrap_or(defaults.dm.sample_size),
                delta: args.dm_delta.or(dm_file.delta).unwrap_or(defaults.dm.delta),
                t: args.dm_t.or(dm_file.t).unwrap_or(defaults.dm.t),
            },
            boost_rounds: args.boost_rounds.or(file.boost_rounds).unwrap_or(defaults.boost_rounds),
            standardize: args.standardize.or(file.standardize).unwrap_or(false),
            label_column: args.label_column.clone().or(file.label_column),
            out: args.out.clone().or(file.out),
            format,
            record_time: args.record_time || file.record_time.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            bail!("data: at least one dataset is required (--data or `data` in the config file)");
        }
        if self.members == 0 {
            bail!("members: must be at least 1");
        }
        if !(self.dim_fraction > 0.0 && self.dim_fraction <= 1.0) {
            bail!("dim-frac: must lie in (0, 1], got {}", self.dim_fraction);
        }
        if self.folds < 2 {
            bail!("folds: must be at least 2, got {}", self.folds);
        }
        if self.dm.sample_size < 2 {
            bail!("dm-sample: must be at least 2, got {}", self.dm.sample_size);
        }
        if !(self.dm.delta > 0.0 && self.dm.delta <= 1.0) {
            bail!("dm-delta: must lie in (0, 1], got {}", self.dm.delta);
        }
        if self.dm.t == 0 {
            bail!("dm-t: must be at least 1");
        }
        if self.boost_rounds == 0 {
            bail!("boost-rounds: must be at least 1");
        }
        Ok(())
    }

    pub fn ensemble_config(&self, strategy: Strategy, inducer: InducerKind) -> EnsembleConfig {
        EnsembleConfig {
            strategy,
            inducer,
            members: self.members,
            dim_fraction: self.dim_fraction,
            dm: self.dm,
            boost_rounds: self.boost_rounds,
            ..EnsembleConfig::default()
        }
    }
}
