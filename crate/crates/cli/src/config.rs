//! Configuration resolution: command-line flags override config-file values,
//! which override the built-in defaults. The fully resolved configuration can
//! be printed with `--dump-config` and is what the reports echo.

use std::path::{Path, PathBuf};

use motion_grader_core::dataset::FileLayout;
use motion_grader_core::features::FeatureMode;
use motion_grader_core::protocol::{ExperimentConfig, FoldLayout};
use serde::{Deserialize, Serialize};

use crate::{AppError, AppResult};

pub const SEED_ENV_VAR: &str = "MOTION_GRADER_SEED";

/// Optional TOML config file. Every field mirrors a command-line flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub skeleton: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub movement: Option<String>,
    pub mode: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub l1_weight: Option<f64>,
    pub dropout: Option<f64>,
    pub seed: Option<u64>,
    pub val_layout: Option<String>,
    pub val_count: Option<usize>,
    pub first_conv_filters: Option<usize>,
    pub jobs: Option<usize>,
    pub file_layout: Option<String>,
    pub radians: Option<bool>,
    pub normalize: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> AppResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            AppError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| AppError::Usage(format!("bad config file {}: {e}", path.display())))
    }
}

/// Which experiments a `crossval` invocation runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MovementSelection {
    /// Every movement id present in the scanned data.
    All,
    /// The pooled any-movement model.
    General,
    /// Explicit movement ids.
    List(Vec<u8>),
}

pub fn parse_movement_selection(text: &str) -> AppResult<MovementSelection> {
    match text.trim() {
        "all" => Ok(MovementSelection::All),
        "general" => Ok(MovementSelection::General),
        list => {
            let mut ids = Vec::new();
            for part in list.split(',') {
                let id: u8 = part.trim().parse().map_err(|_| {
                    AppError::Usage(format!(
                        "bad movement selector `{text}` (expected ids 1-10, a comma list, `all`, or `general`)"
                    ))
                })?;
                if !(1..=10).contains(&id) {
                    return Err(AppError::Usage(format!(
                        "movement id {id} outside 1..10"
                    )));
                }
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
            if ids.is_empty() {
                return Err(AppError::Usage("empty movement selector".into()));
            }
            Ok(MovementSelection::List(ids))
        }
    }
}

pub fn parse_modes(text: &str) -> AppResult<Vec<FeatureMode>> {
    match text {
        "angles" => Ok(vec![FeatureMode::Angles]),
        "positions" => Ok(vec![FeatureMode::Positions]),
        "both" => Ok(vec![FeatureMode::Positions, FeatureMode::Angles]),
        other => Err(AppError::Usage(format!(
            "bad mode `{other}` (expected angles, positions, or both)"
        ))),
    }
}

pub fn parse_fold_layout(text: &str) -> AppResult<FoldLayout> {
    match text {
        "spec" => Ok(FoldLayout::Spec),
        "paper" => Ok(FoldLayout::Paper),
        other => Err(AppError::Usage(format!(
            "bad validation layout `{other}` (expected spec or paper)"
        ))),
    }
}

pub fn parse_file_layout(text: &str) -> AppResult<FileLayout> {
    match text {
        "paired" => Ok(FileLayout::Paired),
        "combined" => Ok(FileLayout::Combined),
        other => Err(AppError::Usage(format!(
            "bad file layout `{other}` (expected paired or combined)"
        ))),
    }
}

/// Seed precedence: flag, then config file, then the `MOTION_GRADER_SEED`
/// environment variable, then 1.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> AppResult<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.parse().map_err(|_| {
            AppError::Usage(format!("{SEED_ENV_VAR}=`{text}` is not a valid seed"))
        }),
        Err(_) => Ok(1),
    }
}

/// Fully resolved `crossval` configuration.
#[derive(Debug, Clone, Serialize)]
pub struct CrossvalConfig {
    pub data: PathBuf,
    pub skeleton: Option<PathBuf>,
    pub out: PathBuf,
    pub movements: MovementSelection,
    pub modes: Vec<FeatureMode>,
    pub file_layout: FileLayout,
    pub jobs: usize,
    pub save_checkpoints: bool,
    pub dump_features: bool,
    /// Everything the experiments themselves consume (the `mode` field is
    /// overwritten per experiment).
    pub experiment: ExperimentConfig,
}

/// Fully resolved `convert` configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConvertConfig {
    pub data: PathBuf,
    pub skeleton: Option<PathBuf>,
    pub out: PathBuf,
    pub file_layout: FileLayout,
    pub degrees: bool,
}

/// Fully resolved `report` configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub reports: PathBuf,
    pub out: PathBuf,
}

pub fn require_path(
    flag: Option<PathBuf>,
    file: Option<PathBuf>,
    what: &str,
) -> AppResult<PathBuf> {
    flag.or(file)
        .ok_or_else(|| AppError::Usage(format!("missing required --{what} (flag or config file)")))
}

pub fn dump_config<T: Serialize>(config: &T) -> AppResult<()> {
    let text = toml::to_string_pretty(config)
        .map_err(|e| AppError::Internal(format!("config serialization: {e}")))?;
    print!("{text}");
    Ok(())
}
