//! Report files: one JSON document plus one flat CSV per experiment, and the
//! merged aggregate tables. All output is deterministic byte-for-byte given
//! the same reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use motion_grader_core::features::FeatureMode;
use motion_grader_core::protocol::{AggregateSummary, ExperimentReport, ExperimentTarget};

use crate::{internal, AppError, AppResult};

/// Canonical file stem for an experiment: `m03_angles`, `general_positions`.
pub fn report_stem(target: ExperimentTarget, mode: FeatureMode) -> String {
    match target {
        ExperimentTarget::Movement(m) => format!("m{m:02}_{}", mode.name()),
        ExperimentTarget::General => format!("general_{}", mode.name()),
    }
}

pub fn write_report(dir: &Path, report: &ExperimentReport) -> AppResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(internal)?;
    let stem = report_stem(report.target, report.mode);

    let mut json = serde_json::to_string_pretty(report).map_err(internal)?;
    json.push('\n');
    let json_path = dir.join(format!("{stem}.json"));
    std::fs::write(&json_path, json).map_err(internal)?;

    let mut csv = String::from("movement,mode,subject,accuracy\n");
    for row in &report.per_subject {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            report.target.name(),
            report.mode.name(),
            row.subject,
            row.accuracy
        );
    }
    std::fs::write(dir.join(format!("{stem}.csv")), csv).map_err(internal)?;
    Ok(json_path)
}

/// Load every `*.json` report in a directory, sorted by file name. Malformed
/// files are an error naming the file.
pub fn load_reports(dir: &Path) -> AppResult<Vec<ExperimentReport>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| AppError::Data(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut reports = Vec::with_capacity(paths.len());
    for path in &paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Data(format!("cannot read {}: {e}", path.display())))?;
        let report: ExperimentReport = serde_json::from_str(&text)
            .map_err(|e| AppError::Data(format!("malformed report {}: {e}", path.display())))?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(AppError::Data(format!(
            "no report files (*.json) found in {}",
            dir.display()
        )));
    }
    Ok(reports)
}

/// Write the two merged tables: mean accuracy per (movement, mode) with
/// per-mode average rows, and the flat per-subject table.
pub fn write_aggregate(dir: &Path, summary: &AggregateSummary) -> AppResult<()> {
    std::fs::create_dir_all(dir).map_err(internal)?;

    let mut modes = String::from("movement,mode,mean_accuracy\n");
    for row in &summary.rows {
        let _ = writeln!(
            modes,
            "{},{},{}",
            row.target.name(),
            row.mode.name(),
            row.mean_accuracy
        );
    }
    for m in &summary.mode_means {
        let _ = writeln!(modes, "average,{},{}", m.mode.name(), m.mean_accuracy);
    }
    std::fs::write(dir.join("aggregate_modes.csv"), modes).map_err(internal)?;

    let mut subjects = String::from("movement,mode,subject,accuracy\n");
    for row in &summary.subject_rows {
        let _ = writeln!(
            subjects,
            "{},{},{},{}",
            row.target.name(),
            row.mode.name(),
            row.subject,
            row.accuracy
        );
    }
    std::fs::write(dir.join("aggregate_subjects.csv"), subjects).map_err(internal)?;
    Ok(())
}

/// Human-readable movement × mode grid for stdout.
pub fn render_table(summary: &AggregateSummary) -> String {
    let mut targets: Vec<ExperimentTarget> = Vec::new();
    let mut modes: Vec<FeatureMode> = Vec::new();
    for row in &summary.rows {
        if !targets.contains(&row.target) {
            targets.push(row.target);
        }
        if !modes.contains(&row.mode) {
            modes.push(row.mode);
        }
    }

    let mut out = String::new();
    let _ = write!(out, "{:<10}", "movement");
    for mode in &modes {
        let _ = write!(out, "{:>12}", mode.name());
    }
    out.push('\n');
    let cell = |target: ExperimentTarget, mode: FeatureMode| -> String {
        summary
            .rows
            .iter()
            .find(|r| r.target == target && r.mode == mode)
            .map(|r| format!("{:.4}", r.mean_accuracy))
            .unwrap_or_else(|| "-".into())
    };
    for target in &targets {
        let _ = write!(out, "{:<10}", target.name());
        for mode in &modes {
            let _ = write!(out, "{:>12}", cell(*target, *mode));
        }
        out.push('\n');
    }
    if !summary.mode_means.is_empty() {
        let _ = write!(out, "{:<10}", "average");
        for mode in &modes {
            let text = summary
                .mode_means
                .iter()
                .find(|m| m.mode == *mode)
                .map(|m| format!("{:.4}", m.mean_accuracy))
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, "{text:>12}");
        }
        out.push('\n');
    }
    out
}
