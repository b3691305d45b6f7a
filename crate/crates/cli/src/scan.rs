//! Recursive dataset scanning: recover (movement, subject, episode, label)
//! from file names, pair angle and position files, parse, and order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use motion_grader_core::dataset::{
    parse_movement_combined, parse_movement_pair, FileKind, FileLayout, Label, MovementSample,
    NamingConfig, ParseError, SampleMeta,
};

#[derive(Debug)]
pub enum ScanError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        path: PathBuf,
        source: ParseError,
    },
    /// Two files claim the same (subject, movement, episode, label) role.
    DuplicateSample {
        meta: SampleMeta,
        first: PathBuf,
        second: PathBuf,
    },
}

impl fmt::Display for ScanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            ScanError::Parse { path, source } => write!(f, "{}: {source}", path.display()),
            ScanError::DuplicateSample {
                meta,
                first,
                second,
            } => write!(
                f,
                "duplicate recording for movement {} subject {} episode {} ({:?}): {} and {}",
                meta.movement,
                meta.subject,
                meta.episode,
                meta.label,
                first.display(),
                second.display()
            ),
        }
    }
}

impl std::error::Error for ScanError {}

/// What a scan produced: parsed samples ordered by (movement, subject,
/// episode, label), plus one line per file that was recognized but could not
/// be used (orphans) or not recognized at all.
#[derive(Debug)]
pub struct ScanOutcome {
    pub samples: Vec<MovementSample>,
    pub skipped: Vec<String>,
}

#[derive(Default)]
struct Slot {
    angles: Option<PathBuf>,
    positions: Option<PathBuf>,
    combined: Option<PathBuf>,
}

type Key = (u8, u8, u8, Label);

/// Walk `root`, classify every `.txt` file against the naming convention,
/// and parse each complete recording. Orphaned halves are reported in the
/// outcome, never silently dropped; duplicate roles are an error.
pub fn scan_dataset(
    root: &Path,
    naming: &NamingConfig,
    joint_count: usize,
) -> Result<ScanOutcome, ScanError> {
    let mut slots: BTreeMap<Key, Slot> = BTreeMap::new();
    let mut skipped = Vec::new();

    let walker = walkdir::WalkDir::new(root).sort_by_file_name();
    for entry in walker {
        let entry = entry.map_err(|e| ScanError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            source: e
                .into_io_error()
                .unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            skipped.push(format!("skipped (non-utf8 name): {}", path.display()));
            continue;
        };
        let Some(parsed) = naming.parse_file_name(name) else {
            if name.ends_with(".txt") {
                skipped.push(format!("skipped (unrecognized name): {}", path.display()));
            }
            continue;
        };
        let in_incorrect_dir = path
            .strip_prefix(root)
            .unwrap_or(path)
            .parent()
            .map(|dir| {
                dir.components()
                    .filter_map(|c| c.as_os_str().to_str())
                    .any(|c| naming.dir_marks_incorrect(c))
            })
            .unwrap_or(false);
        let label = if parsed.incorrect || in_incorrect_dir {
            Label::Incorrect
        } else {
            Label::Correct
        };
        let key = (parsed.movement, parsed.subject, parsed.episode, label);
        let slot = slots.entry(key).or_default();
        let target = match parsed.kind {
            FileKind::Angles => &mut slot.angles,
            FileKind::Positions => &mut slot.positions,
            FileKind::Combined => &mut slot.combined,
        };
        if let Some(first) = target {
            return Err(ScanError::DuplicateSample {
                meta: SampleMeta {
                    subject: parsed.subject,
                    movement: parsed.movement,
                    episode: parsed.episode,
                    label,
                },
                first: first.clone(),
                second: path.to_path_buf(),
            });
        }
        *target = Some(path.to_path_buf());
    }

    let mut samples = Vec::new();
    for ((movement, subject, episode, label), slot) in slots {
        let meta = SampleMeta {
            subject,
            movement,
            episode,
            label,
        };
        let read = |path: &PathBuf| -> Result<String, ScanError> {
            std::fs::read_to_string(path).map_err(|source| ScanError::Io {
                path: path.clone(),
                source,
            })
        };
        let sample = match (naming.layout, slot.angles, slot.positions, slot.combined) {
            (FileLayout::Paired, Some(angles_path), Some(positions_path), _) => {
                let angles = read(&angles_path)?;
                let positions = read(&positions_path)?;
                parse_movement_pair(&angles, &positions, joint_count, meta).map_err(|source| {
                    ScanError::Parse {
                        path: angles_path.clone(),
                        source,
                    }
                })?
            }
            (FileLayout::Paired, Some(orphan), None, _)
            | (FileLayout::Paired, None, Some(orphan), _) => {
                skipped.push(format!(
                    "skipped (missing counterpart file): {}",
                    orphan.display()
                ));
                continue;
            }
            (FileLayout::Combined, _, _, Some(path)) => {
                let text = read(&path)?;
                parse_movement_combined(&text, joint_count, meta).map_err(|source| {
                    ScanError::Parse {
                        path: path.clone(),
                        source,
                    }
                })?
            }
            _ => continue,
        };
        samples.push(sample);
    }

    Ok(ScanOutcome { samples, skipped })
}
