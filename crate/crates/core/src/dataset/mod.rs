//! Movement recordings: domain types, text parsing, and file naming.
//!
//! A recording is plain text, one frame per line. Angle files carry
//! `3 * J` columns (Y X Z Euler angles per joint, in skeleton definition
//! order); position files carry `3 * J` columns (X Y Z local offsets per
//! joint). The two files of one episode are zipped row-wise. A combined
//! single-file layout with `6 * J` columns (all angle columns, then all
//! position columns) is also supported. Columns may be separated by any mix
//! of spaces, tabs, and commas.
//!
//! Everything here is pure string processing; the `motion-grader` binary owns
//! the directory walking that feeds it.

mod skeleton;

pub use skeleton::{SkeletonDefinition, SkeletonError, KINECT22_TEXT};

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Correctness label of one recorded execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    /// Class index used by the classifier: incorrect = 0, correct = 1.
    pub fn class_index(self) -> usize {
        match self {
            Label::Incorrect => 0,
            Label::Correct => 1,
        }
    }

    pub fn from_class_index(index: usize) -> Option<Label> {
        match index {
            0 => Some(Label::Incorrect),
            1 => Some(Label::Correct),
            _ => None,
        }
    }
}

/// Identity of one recording: who did what, which repetition, and how well.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleMeta {
    pub subject: u8,
    pub movement: u8,
    pub episode: u8,
    pub label: Label,
}

/// Per-joint datum of one frame: YXZ Euler angles (degrees in the stock
/// recordings) and the local offset from the parent joint. Root values are
/// absolute rather than parent-relative.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    /// Euler angles in Y, X, Z order.
    pub euler: [f64; 3],
    /// Offset in X, Y, Z order, dataset-native length units.
    pub local_pos: [f64; 3],
}

/// One frame: the joints of a single time step, in definition order.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    joints: Vec<JointSample>,
}

impl SkeletonFrame {
    pub fn new(joints: Vec<JointSample>) -> Self {
        SkeletonFrame { joints }
    }

    pub fn joints(&self) -> &[JointSample] {
        &self.joints
    }
}

/// One segmented repetition: metadata plus a non-empty frame sequence in
/// which every frame has the same joint count.
#[derive(Debug, Clone, PartialEq)]
pub struct MovementSample {
    meta: SampleMeta,
    frames: Vec<SkeletonFrame>,
}

impl MovementSample {
    pub fn from_frames(meta: SampleMeta, frames: Vec<SkeletonFrame>) -> Result<Self, ParseError> {
        let first = frames.first().ok_or(ParseError::Empty)?;
        let expected = first.joints.len();
        for (i, f) in frames.iter().enumerate() {
            if f.joints.len() != expected {
                return Err(ParseError::FrameJointMismatch {
                    frame: i,
                    found: f.joints.len(),
                    expected,
                });
            }
        }
        Ok(MovementSample { meta, frames })
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    pub fn frames(&self) -> &[SkeletonFrame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn joint_count(&self) -> usize {
        self.frames[0].joints.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// A row had the wrong number of columns.
    ColumnCount {
        line: usize,
        found: usize,
        expected: usize,
    },
    /// A token did not parse as a finite real number.
    InvalidNumber { line: usize, token: String },
    /// The recording contained no data rows.
    Empty,
    /// Angle and position streams disagree on the frame count.
    LengthMismatch {
        angle_rows: usize,
        position_rows: usize,
    },
    /// Frames of one sample disagree on the joint count.
    FrameJointMismatch {
        frame: usize,
        found: usize,
        expected: usize,
    },
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParseError::ColumnCount {
                line,
                found,
                expected,
            } => write!(f, "line {line}: {found} columns, expected {expected}"),
            ParseError::InvalidNumber { line, token } => {
                write!(f, "line {line}: `{token}` is not a finite number")
            }
            ParseError::Empty => write!(f, "recording has no data rows"),
            ParseError::LengthMismatch {
                angle_rows,
                position_rows,
            } => write!(
                f,
                "angle stream has {angle_rows} rows, position stream has {position_rows}"
            ),
            ParseError::FrameJointMismatch {
                frame,
                found,
                expected,
            } => write!(f, "frame {frame}: {found} joints, expected {expected}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

fn parse_rows(text: &str, expected_cols: usize) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(expected_cols);
        for token in line
            .split(|c: char| c == ' ' || c == '\t' || c == ',')
            .filter(|t| !t.is_empty())
        {
            let value: f64 = token.parse().map_err(|_| ParseError::InvalidNumber {
                line: line_no,
                token: token.to_string(),
            })?;
            if !value.is_finite() {
                return Err(ParseError::InvalidNumber {
                    line: line_no,
                    token: token.to_string(),
                });
            }
            values.push(value);
        }
        if values.len() != expected_cols {
            return Err(ParseError::ColumnCount {
                line: line_no,
                found: values.len(),
                expected: expected_cols,
            });
        }
        rows.push(values);
    }
    Ok(rows)
}

fn frame_from_columns(angles: &[f64], positions: &[f64], joint_count: usize) -> SkeletonFrame {
    let joints = (0..joint_count)
        .map(|j| JointSample {
            euler: [angles[3 * j], angles[3 * j + 1], angles[3 * j + 2]],
            local_pos: [positions[3 * j], positions[3 * j + 1], positions[3 * j + 2]],
        })
        .collect();
    SkeletonFrame::new(joints)
}

/// Parse the two parallel streams (angles and positions) of one episode.
pub fn parse_movement_pair(
    angles: &str,
    positions: &str,
    joint_count: usize,
    meta: SampleMeta,
) -> Result<MovementSample, ParseError> {
    let cols = 3 * joint_count;
    let angle_rows = parse_rows(angles, cols)?;
    let position_rows = parse_rows(positions, cols)?;
    if angle_rows.len() != position_rows.len() {
        return Err(ParseError::LengthMismatch {
            angle_rows: angle_rows.len(),
            position_rows: position_rows.len(),
        });
    }
    let frames: Vec<SkeletonFrame> = angle_rows
        .iter()
        .zip(position_rows.iter())
        .map(|(a, p)| frame_from_columns(a, p, joint_count))
        .collect();
    MovementSample::from_frames(meta, frames)
}

/// Parse the single-file layout: `6 * J` columns per row, all angle columns
/// followed by all position columns.
pub fn parse_movement_combined(
    text: &str,
    joint_count: usize,
    meta: SampleMeta,
) -> Result<MovementSample, ParseError> {
    let cols = 3 * joint_count;
    let rows = parse_rows(text, 2 * cols)?;
    let frames: Vec<SkeletonFrame> = rows
        .iter()
        .map(|row| frame_from_columns(&row[..cols], &row[cols..], joint_count))
        .collect();
    MovementSample::from_frames(meta, frames)
}

fn write_rows(out: &mut String, rows: impl Iterator<Item = Vec<f64>>) {
    use core::fmt::Write;
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            // `{}` prints the shortest representation that parses back to the
            // same f64, which is what keeps serialize/parse round trips exact.
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
}

/// Serialize a sample back to the paired text layout: `(angles, positions)`.
pub fn write_movement_pair(sample: &MovementSample) -> (String, String) {
    let mut angles = String::new();
    let mut positions = String::new();
    write_rows(
        &mut angles,
        sample
            .frames()
            .iter()
            .map(|f| f.joints().iter().flat_map(|j| j.euler).collect()),
    );
    write_rows(
        &mut positions,
        sample
            .frames()
            .iter()
            .map(|f| f.joints().iter().flat_map(|j| j.local_pos).collect()),
    );
    (angles, positions)
}

// ---------------------------------------------------------------------------
// File naming
// ---------------------------------------------------------------------------

/// Which on-disk layout a recording directory uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FileLayout {
    /// `m01_s01_e01_angles.txt` plus `m01_s01_e01_positions.txt` per episode.
    Paired,
    /// One `m01_s01_e01.txt` per episode with 6·J columns.
    Combined,
}

/// Role of a single recording file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Angles,
    Positions,
    Combined,
}

/// Metadata recovered from a file name, before any directory context is
/// applied. `incorrect` is true only when the name itself carries the
/// incorrect-execution suffix; callers may additionally mark files incorrect
/// by folder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParsedName {
    pub movement: u8,
    pub subject: u8,
    pub episode: u8,
    pub kind: FileKind,
    pub incorrect: bool,
}

/// File naming convention. The defaults match the public UI-PRMD Kinect
/// layout: `m{MM}_s{SS}_e{EE}_angles.txt` / `..._positions.txt`, with
/// incorrect executions distinguished either by an `_inc` name suffix or by
/// living under a folder whose name contains `incorrect` (both accepted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamingConfig {
    pub angles_tag: String,
    pub positions_tag: String,
    /// Final name component marking an incorrect execution (`inc`).
    pub incorrect_suffix: String,
    /// Substring of a directory name marking incorrect executions
    /// (matched case-insensitively).
    pub incorrect_dir_marker: String,
    pub layout: FileLayout,
}

impl Default for NamingConfig {
    fn default() -> Self {
        NamingConfig {
            angles_tag: String::from("angles"),
            positions_tag: String::from("positions"),
            incorrect_suffix: String::from("inc"),
            incorrect_dir_marker: String::from("incorrect"),
            layout: FileLayout::Paired,
        }
    }
}

fn numbered(token: &str, prefix: char) -> Option<u8> {
    let digits = token.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let value: u8 = digits.parse().ok()?;
    (value >= 1).then_some(value)
}

impl NamingConfig {
    /// Recover movement/subject/episode/kind from a file name, or `None` if
    /// the name does not belong to the configured convention.
    pub fn parse_file_name(&self, name: &str) -> Option<ParsedName> {
        let stem = name.strip_suffix(".txt")?;
        let mut parts: Vec<&str> = stem.split('_').collect();
        let incorrect = parts.last() == Some(&self.incorrect_suffix.as_str());
        if incorrect {
            parts.pop();
        }
        let kind = match self.layout {
            FileLayout::Paired => {
                if parts.len() != 4 {
                    return None;
                }
                let tag = parts.pop().unwrap();
                if tag == self.angles_tag {
                    FileKind::Angles
                } else if tag == self.positions_tag {
                    FileKind::Positions
                } else {
                    return None;
                }
            }
            FileLayout::Combined => {
                if parts.len() != 3 {
                    return None;
                }
                FileKind::Combined
            }
        };
        Some(ParsedName {
            movement: numbered(parts[0], 'm')?,
            subject: numbered(parts[1], 's')?,
            episode: numbered(parts[2], 'e')?,
            kind,
            incorrect,
        })
    }

    /// Canonical file name for a sample, using the suffix convention for
    /// incorrect executions.
    pub fn file_name(&self, meta: &SampleMeta, kind: FileKind) -> String {
        use core::fmt::Write;
        let mut name = String::new();
        let _ = write!(
            name,
            "m{:02}_s{:02}_e{:02}",
            meta.movement, meta.subject, meta.episode
        );
        match kind {
            FileKind::Angles => {
                name.push('_');
                name.push_str(&self.angles_tag);
            }
            FileKind::Positions => {
                name.push('_');
                name.push_str(&self.positions_tag);
            }
            FileKind::Combined => {}
        }
        if meta.label == Label::Incorrect {
            name.push('_');
            name.push_str(&self.incorrect_suffix);
        }
        name.push_str(".txt");
        name
    }

    /// Whether a directory name marks its contents as incorrect executions.
    pub fn dir_marks_incorrect(&self, dir_name: &str) -> bool {
        dir_name
            .to_ascii_lowercase()
            .contains(&self.incorrect_dir_marker)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn meta() -> SampleMeta {
        SampleMeta {
            subject: 1,
            movement: 2,
            episode: 3,
            label: Label::Correct,
        }
    }

    fn row(cols: usize, base: f64) -> String {
        (0..cols)
            .map(|c| format!("{}", base + c as f64))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn parses_two_frames_of_22_joints() {
        let angles = format!("{}\n{}\n", row(66, 0.0), row(66, 100.0));
        let positions = format!("{}\n{}\n", row(66, 200.0), row(66, 300.0));
        let sample = parse_movement_pair(&angles, &positions, 22, meta()).unwrap();
        assert_eq!(sample.frame_count(), 2);
        assert_eq!(sample.joint_count(), 22);
        assert_eq!(sample.frames()[0].joints()[0].euler, [0.0, 1.0, 2.0]);
        assert_eq!(sample.frames()[0].joints()[1].local_pos, [203.0, 204.0, 205.0]);
        assert_eq!(sample.frames()[1].joints()[21].euler, [163.0, 164.0, 165.0]);
    }

    #[test]
    fn rejects_wrong_column_count() {
        let angles = row(65, 0.0);
        let positions = row(66, 0.0);
        let err = parse_movement_pair(&angles, &positions, 22, meta()).unwrap_err();
        assert_eq!(
            err,
            ParseError::ColumnCount {
                line: 1,
                found: 65,
                expected: 66
            }
        );
    }

    #[test]
    fn rejects_empty_recording() {
        let err = parse_movement_pair("", "", 22, meta()).unwrap_err();
        assert_eq!(err, ParseError::Empty);
        let err = parse_movement_pair("\n  \n", "\n", 22, meta()).unwrap_err();
        assert_eq!(err, ParseError::Empty);
    }

    #[test]
    fn rejects_row_count_mismatch() {
        let angles = format!("{}\n{}\n", row(6, 0.0), row(6, 1.0));
        let positions = format!("{}\n", row(6, 0.0));
        let err = parse_movement_pair(&angles, &positions, 2, meta()).unwrap_err();
        assert_eq!(
            err,
            ParseError::LengthMismatch {
                angle_rows: 2,
                position_rows: 1
            }
        );
    }

    #[test]
    fn rejects_non_numeric_and_non_finite_tokens() {
        let err = parse_movement_pair("1 2 x", "1 2 3", 1, meta()).unwrap_err();
        assert_eq!(
            err,
            ParseError::InvalidNumber {
                line: 1,
                token: "x".into()
            }
        );
        let err = parse_movement_pair("1 2 inf", "1 2 3", 1, meta()).unwrap_err();
        assert!(matches!(err, ParseError::InvalidNumber { line: 1, .. }));
    }

    #[test]
    fn accepts_mixed_separators_and_scientific_notation() {
        let sample = parse_movement_pair("1,2\t3e-2", " -4 ,5,\t6 ", 1, meta()).unwrap();
        let j = &sample.frames()[0].joints()[0];
        assert_eq!(j.euler, [1.0, 2.0, 0.03]);
        assert_eq!(j.local_pos, [-4.0, 5.0, 6.0]);
    }

    #[test]
    fn combined_layout_splits_angles_then_positions() {
        let text = "1 2 3 4 5 6\n";
        let sample = parse_movement_combined(text, 1, meta()).unwrap();
        let j = &sample.frames()[0].joints()[0];
        assert_eq!(j.euler, [1.0, 2.0, 3.0]);
        assert_eq!(j.local_pos, [4.0, 5.0, 6.0]);
    }

    #[test]
    fn file_names_round_trip_through_parser() {
        let naming = NamingConfig::default();
        let incorrect = SampleMeta {
            label: Label::Incorrect,
            ..meta()
        };
        let name = naming.file_name(&incorrect, FileKind::Angles);
        assert_eq!(name, "m02_s01_e03_angles_inc.txt");
        let parsed = naming.parse_file_name(&name).unwrap();
        assert_eq!(parsed.movement, 2);
        assert_eq!(parsed.subject, 1);
        assert_eq!(parsed.episode, 3);
        assert_eq!(parsed.kind, FileKind::Angles);
        assert!(parsed.incorrect);

        assert!(naming.parse_file_name("m00_s01_e01_angles.txt").is_none());
        assert!(naming.parse_file_name("notes.txt").is_none());
        assert!(naming.parse_file_name("m01_s01_e01_velocity.txt").is_none());
        assert!(naming.dir_marks_incorrect("Incorrect Segmented Movements"));
        assert!(!naming.dir_marks_incorrect("Segmented Movements"));
    }

    proptest! {
        // Serialize-then-parse is the identity on samples.
        #[test]
        fn round_trip_is_exact(
            joints in 1usize..4,
            frames in 1usize..5,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = crate::SeedRng::seed_from_u64(seed);
            let mut value = |_| {
                // Mix magnitudes, including subnormal-ish and large values.
                let exp = rng.gen_range(-12i32..12);
                rng.gen_range(-1.0..1.0) * 10f64.powi(exp)
            };
            let frame_vec: Vec<SkeletonFrame> = (0..frames)
                .map(|_| {
                    SkeletonFrame::new(
                        (0..joints)
                            .map(|_| JointSample {
                                euler: [value(()), value(()), value(())],
                                local_pos: [value(()), value(()), value(())],
                            })
                            .collect(),
                    )
                })
                .collect();
            let sample = MovementSample::from_frames(meta(), frame_vec).unwrap();
            let (angles, positions) = write_movement_pair(&sample);
            let reparsed = parse_movement_pair(&angles, &positions, joints, meta()).unwrap();
            prop_assert_eq!(sample, reparsed);
        }
    }

    #[test]
    fn from_frames_rejects_ragged_samples() {
        let f1 = SkeletonFrame::new(vec![JointSample {
            euler: [0.0; 3],
            local_pos: [0.0; 3],
        }]);
        let f2 = SkeletonFrame::new(vec![
            JointSample {
                euler: [0.0; 3],
                local_pos: [0.0; 3],
            },
            JointSample {
                euler: [0.0; 3],
                local_pos: [0.0; 3],
            },
        ]);
        let err = MovementSample::from_frames(meta(), vec![f1, f2]).unwrap_err();
        assert_eq!(
            err,
            ParseError::FrameJointMismatch {
                frame: 1,
                found: 2,
                expected: 1
            }
        );
    }
}
