//! Feature construction: recordings to fixed-shape numeric tensors.
//!
//! Two feature modes exist. `Positions` runs forward kinematics and
//! concatenates the absolute (X, Y, Z) of every joint per frame; `Angles`
//! concatenates the raw relative Euler triples (Y, X, Z) exactly as recorded.
//! Either way one frame becomes a `3 * J` wide row (66 for the 22-joint
//! skeleton). Samples are zero-padded at the tail to the longest sample of
//! the collection so they can be stacked into one dense batch.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{MovementSample, SampleMeta, SkeletonDefinition};
use crate::kinematics::{self, KinematicsError, Pose};
use crate::math;

/// Which per-frame feature vector a batch is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FeatureMode {
    /// Absolute 3D joint positions from forward kinematics.
    Positions,
    /// Raw relative YXZ Euler angles as recorded.
    Angles,
}

impl FeatureMode {
    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Positions => "positions",
            FeatureMode::Angles => "angles",
        }
    }
}

/// T×D feature matrix of one sample plus its label and identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    /// Class index (0 = incorrect, 1 = correct).
    pub label: usize,
    pub meta: SampleMeta,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }
}

/// A stack of equally-shaped samples: `n × t_max × dim`, with each sample's
/// true frame count preserved so padding stays identifiable.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    n: usize,
    t_max: usize,
    dim: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
    lengths: Vec<usize>,
    metas: Vec<SampleMeta>,
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn metas(&self) -> &[SampleMeta] {
        &self.metas
    }

    /// The `t_max × dim` block of one sample.
    pub fn sample(&self, i: usize) -> &[f64] {
        let stride = self.t_max * self.dim;
        &self.data[i * stride..(i + 1) * stride]
    }

    /// New batch holding the given samples (same `t_max`), order as given.
    pub fn select(&self, indices: &[usize]) -> PaddedBatch {
        let stride = self.t_max * self.dim;
        let mut data = Vec::with_capacity(indices.len() * stride);
        let mut labels = Vec::with_capacity(indices.len());
        let mut lengths = Vec::with_capacity(indices.len());
        let mut metas = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
            lengths.push(self.lengths[i]);
            metas.push(self.metas[i]);
        }
        PaddedBatch {
            n: indices.len(),
            t_max: self.t_max,
            dim: self.dim,
            data,
            labels,
            lengths,
            metas,
        }
    }

    /// Render one sample as text (for feature dumps): `t_max` lines of `dim`
    /// columns.
    pub fn sample_to_text(&self, i: usize) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let block = self.sample(i);
        for t in 0..self.t_max {
            let row = &block[t * self.dim..(t + 1) * self.dim];
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureError {
    EmptyInput,
    PadTooShort { rows: usize, target: usize },
    Kinematics(KinematicsError),
}

impl From<KinematicsError> for FeatureError {
    fn from(e: KinematicsError) -> Self {
        FeatureError::Kinematics(e)
    }
}

impl core::fmt::Display for FeatureError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FeatureError::EmptyInput => write!(f, "empty input"),
            FeatureError::PadTooShort { rows, target } => {
                write!(f, "cannot pad {rows} rows down to {target}")
            }
            FeatureError::Kinematics(e) => write!(f, "kinematics: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FeatureError {}

/// Concatenate absolute joint positions, (X, Y, Z) per joint per row.
pub fn positions_feature(poses: &[Pose], meta: SampleMeta) -> Result<FeatureMatrix, FeatureError> {
    let first = poses.first().ok_or(FeatureError::EmptyInput)?;
    let cols = 3 * first.joint_count();
    let mut data = Vec::with_capacity(poses.len() * cols);
    for pose in poses {
        for p in pose.positions() {
            data.extend_from_slice(p);
        }
    }
    Ok(FeatureMatrix {
        rows: poses.len(),
        cols,
        data,
        label: meta.label.class_index(),
        meta,
    })
}

/// Concatenate the raw relative Euler triples, (Y, X, Z) per joint per row.
pub fn angles_feature(sample: &MovementSample) -> Result<FeatureMatrix, FeatureError> {
    if sample.frames().is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let cols = 3 * sample.joint_count();
    let mut data = Vec::with_capacity(sample.frame_count() * cols);
    for frame in sample.frames() {
        for joint in frame.joints() {
            data.extend_from_slice(&joint.euler);
        }
    }
    Ok(FeatureMatrix {
        rows: sample.frame_count(),
        cols,
        data,
        label: sample.meta().label.class_index(),
        meta: *sample.meta(),
    })
}

/// Zero-pad a matrix at the tail to `t_max` rows. Label and identity are
/// preserved; `t_max` equal to the current row count is the identity.
pub fn pad_to_length(m: &FeatureMatrix, t_max: usize) -> Result<FeatureMatrix, FeatureError> {
    if t_max < m.rows {
        return Err(FeatureError::PadTooShort {
            rows: m.rows,
            target: t_max,
        });
    }
    let mut data = Vec::with_capacity(t_max * m.cols);
    data.extend_from_slice(&m.data);
    data.resize(t_max * m.cols, 0.0);
    Ok(FeatureMatrix {
        rows: t_max,
        cols: m.cols,
        data,
        label: m.label,
        meta: m.meta,
    })
}

/// Featurize a whole collection: pick the mode, pad everything to the longest
/// sample of the collection, and stack. Sample order is preserved.
///
/// `normalize` standardizes each channel to zero mean and unit variance using
/// statistics over all real (unpadded) frames of the collection; padding rows
/// stay exactly zero. Off by default everywhere.
pub fn build_dataset_tensor(
    samples: &[MovementSample],
    mode: FeatureMode,
    skel: &SkeletonDefinition,
    degrees: bool,
    normalize: bool,
) -> Result<PaddedBatch, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let mut matrices = Vec::with_capacity(samples.len());
    for sample in samples {
        let m = match mode {
            FeatureMode::Angles => angles_feature(sample)?,
            FeatureMode::Positions => {
                let poses = kinematics::convert_sequence(sample, skel, degrees)?;
                positions_feature(&poses, *sample.meta())?
            }
        };
        matrices.push(m);
    }
    if normalize {
        standardize(&mut matrices);
    }
    let t_max = matrices.iter().map(|m| m.rows).max().unwrap_or(0);
    let dim = matrices[0].cols;
    let mut data = Vec::with_capacity(samples.len() * t_max * dim);
    let mut labels = Vec::with_capacity(samples.len());
    let mut lengths = Vec::with_capacity(samples.len());
    let mut metas = Vec::with_capacity(samples.len());
    for m in &matrices {
        let padded = pad_to_length(m, t_max)?;
        data.extend_from_slice(&padded.data);
        labels.push(m.label);
        lengths.push(m.rows);
        metas.push(m.meta);
    }
    Ok(PaddedBatch {
        n: samples.len(),
        t_max,
        dim,
        data,
        labels,
        lengths,
        metas,
    })
}

fn standardize(matrices: &mut [FeatureMatrix]) {
    let dim = matrices[0].cols;
    let mut mean = alloc::vec![0.0; dim];
    let mut count = 0usize;
    for m in matrices.iter() {
        for t in 0..m.rows {
            for (c, v) in m.row(t).iter().enumerate() {
                mean[c] += v;
            }
        }
        count += m.rows;
    }
    for v in &mut mean {
        *v /= count as f64;
    }
    let mut var = alloc::vec![0.0; dim];
    for m in matrices.iter() {
        for t in 0..m.rows {
            for (c, v) in m.row(t).iter().enumerate() {
                let d = v - mean[c];
                var[c] += d * d;
            }
        }
    }
    for v in &mut var {
        *v /= count as f64;
    }
    for m in matrices.iter_mut() {
        for i in 0..m.data.len() {
            let c = i % dim;
            let sd = math::sqrt(var[c]);
            m.data[i] = if sd > 1e-12 {
                (m.data[i] - mean[c]) / sd
            } else {
                0.0
            };
        }
    }
}
