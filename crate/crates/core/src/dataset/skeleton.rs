//! Skeleton hierarchy definitions.
//!
//! The definition file format is one joint per line, `<index> <name>
//! <parent-index|-1>`, `#` starts a comment, indices 0-based and contiguous.
//! The stock 22-joint Kinect hierarchy ships with the crate and can be
//! swapped for any other tree without recompiling.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// The bundled 22-joint Kinect hierarchy (UI-PRMD joint order).
pub const KINECT22_TEXT: &str = include_str!("../../data/kinect22.txt");

/// A validated joint tree: names, parent links, a single root, and a
/// precomputed parents-before-children traversal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonDefinition {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    root: usize,
    topo: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SkeletonError {
    Empty,
    Format { line: usize, message: String },
    /// Joint indices in the file must be 0-based and contiguous.
    NonContiguousIndex { line: usize, found: usize, expected: usize },
    /// The file layout requires parents to be declared before children.
    ForwardParent { line: usize, joint: usize, parent: usize },
    ParentOutOfRange { joint: usize, parent: usize },
    DuplicateName { name: String },
    MultipleRoots { first: usize, second: usize },
    NoRoot,
    /// Joint cannot be reached from the root (cycle or disconnected part).
    Unreachable { joint: usize },
}

impl core::fmt::Display for SkeletonError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SkeletonError::Empty => write!(f, "skeleton definition has no joints"),
            SkeletonError::Format { line, message } => write!(f, "line {line}: {message}"),
            SkeletonError::NonContiguousIndex { line, found, expected } => {
                write!(f, "line {line}: joint index {found}, expected {expected}")
            }
            SkeletonError::ForwardParent { line, joint, parent } => write!(
                f,
                "line {line}: joint {joint} references parent {parent} declared later"
            ),
            SkeletonError::ParentOutOfRange { joint, parent } => {
                write!(f, "joint {joint}: parent index {parent} out of range")
            }
            SkeletonError::DuplicateName { name } => write!(f, "duplicate joint name `{name}`"),
            SkeletonError::MultipleRoots { first, second } => {
                write!(f, "multiple roots: joints {first} and {second}")
            }
            SkeletonError::NoRoot => write!(f, "no root joint (every joint has a parent)"),
            SkeletonError::Unreachable { joint } => {
                write!(f, "joint {joint} does not reach the root (cycle?)")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SkeletonError {}

impl SkeletonDefinition {
    /// Validate a joint tree given parent links (`None` marks the root).
    /// Accepts any storage order; the traversal order is computed here.
    pub fn new(names: Vec<String>, parent: Vec<Option<usize>>) -> Result<Self, SkeletonError> {
        let n = names.len();
        if n == 0 {
            return Err(SkeletonError::Empty);
        }
        if parent.len() != n {
            return Err(SkeletonError::Format {
                line: 0,
                message: "name/parent length mismatch".to_string(),
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if names[i] == names[j] {
                    return Err(SkeletonError::DuplicateName {
                        name: names[i].clone(),
                    });
                }
            }
        }
        let mut root = None;
        for (j, p) in parent.iter().enumerate() {
            match *p {
                None => match root {
                    None => root = Some(j),
                    Some(first) => {
                        return Err(SkeletonError::MultipleRoots { first, second: j })
                    }
                },
                Some(p) if p >= n || p == j => {
                    return Err(SkeletonError::ParentOutOfRange { joint: j, parent: p })
                }
                Some(_) => {}
            }
        }
        let root = root.ok_or(SkeletonError::NoRoot)?;

        // Breadth-first walk from the root; the visit order doubles as the
        // parents-before-children traversal order.
        let mut children: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
        for (j, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(j);
            }
        }
        let mut topo = Vec::with_capacity(n);
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(root);
        while let Some(j) = queue.pop_front() {
            topo.push(j);
            for &c in &children[j] {
                queue.push_back(c);
            }
        }
        if topo.len() != n {
            let mut seen = alloc::vec![false; n];
            for &j in &topo {
                seen[j] = true;
            }
            let joint = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(SkeletonError::Unreachable { joint });
        }

        Ok(SkeletonDefinition {
            names,
            parent,
            root,
            topo,
        })
    }

    /// Parse the definition file format. On top of [`SkeletonDefinition::new`]
    /// this enforces contiguous 0-based indices and parents declared before
    /// children, so files read top-to-bottom like the traversal.
    pub fn from_text(text: &str) -> Result<Self, SkeletonError> {
        let mut names = Vec::new();
        let mut parent: Vec<Option<usize>> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (idx, name, par) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), Some(c)) if fields.next().is_none() => (a, b, c),
                _ => {
                    return Err(SkeletonError::Format {
                        line: line_no,
                        message: "expected `<index> <name> <parent|-1>`".to_string(),
                    })
                }
            };
            let idx: usize = idx.parse().map_err(|_| SkeletonError::Format {
                line: line_no,
                message: "bad joint index".to_string(),
            })?;
            if idx != names.len() {
                return Err(SkeletonError::NonContiguousIndex {
                    line: line_no,
                    found: idx,
                    expected: names.len(),
                });
            }
            let par: i64 = par.parse().map_err(|_| SkeletonError::Format {
                line: line_no,
                message: "bad parent index".to_string(),
            })?;
            let par = if par < 0 {
                None
            } else {
                let p = par as usize;
                if p >= idx {
                    return Err(SkeletonError::ForwardParent {
                        line: line_no,
                        joint: idx,
                        parent: p,
                    });
                }
                Some(p)
            };
            names.push(name.to_string());
            parent.push(par);
        }
        SkeletonDefinition::new(names, parent)
    }

    /// The bundled 22-joint Kinect hierarchy.
    pub fn kinect22() -> SkeletonDefinition {
        SkeletonDefinition::from_text(KINECT22_TEXT)
            .expect("bundled kinect22 definition is valid")
    }

    pub fn joint_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parent[joint]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Traversal order with every parent before its children.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }
}
