//! Verification problems: input sets, unsafe output sets and instance files.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::interval::IntervalVector;
use crate::zonotope::Zonotope;

/// The input set: an L∞ ball or an explicit box.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Ball { center: Array1<f64>, radius: f64 },
    Box(IntervalVector),
}

impl InputSpec {
    pub fn ball(center: Array1<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "radius must be finite and non-negative, got {radius}"
            )));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite input center".into()));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            InputSpec::Ball { center, .. } => center.len(),
            InputSpec::Box(b) => b.dim(),
        }
    }

    pub fn to_box(&self) -> IntervalVector {
        match self {
            InputSpec::Ball { center, radius } => IntervalVector::new_unchecked(
                center.mapv(|c| c - radius),
                center.mapv(|c| c + radius),
            ),
            InputSpec::Box(b) => b.clone(),
        }
    }

    /// `⟨center, diag(half-widths)⟩`; zero-width dimensions keep a zero column.
    pub fn to_zonotope(&self) -> Zonotope {
        let (center, radius) = match self {
            InputSpec::Ball { center, radius } => {
                (center.clone(), Array1::from_elem(center.len(), *radius))
            }
            InputSpec::Box(b) => (b.center(), b.radius()),
        };
        Zonotope::new(center, Array2::from_diag(&radius)).expect("square generator matrix")
    }
}

/// The unsafe output set that must be avoided.
#[derive(Debug, Clone, PartialEq)]
pub enum UnsafeSpec {
    /// `{ y : A y ≤ b }`.
    Halfspaces { a: Array2<f64>, b: Array1<f64> },
    /// `{ y : y_j ≥ y_label for some j ≠ label }`.
    Classification { label: usize },
}

impl UnsafeSpec {
    pub fn validate(&self, output_dim: usize) -> Result<()> {
        match self {
            UnsafeSpec::Halfspaces { a, b } => {
                check_dim("unsafe set columns", output_dim, a.ncols())?;
                check_dim("unsafe set rows", a.nrows(), b.len())
            }
            UnsafeSpec::Classification { label } => {
                if *label < output_dim {
                    Ok(())
                } else {
                    Err(Error::IndexOutOfRange {
                        index: *label,
                        dim: output_dim,
                    })
                }
            }
        }
    }

    /// Whether a concrete output lies in the unsafe set.
    pub fn contains(&self, y: &Array1<f64>) -> bool {
        match self {
            UnsafeSpec::Halfspaces { a, b } => a
                .outer_iter()
                .zip(b.iter())
                .all(|(row, &bi)| row.dot(y) <= bi),
            UnsafeSpec::Classification { label } => y
                .iter()
                .enumerate()
                .any(|(j, &v)| j != *label && v >= y[*label]),
        }
    }
}

/// One verification instance as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub input: InputSpec,
    pub unsafe_set: UnsafeSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, rename = "unsafe", skip_serializing_if = "Option::is_none")]
    unsafe_set: Option<HalfspaceFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HalfspaceFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Instance {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|err| match err {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: "<instance>".into(),
            message,
        };
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        let input = match (file.center, file.radius, file.bounds) {
            (Some(center), Some(radius), None) => InputSpec::ball(Array1::from(center), radius)?,
            (center, None, Some(bounds)) => {
                let pairs: Vec<(f64, f64)> = bounds.iter().map(|p| (p[0], p[1])).collect();
                let bx = IntervalVector::from_bounds(&pairs)?;
                if let Some(center) = center {
                    check_dim("instance center vs box", bx.dim(), center.len())?;
                }
                InputSpec::Box(bx)
            }
            _ => {
                return Err(parse_err(
                    "expected either \"center\" with \"radius\" or a \"box\"".into(),
                ))
            }
        };
        let unsafe_set = match (file.label, file.unsafe_set) {
            (Some(label), None) => UnsafeSpec::Classification { label },
            (None, Some(hs)) => {
                let rows = hs.a.len();
                let cols = hs.a.first().map_or(0, Vec::len);
                if hs.a.iter().any(|r| r.len() != cols) {
                    return Err(parse_err("ragged unsafe-set matrix".into()));
                }
                let a = Array2::from_shape_vec((rows, cols), hs.a.into_iter().flatten().collect())
                    .map_err(|e| parse_err(e.to_string()))?;
                let b = Array1::from(hs.b);
                check_dim("unsafe set rows", rows, b.len())?;
                UnsafeSpec::Halfspaces { a, b }
            }
            _ => {
                return Err(parse_err(
                    "expected exactly one of \"label\" or \"unsafe\"".into(),
                ))
            }
        };
        Ok(Self { input, unsafe_set })
    }

    pub fn to_json(&self) -> String {
        let mut file = InstanceFile {
            center: None,
            radius: None,
            bounds: None,
            label: None,
            unsafe_set: None,
        };
        match &self.input {
            InputSpec::Ball { center, radius } => {
                file.center = Some(center.to_vec());
                file.radius = Some(*radius);
            }
            InputSpec::Box(b) => {
                file.center = Some(b.center().to_vec());
                file.bounds = Some((0..b.dim()).map(|i| b.bounds(i).into()).collect());
            }
        }
        match &self.unsafe_set {
            UnsafeSpec::Classification { label } => file.label = Some(*label),
            UnsafeSpec::Halfspaces { a, b } => {
                file.unsafe_set = Some(HalfspaceFile {
                    a: a.outer_iter().map(|r| r.to_vec()).collect(),
                    b: b.to_vec(),
                })
            }
        }
        serde_json::to_string(&file).expect("instance serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
