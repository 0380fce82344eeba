//! Feed-forward networks of alternating linear and activation layers.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Tanh => x.tanh(),
        }
    }

    /// Global bound on `|σ'(x)|`.
    pub fn lipschitz(self) -> f64 {
        match self {
            ActivationKind::Relu | ActivationKind::Tanh => 1.0,
            ActivationKind::Sigmoid => 0.25,
        }
    }

    /// Asymptotic output values, ascending; the centers of static buckets.
    pub fn saturation_values(self) -> &'static [f64] {
        match self {
            ActivationKind::Relu => &[0.0],
            ActivationKind::Sigmoid => &[0.0, 1.0],
            ActivationKind::Tanh => &[-1.0, 1.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(ActivationKind::Relu),
            "sigmoid" | "logsig" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            _ => Err(Error::UnknownActivation(s.to_string())),
        }
    }
}

/// `x ↦ W x + b`, with row `i` of `W` feeding output neuron `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        check_dim("linear layer bias", weights.nrows(), bias.len())?;
        Ok(Self { weights, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(x) + &self.bias
    }

    /// `self ∘ first`, i.e. `(W₂W₁, W₂b₁ + b₂)`.
    fn compose_after(&self, first: &LinearLayer) -> LinearLayer {
        LinearLayer {
            weights: self.weights.dot(&first.weights),
            bias: self.weights.dot(&first.bias) + &self.bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Linear(LinearLayer),
    Activation { kind: ActivationKind, width: usize },
}

impl Layer {
    pub fn output_dim(&self) -> usize {
        match self {
            Layer::Linear(l) => l.output_dim(),
            Layer::Activation { width, .. } => *width,
        }
    }

    pub fn is_activation(&self) -> bool {
        matches!(self, Layer::Activation { .. })
    }
}

/// A validated network `L_1, …, L_K`.
///
/// Layers alternate linear/activation starting with a linear layer. The last
/// layer is either an activation or a single trailing linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    name: String,
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Source description of a layer before validation and fusion.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Linear(LinearLayer),
    Activation(ActivationKind),
}

impl Network {
    /// Validates `specs`, fuses runs of consecutive linear layers and infers
    /// activation widths. Errors name the offending 0-based source layer.
    pub fn from_specs(name: impl Into<String>, specs: Vec<LayerSpec>) -> Result<Self> {
        let mut layers: Vec<Layer> = Vec::with_capacity(specs.len());
        let mut width: Option<usize> = None;
        for (index, spec) in specs.into_iter().enumerate() {
            match spec {
                LayerSpec::Linear(linear) => {
                    if linear.output_dim() == 0 || linear.input_dim() == 0 {
                        return Err(Error::Shape {
                            layer: index,
                            message: "linear layer with zero width".into(),
                        });
                    }
                    if let Some(w) = width {
                        if linear.input_dim() != w {
                            return Err(Error::Shape {
                                layer: index,
                                message: format!(
                                    "weights have {} columns but the previous layer has {} outputs",
                                    linear.input_dim(),
                                    w
                                ),
                            });
                        }
                    }
                    width = Some(linear.output_dim());
                    if let Some(Layer::Linear(prev)) = layers.last_mut() {
                        *prev = linear.compose_after(prev);
                    } else {
                        layers.push(Layer::Linear(linear));
                    }
                }
                LayerSpec::Activation(kind) => match (layers.last(), width) {
                    (Some(Layer::Linear(_)), Some(w)) => {
                        layers.push(Layer::Activation { kind, width: w })
                    }
                    (None, _) => {
                        return Err(Error::Shape {
                            layer: index,
                            message: "the first layer must be linear".into(),
                        })
                    }
                    _ => {
                        return Err(Error::Shape {
                            layer: index,
                            message: "two consecutive activation layers".into(),
                        })
                    }
                },
            }
        }
        let input_dim = match layers.first() {
            Some(Layer::Linear(l)) => l.input_dim(),
            _ => {
                return Err(Error::Shape {
                    layer: 0,
                    message: "network has no layers".into(),
                })
            }
        };
        Ok(Self {
            name: name.into(),
            input_dim,
            layers,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::output_dim)
    }

    /// Widths `v_0, v_1, …, v_K`.
    pub fn neuron_counts(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    /// 0-based positions of activation layers followed by a linear layer;
    /// these are the layers whose neurons may be merged.
    pub fn hidden_activation_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].is_activation() && i + 1 < self.layers.len())
            .collect()
    }

    /// Exact forward pass.
    pub fn eval(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim("network input", self.input_dim, x.len())?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Linear(l) => l.apply(&h),
                Layer::Activation { kind, .. } => h.mapv(|v| kind.apply(v)),
            };
        }
        Ok(h)
    }

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
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<model>".into(),
            message: e.to_string(),
        })?;
        let mut specs = Vec::with_capacity(file.layers.len());
        for (index, raw) in file.layers.into_iter().enumerate() {
            specs.push(match raw {
                RawLayer::Linear { weights, bias } => {
                    LayerSpec::Linear(linear_from_rows(index, weights, bias)?)
                }
                RawLayer::Activation { kind } => LayerSpec::Activation(kind.parse()?),
            });
        }
        Self::from_specs(file.name, specs)
    }

    pub fn to_json(&self) -> String {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Linear(l) => RawLayer::Linear {
                    weights: l.weights.outer_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                },
                Layer::Activation { kind, .. } => RawLayer::Activation {
                    kind: kind.as_str().to_string(),
                },
            })
            .collect();
        let file = ModelFile {
            name: self.name.clone(),
            layers,
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn linear_from_rows(index: usize, rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<LinearLayer> {
    let shape_err = |message: String| Error::Shape {
        layer: index,
        message,
    };
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Err(shape_err("empty weight matrix".into()));
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
        return Err(shape_err(format!(
            "weight row {r} has {} entries, expected {n_cols}",
            row.len()
        )));
    }
    if bias.len() != n_rows {
        return Err(shape_err(format!(
            "bias has {} entries but weights have {n_rows} rows",
            bias.len()
        )));
    }
    if rows.iter().flatten().chain(bias.iter()).any(|v| !v.is_finite()) {
        return Err(shape_err("non-finite weight or bias".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let weights = Array2::from_shape_vec((n_rows, n_cols), flat)
        .map_err(|e| shape_err(e.to_string()))?;
    LinearLayer::new(weights, Array1::from(bias))
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(default)]
    name: String,
    layers: Vec<RawLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum RawLayer {
    Linear {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Activation {
        kind: String,
    },
}
