use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetworkError;
use crate::dynamics::ReferenceCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "relu" => Some(Self::Relu),
            "tanh" => Some(Self::Tanh),
            "linear" | "identity" => Some(Self::Linear),
            _ => None,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Linear => x,
        }
    }
}

/// Dense layer `y = act(W x + b)` with `W` stored row-major (`rows` outputs,
/// `cols` inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }
}

/// Output head: the final layer values are squashed with tanh and mapped
/// linearly onto these ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputRanges {
    pub v1: [f64; 2],
    pub w3: [f64; 2],
}

impl Default for OutputRanges {
    fn default() -> Self {
        Self { v1: [0.0, 0.5], w3: [-1.5, 1.5] }
    }
}

impl OutputRanges {
    pub fn scale(&self, z: [f64; 2]) -> [f64; 2] {
        let map = |r: [f64; 2], z: f64| r[0] + (r[1] - r[0]) * 0.5 * (z.tanh() + 1.0);
        [map(self.v1, z[0]), map(self.w3, z[1])]
    }
}

/// Optional per-feature affine input normalization `x' = (x - offset) * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Feed-forward policy network. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    pub input_dim: usize,
    pub ranges: OutputRanges,
    pub normalization: Option<Normalization>,
    pub layers: Vec<Layer>,
}

pub const OUTPUT_DIM: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    input_dim: usize,
    #[serde(default)]
    ranges: OutputRanges,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalization: Option<Normalization>,
    layers: Vec<LayerFile>,
}

fn check_finite(values: &[f64], layer: usize, what: &'static str) -> Result<(), NetworkError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(NetworkError::NonFinite { layer, what, index }),
        None => Ok(()),
    }
}

impl PolicyNetwork {
    /// Validates dimensions and values. `layers` must chain from `input_dim`
    /// to two outputs.
    pub fn new(
        input_dim: usize,
        ranges: OutputRanges,
        normalization: Option<Normalization>,
        layers: Vec<Layer>,
    ) -> Result<Self, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::DimensionMismatch { layer: 0, detail: "no layers".into() });
        }
        let mut width = input_dim;
        for (i, l) in layers.iter().enumerate() {
            if l.cols != width {
                return Err(NetworkError::DimensionMismatch {
                    layer: i,
                    detail: format!("expects {} inputs but receives {width}", l.cols),
                });
            }
            if l.weights.len() != l.rows * l.cols {
                return Err(NetworkError::DimensionMismatch {
                    layer: i,
                    detail: format!("{} weights for a {}x{} matrix", l.weights.len(), l.rows, l.cols),
                });
            }
            if l.bias.len() != l.rows {
                return Err(NetworkError::DimensionMismatch {
                    layer: i,
                    detail: format!("{} biases for {} rows", l.bias.len(), l.rows),
                });
            }
            check_finite(&l.weights, i, "weights")?;
            check_finite(&l.bias, i, "bias")?;
            width = l.rows;
        }
        if width != OUTPUT_DIM {
            return Err(NetworkError::DimensionMismatch {
                layer: layers.len() - 1,
                detail: format!("network must end with {OUTPUT_DIM} outputs, found {width}"),
            });
        }
        let r = ranges;
        if !(r.v1.iter().chain(&r.w3).all(|v| v.is_finite()) && r.v1[0] <= r.v1[1] && r.w3[0] <= r.w3[1]) {
            return Err(NetworkError::InvalidRanges);
        }
        if let Some(n) = &normalization {
            if n.offset.len() != input_dim || n.scale.len() != input_dim {
                return Err(NetworkError::DimensionMismatch {
                    layer: 0,
                    detail: "normalization length differs from input_dim".into(),
                });
            }
            if !n.offset.iter().chain(&n.scale).all(|v| v.is_finite()) {
                return Err(NetworkError::NonFinite { layer: 0, what: "normalization", index: 0 });
            }
        }
        Ok(Self { input_dim, ranges, normalization, layers })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetworkError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        Self::parse(&text, is_toml).map_err(|e| match e {
            NetworkError::Parse { message, .. } => {
                NetworkError::Parse { path: path.display().to_string(), message }
            }
            other => other,
        })
    }

    /// Parses a network document (JSON, or TOML when `toml` is set).
    pub fn parse(text: &str, toml: bool) -> Result<Self, NetworkError> {
        let file: NetworkFile = if toml {
            toml::from_str(text)
                .map_err(|e| NetworkError::Parse { path: String::new(), message: e.to_string() })?
        } else {
            serde_json::from_str(text)
                .map_err(|e| NetworkError::Parse { path: String::new(), message: e.to_string() })?
        };
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let activation = Activation::parse(&l.activation)
                    .ok_or_else(|| NetworkError::UnknownActivation { layer: i, name: l.activation.clone() })?;
                Ok(Layer { rows: l.rows, cols: l.cols, weights: l.weights, bias: l.bias, activation })
            })
            .collect::<Result<Vec<_>, NetworkError>>()?;
        Self::new(file.input_dim, file.ranges, file.normalization, layers)
    }

    pub fn to_json(&self) -> String {
        let file = NetworkFile {
            input_dim: self.input_dim,
            ranges: self.ranges,
            normalization: self.normalization.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.rows,
                    cols: l.cols,
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                    activation: format!("{:?}", l.activation).to_lowercase(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serializes")
    }

    pub fn output_dim(&self) -> usize {
        OUTPUT_DIM
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        match &self.normalization {
            Some(n) => x.iter().enumerate().map(|(i, v)| (v - n.offset[i]) * n.scale[i]).collect(),
            None => x.to_vec(),
        }
    }

    /// Final-layer values before the output head.
    pub fn forward_raw(&self, x: &[f64]) -> Result<[f64; 2], NetworkError> {
        if x.len() != self.input_dim {
            return Err(NetworkError::InputLength { expected: self.input_dim, got: x.len() });
        }
        let mut cur = self.normalize(x);
        for l in &self.layers {
            cur = l
                .weights
                .chunks_exact(l.cols)
                .zip(&l.bias)
                .map(|(row, b)| l.activation.apply(row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>() + b))
                .collect();
        }
        Ok([cur[0], cur[1]])
    }

    pub fn forward(&self, x: &[f64]) -> Result<ReferenceCommand, NetworkError> {
        let [v1, w3] = self.ranges.scale(self.forward_raw(x)?);
        Ok(ReferenceCommand { v1, w3 })
    }

    /// Deterministic random network, used by tests and benchmarks.
    pub fn random<R: rand::Rng>(
        rng: &mut R,
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(OUTPUT_DIM);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (cols, rows) = (w[0], w[1]);
                let scale = 1.0 / (cols as f64).sqrt();
                Layer {
                    rows,
                    cols,
                    weights: (0..rows * cols).map(|_| rng.random_range(-1.0..1.0) * scale * 1.5).collect(),
                    bias: (0..rows).map(|_| rng.random_range(-0.5..0.5)).collect(),
                    activation: if i + 2 == dims.len() { Activation::Linear } else { activation },
                }
            })
            .collect();
        Self::new(input_dim, OutputRanges::default(), None, layers).expect("random network is valid")
    }
}
