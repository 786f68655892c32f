use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::{Activation, ActivationKind};
use crate::error::{Error, Result};
use crate::network::{DenseLayer, Matrix, Network};

pub const DOCUMENT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub version: u64,
    pub activation: ActivationDoc,
    pub input_dim: usize,
    pub layers: Vec<LayerDoc>,
    pub output_weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationDoc {
    pub kind: String,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

pub fn save_network(net: &Network) -> NetworkDocument {
    NetworkDocument {
        version: DOCUMENT_VERSION,
        activation: ActivationDoc {
            kind: net.activation.kind().name().to_string(),
            lipschitz: net.activation.lipschitz(),
        },
        input_dim: net.input_dim,
        layers: net
            .layers
            .iter()
            .map(|l| LayerDoc { weights: l.weights.to_rows(), biases: l.biases.clone() })
            .collect(),
        output_weights: net.output_weights.to_rows(),
    }
}

fn matrix(rows: &[Vec<f64>], cols_hint: usize, what: &str) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_hint));
    }
    Matrix::from_rows(rows).map_err(|_| Error::Document(format!("{what}: rows have differing lengths")))
}

pub fn load_network(doc: &NetworkDocument) -> Result<Network> {
    if doc.version != DOCUMENT_VERSION {
        return Err(Error::UnsupportedVersion(doc.version));
    }
    let kind: ActivationKind = doc
        .activation
        .kind
        .parse()
        .map_err(|_| Error::Document(format!("unknown activation kind {:?}", doc.activation.kind)))?;
    let activation = Activation::new(kind, doc.activation.lipschitz)?;
    let mut layers = Vec::with_capacity(doc.layers.len());
    let mut prev = doc.input_dim;
    for (l, layer) in doc.layers.iter().enumerate() {
        let weights = matrix(&layer.weights, prev, &format!("layer {l} weights"))?;
        prev = weights.rows();
        layers.push(DenseLayer::new(weights, layer.biases.clone()));
    }
    let output_weights = matrix(&doc.output_weights, prev, "output weights")?;
    let net = Network { input_dim: doc.input_dim, layers, output_weights, activation };
    net.check()?;
    Ok(net)
}

pub fn network_to_json(net: &Network) -> Result<String> {
    Ok(serde_json::to_string_pretty(&save_network(net))?)
}

/// Parses a document, rejecting unknown versions before looking at the
/// remaining fields.
pub fn network_from_json(text: &str) -> Result<Network> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(DOCUMENT_VERSION) => {}
        Some(v) => return Err(Error::UnsupportedVersion(v)),
        None => return Err(Error::Document("missing or non-integer \"version\"".into())),
    }
    let doc: NetworkDocument = serde_json::from_value(value)?;
    load_network(&doc)
}

pub fn save_network_file(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, network_to_json(net)?)?;
    Ok(())
}

pub fn load_network_file(path: impl AsRef<Path>) -> Result<Network> {
    network_from_json(&std::fs::read_to_string(path)?)
}
