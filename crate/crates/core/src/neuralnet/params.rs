use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name, shape and position of one tensor in the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub trainable: bool,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Adam first/second moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

/// All trainable weights of one model in a single flat buffer, plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub layout: Vec<TensorInfo>,
    pub values: Vec<f64>,
    pub adam: AdamState,
}

impl ParameterSet {
    pub fn new(layout: Vec<TensorInfo>, values: Vec<f64>) -> Result<Self> {
        let total: usize = layout.iter().map(TensorInfo::len).sum();
        if total != values.len() {
            return Err(Error::invalid(format!("layout covers {total} values, buffer has {}", values.len())));
        }
        let n = values.len();
        Ok(ParameterSet {
            layout,
            values,
            adam: AdamState {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .iter()
            .find(|t| t.name == name)
            .map(|t| &self.values[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.iter().find(|t| t.name == name)?.range();
        Some(&mut self.values[range])
    }

    pub fn zero_grad(&self) -> Gradients {
        Gradients(vec![0.0; self.values.len()])
    }

    /// Name of the tensor holding flat index `i`.
    pub fn name_of(&self, i: usize) -> &str {
        self.layout
            .iter()
            .find(|t| t.range().contains(&i))
            .map_or("?", |t| t.name.as_str())
    }
}

/// Gradient buffer aligned with [`ParameterSet::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
