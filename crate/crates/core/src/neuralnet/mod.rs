//! Hand-differentiated network components: activations, layers, loss,
//! optimizer, model assembly and persistence.

pub mod activation;
pub mod adam;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod persist;

pub use activation::{sigmoid, swish, Activation};
pub use adam::{adam_step, AdamConfig};
pub use layers::{conv1d_causal_forward, dense_forward, dropout, dropout_mask, gru_cell_forward, GruParams, Mode, Sequence};
pub use loss::{huber_grad, huber_loss};
pub use model::{build_model, CellKind, ForwardCache, Hyper, InputShape, Model, ModelKind, ModelSpec};
pub use params::{AdamState, Gradients, ParameterSet, TensorInfo};
pub use persist::{DataConfig, ModelFile};
