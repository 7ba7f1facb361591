//! Spiking network: rate coding, LIF dynamics, STDP, training and inference.

pub mod encoding;
pub mod lif;
pub mod model;
pub mod stdp;

pub use encoding::{encode_rate, SpikeTrain};
pub use lif::{lif_fire, lif_integrate, lif_step, LifState, NeuronParams};
pub use model::{SimParams, SnnModel};
pub use stdp::{normalize_columns, stdp_update, StdpParams};
