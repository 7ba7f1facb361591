//! Desk-scale simulator for resilient SNN inference on reduced-voltage
//! approximate DRAM.
//!
//! The pipeline: quantize STDP-trained weights to fixed point, map the stored
//! bytes into a DRAM hierarchy with an error-aware policy, inject bit errors
//! drawn from a weak-cell model, account energy and latency over the access
//! traces, harden the network with fault-aware retraining, and pick the model
//! with the best accuracy/memory/energy trade-off.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod dram;
pub mod error;
pub mod fat;
pub mod fixedpoint;
pub mod seeds;
pub mod selection;
pub mod snn;
pub mod stack;

pub use error::{Error, Result};
