//! Leaky integrate-and-fire neuron with adaptive threshold.

use serde::{Deserialize, Serialize};

/// Shared neuron constants. Potentials are in dimensionless units with the
/// resting potential as the natural zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_thresh: f64,
    pub tau_mem_ms: f64,
    pub refractory_ms: f64,
    /// Threshold bump added on every spike (homeostasis).
    pub theta_plus: f64,
    /// Decay time constant of the threshold bump.
    pub theta_decay_ms: f64,
    /// Membrane knock-down received from every other spiking neuron.
    pub inhibition_strength: f64,
    /// One winner per timestep instead of graded lateral inhibition.
    pub hard_wta: bool,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self {
            v_rest: 0.0,
            v_reset: 0.0,
            v_thresh: 20.0,
            tau_mem_ms: 100.0,
            refractory_ms: 5.0,
            theta_plus: 0.05,
            theta_decay_ms: 1e5,
            inhibition_strength: 10.0,
            hard_wta: false,
        }
    }
}

/// Per-neuron transient state, reset between sample presentations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifState {
    pub v: f64,
    pub refractory_left_ms: f64,
}

impl LifState {
    pub fn resting(p: &NeuronParams) -> Self {
        Self {
            v: p.v_rest,
            refractory_left_ms: 0.0,
        }
    }
}

/// Decays the membrane toward rest and integrates the input charge. Returns
/// whether the (theta-adjusted) threshold was crossed; firing side effects
/// are applied separately so winner-take-all can veto a crossing.
pub fn lif_integrate(
    state: &mut LifState,
    p: &NeuronParams,
    theta: f64,
    input: f64,
    dt_ms: f64,
) -> bool {
    let decay = (-dt_ms / p.tau_mem_ms).exp();
    state.v = p.v_rest + (state.v - p.v_rest) * decay;
    if state.refractory_left_ms > 0.0 {
        state.refractory_left_ms -= dt_ms;
        return false;
    }
    state.v += input;
    state.v >= p.v_thresh + theta
}

/// Firing side effects: reset, threshold bump, refractory period.
pub fn lif_fire(state: &mut LifState, theta: &mut f64, p: &NeuronParams) {
    state.v = p.v_reset;
    *theta += p.theta_plus;
    state.refractory_left_ms = p.refractory_ms;
}

/// One full step of a standalone neuron: theta decay, integration, and (when
/// the threshold is crossed) the firing side effects. Returns whether the
/// neuron fired.
pub fn lif_step(
    state: &mut LifState,
    theta: &mut f64,
    p: &NeuronParams,
    input: f64,
    dt_ms: f64,
) -> bool {
    *theta *= (-dt_ms / p.theta_decay_ms).exp();
    if lif_integrate(state, p, *theta, input, dt_ms) {
        lif_fire(state, theta, p);
        true
    } else {
        false
    }
}
