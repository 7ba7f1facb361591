//! Pair-based weight-dependent STDP.
//!
//! On every postsynaptic spike, each incoming synapse moves by
//! `eta * (x_pre - x_target) * (w_max - w)^mu_dep` with `w_max = 1`, then the
//! weight is clamped to [0, 1]. Presynaptic traces jump by one on a spike and
//! decay exponentially with `tau_pre_ms`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StdpParams {
    pub eta: f64,
    pub x_target: f64,
    pub tau_pre_ms: f64,
    pub mu_dep: f64,
    /// Per-neuron incoming-weight budget: after each presentation, a column
    /// whose L1 sum exceeds this is scaled down to it. Keeps broad templates
    /// from shadowing narrow ones.
    pub norm_l1_target: Option<f64>,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self {
            eta: 0.05,
            x_target: 0.3,
            tau_pre_ms: 20.0,
            mu_dep: 1.0,
            norm_l1_target: Some(60.0),
        }
    }
}

/// Scales every neuron's incoming weights down to the L1 budget, counting
/// only excitatory (positive) mass so that corrupted negative weights cannot
/// shrink a column into silence. Columns under budget are untouched, so
/// learned weights never leave [0, 1].
pub fn normalize_columns(weights: &mut [f64], n_neurons: usize, l1_target: f64) {
    for j in 0..n_neurons {
        let sum: f64 = weights[j..]
            .iter()
            .step_by(n_neurons)
            .map(|w| w.max(0.0))
            .sum();
        if sum > l1_target {
            let scale = l1_target / sum;
            for w in weights[j..].iter_mut().step_by(n_neurons) {
                if *w > 0.0 {
                    *w *= scale;
                }
            }
        }
    }
}

pub const W_MAX: f64 = 1.0;

/// Applies the rule to every synapse of every neuron that spiked this step.
/// `weights` is row-major `[pre * n_neurons + post]`.
pub fn stdp_update(
    weights: &mut [f64],
    n_neurons: usize,
    pre_traces: &[f64],
    post_spikes: &[usize],
    p: &StdpParams,
) {
    for &j in post_spikes {
        debug_assert!(j < n_neurons);
        for (i, &x) in pre_traces.iter().enumerate() {
            let w = &mut weights[i * n_neurons + j];
            let headroom = if p.mu_dep == 1.0 {
                W_MAX - *w
            } else {
                (W_MAX - *w).max(0.0).powf(p.mu_dep)
            };
            *w = (*w + p.eta * (x - p.x_target) * headroom).clamp(0.0, W_MAX);
        }
    }
}
