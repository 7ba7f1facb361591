//! Fully-connected SNN: every input pixel feeds every excitatory neuron,
//! neurons inhibit each other laterally, and STDP shapes the input weights
//! during unsupervised training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seeds;
use crate::snn::encoding::{encode_rate, SpikeTrain};
use crate::snn::lif::{lif_fire, lif_integrate, LifState, NeuronParams};
use crate::snn::stdp::{normalize_columns, stdp_update, StdpParams};

/// Presentation and learning constants shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub duration_ms: f64,
    pub dt_ms: f64,
    pub max_rate_hz: f64,
    pub stdp: StdpParams,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            duration_ms: 350.0,
            dt_ms: 1.0,
            max_rate_hz: 63.75,
            stdp: StdpParams::default(),
        }
    }
}

const W_INIT_MAX: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SnnModel {
    pub n_inputs: usize,
    pub n_neurons: usize,
    /// Row-major `[input * n_neurons + neuron]`, learned within [0, 1].
    pub weights: Vec<f64>,
    /// Adaptive threshold offsets, persistent across samples.
    pub theta: Vec<f64>,
    /// Per-neuron class labels, present once assigned.
    pub labels: Option<Vec<Option<u8>>>,
    pub neuron: NeuronParams,
}

impl SnnModel {
    /// Fresh model with uniformly random weights in [0, W_INIT_MAX].
    pub fn new(n_inputs: usize, n_neurons: usize, neuron: NeuronParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[0x696e6974]));
        let weights = (0..n_inputs * n_neurons)
            .map(|_| rng.random::<f64>() * W_INIT_MAX)
            .collect();
        Self {
            n_inputs,
            n_neurons,
            weights,
            theta: vec![0.0; n_neurons],
            labels: None,
            neuron,
        }
    }

    pub fn n_weights(&self) -> usize {
        self.weights.len()
    }

    /// Presents one spike train. With `learn` the weights and thresholds
    /// adapt (STDP + homeostasis); without it the model is read-only except
    /// for the transient membrane state. Returns per-neuron spike counts.
    pub fn present(&mut self, train: &SpikeTrain, sim: &SimParams, learn: bool) -> Vec<u32> {
        let n = self.n_neurons;
        let p = self.neuron;
        let dt = sim.dt_ms;
        let theta_decay = (-dt / p.theta_decay_ms).exp();
        let trace_decay = (-dt / sim.stdp.tau_pre_ms).exp();

        let mut states = vec![LifState::resting(&p); n];
        let mut counts = vec![0u32; n];
        let mut pre_traces = vec![0.0f64; self.n_inputs];
        let mut excitation = vec![0.0f64; n];
        // inhibition from last step's spikes, applied as negative charge
        let mut inhibition = vec![0.0f64; n];
        let mut fired: Vec<usize> = Vec::with_capacity(n);

        for pixels in train.step_lists() {
            excitation.fill(0.0);
            for &px in &pixels {
                let row = &self.weights[px as usize * n..(px as usize + 1) * n];
                for (e, &w) in excitation.iter_mut().zip(row) {
                    *e += w;
                }
            }

            if learn {
                for t in self.theta.iter_mut() {
                    *t *= theta_decay;
                }
                for x in pre_traces.iter_mut() {
                    *x *= trace_decay;
                }
                for &px in &pixels {
                    pre_traces[px as usize] += 1.0;
                }
            }

            fired.clear();
            for j in 0..n {
                let input = excitation[j] - inhibition[j];
                if lif_integrate(&mut states[j], &p, self.theta[j], input, dt) {
                    fired.push(j);
                }
            }
            if p.hard_wta && fired.len() > 1 {
                // keep only the neuron furthest above its own threshold
                let winner = *fired
                    .iter()
                    .max_by(|&&a, &&b| {
                        let ma = states[a].v - self.theta[a];
                        let mb = states[b].v - self.theta[b];
                        ma.partial_cmp(&mb).unwrap()
                    })
                    .expect("nonempty");
                fired.retain(|&j| j == winner);
            }

            inhibition.fill(0.0);
            for &j in &fired {
                counts[j] += 1;
                if learn {
                    let mut theta_j = self.theta[j];
                    lif_fire(&mut states[j], &mut theta_j, &p);
                    self.theta[j] = theta_j;
                } else {
                    let mut frozen = self.theta[j];
                    lif_fire(&mut states[j], &mut frozen, &p);
                }
                for (k, inh) in inhibition.iter_mut().enumerate() {
                    if k != j {
                        *inh += p.inhibition_strength;
                    }
                }
            }
            if learn && !fired.is_empty() {
                stdp_update(&mut self.weights, n, &pre_traces, &fired, &sim.stdp);
            }
        }
        if learn {
            if let Some(target) = sim.stdp.norm_l1_target {
                normalize_columns(&mut self.weights, n, target);
            }
        }
        counts
    }

    /// One unsupervised pass over the dataset. Returns the mean absolute
    /// weight change (a training-progress proxy).
    pub fn train_epoch(&mut self, ds: &Dataset, sim: &SimParams, seed: u64) -> f64 {
        let before = self.weights.clone();
        for (idx, img) in ds.images.iter().enumerate() {
            let train = encode_rate(
                img,
                sim.duration_ms,
                sim.dt_ms,
                sim.max_rate_hz,
                seeds::derive(seed, &[0x74726169, idx as u64]),
            );
            self.present(&train, sim, true);
        }
        if self.weights.is_empty() {
            return 0.0;
        }
        self.weights
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / self.weights.len() as f64
    }

    fn respond_all(&self, ds: &Dataset, sim: &SimParams, seed: u64) -> Vec<Vec<u32>> {
        ds.images
            .par_iter()
            .enumerate()
            .map_init(
                || self.clone(),
                |scratch, (idx, img)| {
                    let train = encode_rate(
                        img,
                        sim.duration_ms,
                        sim.dt_ms,
                        sim.max_rate_hz,
                        seeds::derive(seed, &[0x7265_7370, idx as u64]),
                    );
                    scratch.present(&train, sim, false)
                },
            )
            .collect()
    }

    /// Labels each neuron with the class it responds to most, averaged over
    /// the labeled subset.
    pub fn assign_labels(&mut self, labeled: &Dataset, sim: &SimParams, seed: u64) -> Result<()> {
        if labeled.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_classes = labeled.n_classes();
        let responses = self.respond_all(labeled, sim, seed);
        let mut per_class_sum = vec![vec![0u64; n_classes]; self.n_neurons];
        let mut per_class_count = vec![0u64; n_classes];
        for (counts, &label) in responses.iter().zip(&labeled.labels) {
            per_class_count[label as usize] += 1;
            for (j, &c) in counts.iter().enumerate() {
                per_class_sum[j][label as usize] += c as u64;
            }
        }
        let labels = per_class_sum
            .iter()
            .map(|sums| {
                let mut best: Option<(u8, f64)> = None;
                for (class, &s) in sums.iter().enumerate() {
                    if per_class_count[class] == 0 {
                        continue;
                    }
                    let avg = s as f64 / per_class_count[class] as f64;
                    if avg > 0.0 && best.is_none_or(|(_, b)| avg > b) {
                        best = Some((class as u8, avg));
                    }
                }
                best.map(|(c, _)| c)
            })
            .collect();
        self.labels = Some(labels);
        Ok(())
    }

    fn vote(&self, counts: &[u32], labels: &[Option<u8>], n_classes: usize) -> u8 {
        let mut per_class = vec![0u64; n_classes.max(1)];
        for (j, &c) in counts.iter().enumerate() {
            if let Some(class) = labels[j] {
                per_class[class as usize] += c as u64;
            }
        }
        let mut best = 0usize;
        for (class, &v) in per_class.iter().enumerate() {
            if v > per_class[best] {
                best = class;
            }
        }
        best as u8
    }

    /// Predicted class: the label whose neurons spike the most.
    pub fn infer(&self, image: &[f32], sim: &SimParams, seed: u64) -> Result<u8> {
        let labels = self.labels.as_ref().ok_or(Error::UnlabeledModel)?;
        let n_classes = labels
            .iter()
            .flatten()
            .map(|&c| c as usize + 1)
            .max()
            .unwrap_or(1);
        let train = encode_rate(image, sim.duration_ms, sim.dt_ms, sim.max_rate_hz, seed);
        let counts = self.clone().present(&train, sim, false);
        Ok(self.vote(&counts, labels, n_classes))
    }

    /// Fraction of the dataset classified correctly.
    pub fn evaluate(&self, ds: &Dataset, sim: &SimParams, seed: u64) -> Result<f64> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let labels = self.labels.as_ref().ok_or(Error::UnlabeledModel)?;
        let n_classes = ds
            .n_classes()
            .max(labels.iter().flatten().map(|&c| c as usize + 1).max().unwrap_or(1));
        let responses = self.respond_all(ds, sim, seed);
        let correct = responses
            .iter()
            .zip(&ds.labels)
            .filter(|(counts, &label)| self.vote(counts, labels, n_classes) == label)
            .count();
        Ok(correct as f64 / ds.len() as f64)
    }

    /// Elementwise min/max of the weight matrix.
    pub fn weight_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &w in &self.weights {
            lo = lo.min(w);
            hi = hi.max(w);
        }
        (lo, hi)
    }
}
