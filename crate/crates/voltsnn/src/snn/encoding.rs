//! Rate coding: pixel intensity to Poisson-style spike trains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Spike times per input pixel, in timestep units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    pub spikes: Vec<Vec<u32>>,
    pub n_steps: u32,
}

impl SpikeTrain {
    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    /// Transposes to per-step lists of spiking pixel indices.
    pub fn step_lists(&self) -> Vec<Vec<u32>> {
        let mut steps = vec![Vec::new(); self.n_steps as usize];
        for (pixel, times) in self.spikes.iter().enumerate() {
            for &t in times {
                steps[t as usize].push(pixel as u32);
            }
        }
        steps
    }
}

/// Encodes an image: per pixel and per timestep, a spike is drawn with
/// probability `intensity * max_rate * dt`, so a pixel's expected count is
/// `intensity * max_rate * duration`.
pub fn encode_rate(
    image: &[f32],
    duration_ms: f64,
    dt_ms: f64,
    max_rate_hz: f64,
    seed: u64,
) -> SpikeTrain {
    let n_steps = (duration_ms / dt_ms).round() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, &[0x72617465]));
    let spikes = image
        .iter()
        .map(|&intensity| {
            let p = (intensity as f64 * max_rate_hz * dt_ms / 1000.0).clamp(0.0, 1.0);
            if p == 0.0 {
                return Vec::new();
            }
            (0..n_steps)
                .filter(|_| rng.random::<f64>() < p)
                .collect()
        })
        .collect();
    SpikeTrain { spikes, n_steps }
}
