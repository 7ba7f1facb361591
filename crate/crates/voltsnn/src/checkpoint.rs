//! Model checkpoints: a JSON container holding format metadata plus the
//! stored weight representation (integer codes for fixed-point formats, raw
//! floats for fp32), adaptive thresholds, and the label map.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{QuantizedTensor, Rounding};
use crate::snn::{NeuronParams, SnnModel};
use crate::stack::WeightFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: WeightFormat,
    pub n_inputs: usize,
    pub n_neurons: usize,
    /// Present iff the format is fixed-point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codes: Option<Vec<i32>>,
    /// Present iff the format is fp32.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub theta: Vec<f64>,
    /// Per-neuron class labels, -1 for unlabeled neurons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<i16>>,
    pub neuron: NeuronParams,
    pub seed: u64,
    pub config_sha256: String,
}

impl Checkpoint {
    /// Snapshots a model in its stored-in-DRAM form: fixed-point formats
    /// quantize the weights to codes, fp32 stores them verbatim.
    pub fn from_model(
        model: &SnnModel,
        format: WeightFormat,
        rounding: Rounding,
        seed: u64,
        config_sha256: &str,
    ) -> Result<Self> {
        let (codes, weights) = match format {
            WeightFormat::Fp32 => (None, Some(model.weights.clone())),
            WeightFormat::Fixed(fmt) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let tensor = QuantizedTensor::from_values(
                    &model.weights,
                    (model.n_inputs, model.n_neurons),
                    fmt,
                    rounding,
                    &mut rng,
                )?;
                (Some(tensor.codes), None)
            }
        };
        Ok(Self {
            format,
            n_inputs: model.n_inputs,
            n_neurons: model.n_neurons,
            codes,
            weights,
            theta: model.theta.clone(),
            labels: model.labels.as_ref().map(|ls| {
                ls.iter()
                    .map(|l| l.map(|c| c as i16).unwrap_or(-1))
                    .collect()
            }),
            neuron: model.neuron,
            seed,
            config_sha256: config_sha256.to_string(),
        })
    }

    /// Rebuilds the working model (dequantized weights for fixed-point).
    pub fn into_model(self) -> Result<SnnModel> {
        let n = self
            .n_inputs
            .checked_mul(self.n_neurons)
            .ok_or_else(|| Error::CheckpointFormat("weight count overflows".into()))?;
        let weights = match (self.format, self.codes, self.weights) {
            (WeightFormat::Fixed(fmt), Some(codes), None) => {
                if codes.len() != n {
                    return Err(Error::CheckpointFormat(format!(
                        "{} codes for a {}x{} model",
                        codes.len(),
                        self.n_inputs,
                        self.n_neurons
                    )));
                }
                codes
                    .iter()
                    .map(|&c| crate::fixedpoint::dequantize(c, fmt))
                    .collect::<Result<Vec<_>>>()?
            }
            (WeightFormat::Fp32, None, Some(weights)) => {
                if weights.len() != n {
                    return Err(Error::CheckpointFormat(format!(
                        "{} weights for a {}x{} model",
                        weights.len(),
                        self.n_inputs,
                        self.n_neurons
                    )));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::CheckpointFormat("non-finite weight".into()));
                }
                weights
            }
            _ => {
                return Err(Error::CheckpointFormat(
                    "checkpoint must carry codes for fixed-point formats or weights for fp32"
                        .into(),
                ))
            }
        };
        if self.theta.len() != self.n_neurons {
            return Err(Error::CheckpointFormat(format!(
                "{} theta entries for {} neurons",
                self.theta.len(),
                self.n_neurons
            )));
        }
        let labels = match self.labels {
            None => None,
            Some(ls) => {
                if ls.len() != self.n_neurons {
                    return Err(Error::CheckpointFormat(format!(
                        "{} labels for {} neurons",
                        ls.len(),
                        self.n_neurons
                    )));
                }
                if ls.iter().any(|&l| !(-1..=255).contains(&l)) {
                    return Err(Error::CheckpointFormat("label out of range".into()));
                }
                Some(
                    ls.iter()
                        .map(|&l| if l < 0 { None } else { Some(l as u8) })
                        .collect(),
                )
            }
        };
        Ok(SnnModel {
            n_inputs: self.n_inputs,
            n_neurons: self.n_neurons,
            weights,
            theta: self.theta,
            labels,
            neuron: self.neuron,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let s = std::str::from_utf8(&bytes)
            .map_err(|e| Error::CheckpointFormat(format!("not UTF-8: {e}")))?;
        Self::from_json_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::FixedPointFormat;

    fn model() -> SnnModel {
        let mut m = SnnModel::new(16, 4, NeuronParams::default(), 5);
        m.labels = Some(vec![Some(0), Some(1), None, Some(1)]);
        m
    }

    #[test]
    fn fixed_point_roundtrip_quantizes() {
        let m = model();
        let fmt = WeightFormat::Fixed(FixedPointFormat::signed_q1_6());
        let ck = Checkpoint::from_model(&m, fmt, Rounding::Truncate, 1, "deadbeef").unwrap();
        let json = ck.to_json_string().unwrap();
        let back = Checkpoint::from_json_str(&json).unwrap().into_model().unwrap();
        assert_eq!(back.labels, m.labels);
        assert_eq!(back.theta, m.theta);
        // weights land on the quantization grid, within one step
        for (a, b) in back.weights.iter().zip(&m.weights) {
            assert!((a - b).abs() < 1.0 / 64.0 + 1e-12);
            assert_eq!((a * 64.0).round() / 64.0, *a);
        }
    }

    #[test]
    fn fp32_roundtrip_is_exact() {
        let m = model();
        let ck =
            Checkpoint::from_model(&m, WeightFormat::Fp32, Rounding::Truncate, 1, "x").unwrap();
        let back = ck.into_model().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_checkpoints_rejected() {
        let m = model();
        let fmt = WeightFormat::Fixed(FixedPointFormat::signed_q1_6());
        let good = Checkpoint::from_model(&m, fmt, Rounding::Truncate, 1, "x").unwrap();

        let mut wrong_len = good.clone();
        wrong_len.codes.as_mut().unwrap().pop();
        assert!(wrong_len.into_model().is_err());

        let mut bad_code = good.clone();
        bad_code.codes.as_mut().unwrap()[0] = 1000;
        assert!(bad_code.into_model().is_err());

        let mut missing = good.clone();
        missing.codes = None;
        assert!(missing.into_model().is_err());

        let mut bad_theta = good.clone();
        bad_theta.theta.pop();
        assert!(bad_theta.into_model().is_err());

        let mut bad_label = good;
        bad_label.labels = Some(vec![0, 1, -2, 1]);
        assert!(bad_label.into_model().is_err());

        assert!(Checkpoint::from_json_str("not json").is_err());
        assert!(Checkpoint::from_json_str(r#"{"format": "fp32"}"#).is_err());
    }
}
