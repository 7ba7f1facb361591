//! The storage stack a model's weights pass through: quantize to codes, map
//! the stored bytes into DRAM, sample bit errors for the chosen BER, and
//! dequantize the (possibly corrupted) codes back to working values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dram::{
    generate_weak_cells, map_baseline, map_enforcesnn, sample_error_mask, DramGeometry, ErrorMask,
    MappingPolicy, MappingVariant, PhysicalLayout, WeakCellMap,
};
use crate::error::{Error, Result};
use crate::fixedpoint::{FixedPointFormat, QuantizedTensor, Rounding};
use crate::seeds;

/// Weight storage format. `Fp32` is a pass-through: no integer codes exist,
/// so bit-error injection does not apply to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightFormat {
    Fp32,
    Fixed(FixedPointFormat),
}

impl WeightFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fp32" => Ok(WeightFormat::Fp32),
            "fxp8_signed_q1_6" => Ok(WeightFormat::Fixed(FixedPointFormat::signed_q1_6())),
            "fxp8_unsigned_q1_7" => Ok(WeightFormat::Fixed(FixedPointFormat::unsigned_q1_7())),
            other => Err(Error::InvalidConfig(format!(
                "unknown weight format {other:?}; expected fp32, fxp8_signed_q1_6 or fxp8_unsigned_q1_7"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightFormat::Fp32 => "fp32",
            WeightFormat::Fixed(f) if *f == FixedPointFormat::signed_q1_6() => "fxp8_signed_q1_6",
            WeightFormat::Fixed(_) => "fxp8_unsigned_q1_7",
        }
    }

    /// Stored bits per weight.
    pub fn bit_width(&self) -> u32 {
        match self {
            WeightFormat::Fp32 => 32,
            WeightFormat::Fixed(f) => f.total_bits(),
        }
    }

    /// Stored bytes per weight.
    pub fn bytes_per_weight(&self) -> u64 {
        match self {
            WeightFormat::Fp32 => 4,
            WeightFormat::Fixed(f) => f.bytes_per_code() as u64,
        }
    }
}

impl TryFrom<String> for WeightFormat {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        WeightFormat::parse(&s)
    }
}

impl From<WeightFormat> for String {
    fn from(f: WeightFormat) -> String {
        f.name().to_string()
    }
}

/// DRAM-side configuration for weight storage experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct DramStack {
    pub geometry: DramGeometry,
    /// Per-weak-cell flip probability P; a target BER becomes F = BER / P.
    pub flip_probability: f64,
    pub mapping: MappingPolicy,
    pub variant: MappingVariant,
    pub ber_th: f64,
    pub format: WeightFormat,
    pub rounding: Rounding,
}

impl DramStack {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(0.0..=1.0).contains(&self.flip_probability) || self.flip_probability == 0.0 {
            return Err(Error::InvalidProbability {
                name: "flip_probability",
                value: self.flip_probability,
            });
        }
        if self.ber_th < 0.0 {
            return Err(Error::InvalidProbability {
                name: "ber_th",
                value: self.ber_th,
            });
        }
        Ok(())
    }

    /// Weak-cell fraction realizing `ber` under the fixed flip probability.
    pub fn weak_fraction_for(&self, ber: f64) -> Result<f64> {
        let f = ber / self.flip_probability;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidProbability {
                name: "weak_fraction (ber / flip_probability)",
                value: f,
            });
        }
        Ok(f)
    }

    /// Samples the weak-cell map for a BER level.
    pub fn weak_cells(&self, ber: f64, seed: u64) -> Result<WeakCellMap> {
        generate_weak_cells(
            &self.geometry,
            self.weak_fraction_for(ber)?,
            self.flip_probability,
            seed,
        )
    }

    /// Builds the layout for `data_bytes` under the configured policy.
    pub fn layout(&self, map: &WeakCellMap, data_bytes: u64) -> Result<PhysicalLayout> {
        match self.mapping {
            MappingPolicy::Baseline => map_baseline(&self.geometry, data_bytes),
            MappingPolicy::EnforceSnn => map_enforcesnn(
                &self.geometry,
                &map.ber_table(),
                self.ber_th,
                data_bytes,
                self.variant,
            ),
        }
    }

    /// Quantizes and stores weights at a BER level, then reads them back:
    /// the result is the dequantized weights with that injection's bit flips
    /// applied. BER 0 short-circuits to plain quantization.
    pub fn corrupt_weights(
        &self,
        weights: &[f64],
        shape: (usize, usize),
        ber: f64,
        seed: u64,
    ) -> Result<CorruptionOutcome> {
        let fmt = match self.format {
            WeightFormat::Fixed(f) => f,
            WeightFormat::Fp32 => {
                if ber > 0.0 {
                    return Err(Error::InvalidConfig(
                        "bit-error injection requires a fixed-point format; fp32 has no stored codes"
                            .into(),
                    ));
                }
                return Ok(CorruptionOutcome {
                    weights: weights.to_vec(),
                    flipped_bits: 0,
                    mask: ErrorMask::default(),
                });
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[0x71756e74]));
        let tensor = QuantizedTensor::from_values(weights, shape, fmt, self.rounding, &mut rng)?;
        if ber == 0.0 {
            return Ok(CorruptionOutcome {
                weights: tensor.to_values(),
                flipped_bits: 0,
                mask: ErrorMask::default(),
            });
        }
        let map = self.weak_cells(ber, seeds::derive(seed, &[0x6d6170]))?;
        let layout = self.layout(&map, tensor.byte_len() as u64)?;
        let mask = sample_error_mask(&layout, &map, seeds::derive(seed, &[0x666c6970]))?;
        let corrupted = crate::dram::apply_mask(&tensor, &layout, &mask)?;
        Ok(CorruptionOutcome {
            weights: corrupted.to_values(),
            flipped_bits: mask.len() as u64,
            mask,
        })
    }
}

/// Read-back of one stored-weights injection event.
#[derive(Debug, Clone)]
pub struct CorruptionOutcome {
    pub weights: Vec<f64>,
    pub flipped_bits: u64,
    pub mask: ErrorMask,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> DramStack {
        DramStack {
            geometry: DramGeometry {
                n_channels: 1,
                n_ranks_per_channel: 1,
                n_chips_per_rank: 1,
                n_banks_per_chip: 4,
                n_subarrays_per_bank: 4,
                n_rows_per_subarray: 32,
                n_columns_per_row: 32,
                bytes_per_column: 1,
            },
            flip_probability: 0.5,
            mapping: MappingPolicy::Baseline,
            variant: MappingVariant::Listing,
            ber_th: 1e-2,
            format: WeightFormat::Fixed(FixedPointFormat::signed_q1_6()),
            rounding: Rounding::Truncate,
        }
    }

    #[test]
    fn format_strings_roundtrip() {
        for s in ["fp32", "fxp8_signed_q1_6", "fxp8_unsigned_q1_7"] {
            assert_eq!(WeightFormat::parse(s).unwrap().name(), s);
        }
        assert!(WeightFormat::parse("fxp4").is_err());
        assert_eq!(WeightFormat::Fp32.bit_width(), 32);
        assert_eq!(
            WeightFormat::parse("fxp8_signed_q1_6").unwrap().bit_width(),
            8
        );
    }

    #[test]
    fn ber_zero_is_plain_quantization() {
        let s = stack();
        let w = vec![0.7; 100];
        let out = s.corrupt_weights(&w, (10, 10), 0.0, 3).unwrap();
        assert_eq!(out.flipped_bits, 0);
        assert!(out.weights.iter().all(|&v| v == 0.6875));
    }

    #[test]
    fn corruption_is_deterministic_and_seed_sensitive() {
        let s = stack();
        let w = vec![0.5; 400];
        let a = s.corrupt_weights(&w, (20, 20), 1e-2, 7).unwrap();
        let b = s.corrupt_weights(&w, (20, 20), 1e-2, 7).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.flipped_bits, b.flipped_bits);
        let c = s.corrupt_weights(&w, (20, 20), 1e-2, 8).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn fp32_rejects_injection_but_passes_through() {
        let s = DramStack {
            format: WeightFormat::Fp32,
            ..stack()
        };
        let w = vec![0.123456789; 10];
        let out = s.corrupt_weights(&w, (1, 10), 0.0, 0).unwrap();
        assert_eq!(out.weights, w);
        assert!(s.corrupt_weights(&w, (1, 10), 1e-3, 0).is_err());
    }

    #[test]
    fn ber_above_flip_probability_rejected() {
        let s = stack();
        assert!(s.weak_fraction_for(0.6).is_err());
        assert_eq!(s.weak_fraction_for(1e-2).unwrap(), 2e-2);
    }

    #[test]
    fn flip_count_tracks_mask() {
        let s = stack();
        let w = vec![0.25; 1024];
        let out = s.corrupt_weights(&w, (32, 32), 5e-2, 11).unwrap();
        assert_eq!(out.flipped_bits as usize, out.mask.len());
        assert!(out.flipped_bits > 0);
        let differing = out.weights.iter().filter(|&&v| v != 0.25).count();
        assert!(differing > 0);
        assert!(differing as u64 <= out.flipped_bits);
    }
}
