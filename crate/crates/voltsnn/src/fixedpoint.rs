//! Fixed-point weight quantization.
//!
//! Weights are represented as integer codes in a `Qi.f` format: an optional
//! sign bit, `i` integer bits and `f` fractional bits, two's complement when
//! signed. A code `c` stands for the real value `c / 2^f`. The codes are the
//! substrate for bit-level error injection; arithmetic downstream always runs
//! on the dequantized real values (simulated quantization).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `Qi.f` format descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub signed: bool,
    pub integer_bits: u32,
    pub fraction_bits: u32,
}

impl FixedPointFormat {
    pub fn new(signed: bool, integer_bits: u32, fraction_bits: u32) -> Result<Self> {
        let fmt = Self {
            signed,
            integer_bits,
            fraction_bits,
        };
        if fmt.total_bits() == 0 || fmt.total_bits() > 31 {
            return Err(Error::InvalidConfig(format!(
                "fixed-point width {} not in 1..=31",
                fmt.total_bits()
            )));
        }
        Ok(fmt)
    }

    /// 8-bit signed Q1.6: sign bit, 1 integer bit, 6 fraction bits.
    pub fn signed_q1_6() -> Self {
        Self {
            signed: true,
            integer_bits: 1,
            fraction_bits: 6,
        }
    }

    /// 8-bit unsigned Q1.7: 1 integer bit, 7 fraction bits.
    pub fn unsigned_q1_7() -> Self {
        Self {
            signed: false,
            integer_bits: 1,
            fraction_bits: 7,
        }
    }

    pub fn total_bits(&self) -> u32 {
        let sign = if self.signed { 1 } else { 0 };
        sign + self.integer_bits + self.fraction_bits
    }

    /// Storage footprint of one code.
    pub fn bytes_per_code(&self) -> usize {
        self.total_bits().div_ceil(8) as usize
    }

    /// Precision step `2^-f`.
    pub fn step(&self) -> f64 {
        (self.fraction_bits as f64).exp2().recip()
    }

    pub fn min_code(&self) -> i32 {
        if self.signed {
            -(1i32 << (self.integer_bits + self.fraction_bits))
        } else {
            0
        }
    }

    pub fn max_code(&self) -> i32 {
        (1i32 << (self.integer_bits + self.fraction_bits)) - 1
    }

    /// Smallest representable value: `-2^i` signed, `0` unsigned.
    pub fn min_value(&self) -> f64 {
        self.min_code() as f64 * self.step()
    }

    /// Largest representable value: `2^i - 2^-f`.
    pub fn max_value(&self) -> f64 {
        self.max_code() as f64 * self.step()
    }

    fn contains(&self, code: i64) -> bool {
        code >= self.min_code() as i64 && code <= self.max_code() as i64
    }
}

impl std::fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} Q{}.{}",
            if self.signed { "signed" } else { "unsigned" },
            self.integer_bits,
            self.fraction_bits
        )
    }
}

/// Rounding scheme used when a value falls between two codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Truncation: keep `f` fraction bits, drop the rest (round toward -inf).
    #[serde(rename = "tr")]
    Truncate,
    /// Round to the nearest code, ties away from zero.
    #[serde(rename = "rn")]
    Nearest,
    /// Stochastic rounding: pick one of the two neighboring codes with
    /// probability proportional to proximity.
    #[serde(rename = "sr")]
    Stochastic,
}

/// Quantizes one value to an integer code. Out-of-range values saturate.
pub fn quantize<R: Rng + ?Sized>(
    value: f64,
    fmt: FixedPointFormat,
    rounding: Rounding,
    rng: &mut R,
) -> Result<i32> {
    if !value.is_finite() {
        return Err(Error::NonFiniteWeight);
    }
    let scaled = value * (fmt.fraction_bits as f64).exp2();
    let code = match rounding {
        Rounding::Truncate => scaled.floor(),
        Rounding::Nearest => scaled.round(),
        Rounding::Stochastic => {
            let lo = scaled.floor();
            let frac = scaled - lo;
            if rng.random::<f64>() < frac {
                lo + 1.0
            } else {
                lo
            }
        }
    };
    Ok(code.clamp(fmt.min_code() as f64, fmt.max_code() as f64) as i32)
}

/// Recovers the real value of a code: `code / 2^f`.
pub fn dequantize(code: i32, fmt: FixedPointFormat) -> Result<f64> {
    if !fmt.contains(code as i64) {
        return Err(Error::CodeOutOfRange {
            code: code as i64,
            format: fmt.to_string(),
            min: fmt.min_code() as i64,
            max: fmt.max_code() as i64,
        });
    }
    Ok(code as f64 * fmt.step())
}

/// Raw storage bits of a code: two's complement truncated to `total_bits`.
pub fn code_to_bits(code: i32, fmt: FixedPointFormat) -> u32 {
    let mask = if fmt.total_bits() >= 32 {
        u32::MAX
    } else {
        (1u32 << fmt.total_bits()) - 1
    };
    (code as u32) & mask
}

/// Reinterprets storage bits as a code, sign-extending when signed.
pub fn bits_to_code(bits: u32, fmt: FixedPointFormat) -> i32 {
    let width = fmt.total_bits();
    let mask = if width >= 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    };
    let bits = bits & mask;
    if fmt.signed && (bits >> (width - 1)) & 1 == 1 {
        (bits | !mask) as i32
    } else {
        bits as i32
    }
}

/// A matrix of quantized weights: integer codes plus format metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    pub codes: Vec<i32>,
    pub format: FixedPointFormat,
    /// (rows, cols); codes are row-major.
    pub shape: (usize, usize),
}

impl QuantizedTensor {
    /// Quantizes a real-valued matrix elementwise.
    pub fn from_values<R: Rng + ?Sized>(
        values: &[f64],
        shape: (usize, usize),
        fmt: FixedPointFormat,
        rounding: Rounding,
        rng: &mut R,
    ) -> Result<Self> {
        if values.len() != shape.0 * shape.1 {
            return Err(Error::InvalidConfig(format!(
                "shape {:?} does not match {} values",
                shape,
                values.len()
            )));
        }
        let codes = values
            .iter()
            .map(|&v| quantize(v, fmt, rounding, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            codes,
            format: fmt,
            shape,
        })
    }

    /// Dequantizes every code back to its real value.
    pub fn to_values(&self) -> Vec<f64> {
        let step = self.format.step();
        self.codes.iter().map(|&c| c as f64 * step).collect()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Total storage footprint in bytes.
    pub fn byte_len(&self) -> usize {
        self.codes.len() * self.format.bytes_per_code()
    }

    /// Reads one stored byte; `byte_index` counts over the whole tensor.
    pub fn storage_byte(&self, byte_index: usize) -> u8 {
        let bpc = self.format.bytes_per_code();
        let bits = code_to_bits(self.codes[byte_index / bpc], self.format);
        (bits >> (8 * (byte_index % bpc))) as u8
    }

    /// Flips one bit of one stored byte, reinterpreting the code.
    pub fn flip_bit(&mut self, byte_index: usize, bit_in_byte: u32) {
        debug_assert!(bit_in_byte < 8);
        let bpc = self.format.bytes_per_code();
        let code_idx = byte_index / bpc;
        let bit = 8 * (byte_index % bpc) as u32 + bit_in_byte;
        let bits = code_to_bits(self.codes[code_idx], self.format) ^ (1u32 << bit);
        self.codes[code_idx] = bits_to_code(bits, self.format);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn format_ranges() {
        let q16 = FixedPointFormat::signed_q1_6();
        assert_eq!(q16.total_bits(), 8);
        assert_eq!(q16.min_code(), -128);
        assert_eq!(q16.max_code(), 127);
        assert_eq!(q16.min_value(), -2.0);
        assert_eq!(q16.max_value(), 2.0 - 1.0 / 64.0);
        assert_eq!(q16.step(), 1.0 / 64.0);

        let q17 = FixedPointFormat::unsigned_q1_7();
        assert_eq!(q17.total_bits(), 8);
        assert_eq!(q17.min_code(), 0);
        assert_eq!(q17.max_code(), 255);
        assert_eq!(q17.max_value(), 2.0 - 1.0 / 128.0);
    }

    #[test]
    fn quantize_truncate_frozen_values() {
        let q16 = FixedPointFormat::signed_q1_6();
        let c = quantize(0.7, q16, Rounding::Truncate, &mut rng(0)).unwrap();
        assert_eq!(c, 44); // floor(0.7 * 64) = 44
        assert_eq!(dequantize(c, q16).unwrap(), 0.6875);

        assert_eq!(quantize(0.0, q16, Rounding::Truncate, &mut rng(0)).unwrap(), 0);
        assert_eq!(quantize(0.0, q16, Rounding::Nearest, &mut rng(0)).unwrap(), 0);
        assert_eq!(quantize(0.0, q16, Rounding::Stochastic, &mut rng(0)).unwrap(), 0);

        let q17 = FixedPointFormat::unsigned_q1_7();
        let c = quantize(0.7, q17, Rounding::Truncate, &mut rng(0)).unwrap();
        assert_eq!(c, 89); // floor(0.7 * 128) = 89
        assert_eq!(dequantize(c, q17).unwrap(), 0.6953125);
    }

    #[test]
    fn quantize_nearest_frozen_values() {
        let q16 = FixedPointFormat::signed_q1_6();
        let c = quantize(0.7, q16, Rounding::Nearest, &mut rng(0)).unwrap();
        assert_eq!(c, 45); // 0.7 * 64 = 44.8 rounds to 45
        assert_eq!(dequantize(c, q16).unwrap(), 0.703125);
        // ties away from zero
        assert_eq!(
            quantize(2.5 / 64.0, q16, Rounding::Nearest, &mut rng(0)).unwrap(),
            3
        );
        assert_eq!(
            quantize(-2.5 / 64.0, q16, Rounding::Nearest, &mut rng(0)).unwrap(),
            -3
        );
    }

    #[test]
    fn dequantize_boundaries() {
        let q16 = FixedPointFormat::signed_q1_6();
        assert_eq!(dequantize(64, q16).unwrap(), 1.0);
        assert_eq!(dequantize(-128, q16).unwrap(), -2.0);
        assert_eq!(dequantize(0, q16).unwrap(), 0.0);
        assert!(dequantize(128, q16).is_err());
        assert!(dequantize(-129, q16).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let q16 = FixedPointFormat::signed_q1_6();
        assert!(quantize(f64::NAN, q16, Rounding::Truncate, &mut rng(0)).is_err());
        assert!(quantize(f64::INFINITY, q16, Rounding::Nearest, &mut rng(0)).is_err());
    }

    #[test]
    fn saturation() {
        let q16 = FixedPointFormat::signed_q1_6();
        assert_eq!(quantize(5.0, q16, Rounding::Truncate, &mut rng(0)).unwrap(), 127);
        assert_eq!(quantize(-5.0, q16, Rounding::Nearest, &mut rng(0)).unwrap(), -128);
        let q17 = FixedPointFormat::unsigned_q1_7();
        assert_eq!(quantize(-0.3, q17, Rounding::Truncate, &mut rng(0)).unwrap(), 0);
        assert_eq!(quantize(3.0, q17, Rounding::Stochastic, &mut rng(0)).unwrap(), 255);
    }

    #[test]
    fn tensor_quantization() {
        let q16 = FixedPointFormat::signed_q1_6();
        let zeros =
            QuantizedTensor::from_values(&[0.0; 6], (2, 3), q16, Rounding::Truncate, &mut rng(0))
                .unwrap();
        assert!(zeros.codes.iter().all(|&c| c == 0));

        let ones =
            QuantizedTensor::from_values(&[1.0; 6], (2, 3), q16, Rounding::Truncate, &mut rng(0))
                .unwrap();
        assert!(ones.codes.iter().all(|&c| c == 64));
        assert!(ones.to_values().iter().all(|&v| v == 1.0));

        // STDP-bounded weights land in [0, 2^f]
        let vals: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let t = QuantizedTensor::from_values(&vals, (1, 11), q16, Rounding::Truncate, &mut rng(0))
            .unwrap();
        assert!(t.codes.iter().all(|&c| (0..=64).contains(&c)));
    }

    #[test]
    fn bit_roundtrip_and_flip() {
        let q16 = FixedPointFormat::signed_q1_6();
        assert_eq!(code_to_bits(44, q16), 0b0010_1100);
        assert_eq!(bits_to_code(0b1010_1100, q16), -84);
        assert_eq!(bits_to_code(code_to_bits(-84, q16), q16), -84);

        // flipping the sign bit of code 44 yields -84
        let mut t = QuantizedTensor {
            codes: vec![44],
            format: q16,
            shape: (1, 1),
        };
        t.flip_bit(0, 7);
        assert_eq!(t.codes[0], -84);
        t.flip_bit(0, 7);
        assert_eq!(t.codes[0], 44);
    }

    #[test]
    fn sr_unbiasedness_frozen_seed() {
        let q16 = FixedPointFormat::signed_q1_6();
        let mut r = rng(7);
        let x = 0.7;
        let trials = 10_000;
        let mean = (0..trials)
            .map(|_| {
                dequantize(quantize(x, q16, Rounding::Stochastic, &mut r).unwrap(), q16).unwrap()
            })
            .sum::<f64>()
            / trials as f64;
        let bound = 3.0 * (q16.step() / 2.0) / (trials as f64).sqrt();
        assert!(
            (mean - x).abs() < bound,
            "mean {mean} deviates from {x} by more than {bound}"
        );
    }

    #[test]
    fn signed_q16_and_unsigned_q17_agree_within_eps() {
        let q16 = FixedPointFormat::signed_q1_6();
        let q17 = FixedPointFormat::unsigned_q1_7();
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            let a = dequantize(quantize(x, q16, Rounding::Truncate, &mut rng(0)).unwrap(), q16)
                .unwrap();
            let b = dequantize(quantize(x, q17, Rounding::Truncate, &mut rng(0)).unwrap(), q17)
                .unwrap();
            assert!((a - b).abs() < q16.step(), "x={x}: {a} vs {b}");
        }
    }
}
