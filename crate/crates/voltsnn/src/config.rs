//! Experiment configuration: JSON with a strict schema (unknown keys are
//! rejected), validated on load, hashed for output provenance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dram::{DramGeometry, MappingPolicy, MappingVariant, VoltageConfig};
use crate::error::{Error, Result};
use crate::fixedpoint::Rounding;
use crate::snn::{NeuronParams, SimParams};
use crate::stack::{DramStack, WeightFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum DatasetConfig {
    /// Deterministic built-in digit set.
    Synthetic {
        #[serde(default = "default_train_samples")]
        train_samples: usize,
        #[serde(default = "default_test_samples")]
        test_samples: usize,
        #[serde(default = "default_side")]
        rows: usize,
        #[serde(default = "default_side")]
        cols: usize,
        #[serde(default = "default_classes")]
        classes: usize,
    },
    /// IDX image/label file pairs (MNIST layout).
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
}

fn default_train_samples() -> usize {
    2000
}
fn default_test_samples() -> usize {
    400
}
fn default_side() -> usize {
    28
}
fn default_classes() -> usize {
    10
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic {
            train_samples: default_train_samples(),
            test_samples: default_test_samples(),
            rows: default_side(),
            cols: default_side(),
            classes: default_classes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub n_neurons: usize,
    pub train_epochs: usize,
    /// Samples from the training set used for neuron labeling.
    pub label_samples: usize,
    pub neuron: NeuronParams,
    pub sim: SimParams,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_neurons: 100,
            train_epochs: 2,
            label_samples: 500,
            neuron: NeuronParams::default(),
            sim: SimParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DramConfig {
    pub geometry: DramGeometry,
    pub voltage: VoltageConfig,
    pub flip_probability: f64,
    pub mapping: MappingPolicy,
    pub mapping_variant: MappingVariant,
    pub ber_th: f64,
}

impl Default for DramConfig {
    fn default() -> Self {
        Self {
            geometry: DramGeometry::desk_default(),
            voltage: VoltageConfig::default(),
            flip_probability: 0.5,
            // injection paths (profile, FAT) default to the oblivious
            // mapping: under uniform weak cells every subarray sits at the
            // target BER, so the error-aware layout either fits trivially or
            // rejects the whole device. The energy command compares both
            // policies regardless of this setting.
            mapping: MappingPolicy::Baseline,
            mapping_variant: MappingVariant::Listing,
            ber_th: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub ber_list: Vec<f64>,
    pub trials: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            // spans both the flat region and the degradation knee of the
            // desk-scale networks
            ber_list: vec![0.0, 1e-5, 1e-4, 1e-3, 1e-2, 5e-2, 1e-1, 2e-1],
            trials: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// Derived from the profile: top of the acceptable region plus every
    /// degraded level.
    Efficient,
    /// The full seven-decade ladder.
    Conventional,
    /// Levels given verbatim in `explicit_levels`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FatConfig {
    pub schedule_mode: ScheduleMode,
    pub explicit_levels: Vec<f64>,
}

impl Default for FatConfig {
    fn default() -> Self {
        Self {
            schedule_mode: ScheduleMode::Efficient,
            explicit_levels: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub v_supply_list: Vec<f64>,
    /// Inference passes per trace.
    pub epochs: usize,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            v_supply_list: vec![1.025, 1.1, 1.2, 1.35],
            epochs: 1,
        }
    }
}

/// Operating point for candidate assembly: the supply voltage assumed to
/// produce a given BER. Placeholder values; override from measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerVoltagePoint {
    pub ber: f64,
    pub v_supply: f64,
}

fn default_ber_voltage_map() -> Vec<BerVoltagePoint> {
    [
        (0.0, 1.35),
        (1e-8, 1.325),
        (1e-7, 1.3),
        (1e-6, 1.25),
        (1e-5, 1.2),
        (1e-4, 1.15),
        (1e-3, 1.1),
        (1e-2, 1.05),
        (5e-2, 1.025),
    ]
    .into_iter()
    .map(|(ber, v_supply)| BerVoltagePoint { ber, v_supply })
    .collect()
}

fn default_grid() -> Vec<f64> {
    vec![0.0, 1.0, 5.0, 10.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub mu_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    pub ber_voltage_map: Vec<BerVoltagePoint>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            mu_grid: default_grid(),
            epsilon_grid: default_grid(),
            ber_voltage_map: default_ber_voltage_map(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub format: WeightFormat,
    pub rounding: Rounding,
    pub dram: DramConfig,
    pub profile: ProfileConfig,
    pub fat: FatConfig,
    pub energy: EnergyConfig,
    pub selection: SelectionConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            network: NetworkConfig::default(),
            format: WeightFormat::Fixed(crate::fixedpoint::FixedPointFormat::signed_q1_6()),
            rounding: Rounding::Truncate,
            dram: DramConfig::default(),
            profile: ProfileConfig::default(),
            fat: FatConfig::default(),
            energy: EnergyConfig::default(),
            selection: SelectionConfig::default(),
            seed: 42,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config file; the hash of the raw bytes is the
    /// provenance tag embedded in every output.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let hash = hex_sha256(&bytes);
        let cfg = Self::from_json_str(std::str::from_utf8(&bytes).map_err(|e| {
            Error::InvalidConfig(format!("config is not UTF-8: {e}"))
        })?)?;
        Ok((cfg, hash))
    }

    pub fn validate(&self) -> Result<()> {
        self.dram.geometry.validate()?;
        self.dram.voltage.validate()?;
        self.stack().validate()?;
        if self.network.n_neurons == 0 {
            return Err(Error::InvalidConfig("n_neurons must be >= 1".into()));
        }
        if self.profile.trials == 0 {
            return Err(Error::InvalidConfig("profile.trials must be >= 1".into()));
        }
        for &ber in &self.profile.ber_list {
            if !(0.0..=1.0).contains(&ber) {
                return Err(Error::InvalidProbability {
                    name: "profile.ber_list entry",
                    value: ber,
                });
            }
        }
        if self.format == WeightFormat::Fp32 {
            let wants_injection = self.profile.ber_list.iter().any(|&b| b > 0.0)
                || !self.fat.explicit_levels.is_empty();
            if wants_injection {
                return Err(Error::InvalidConfig(
                    "fp32 weights have no stored codes to corrupt; use a fixed-point format for \
                     nonzero BER runs"
                        .into(),
                ));
            }
        }
        for &v in &self.energy.v_supply_list {
            self.dram.voltage.with_supply(v)?;
        }
        if self.selection.mu_grid.iter().chain(&self.selection.epsilon_grid).any(|&x| x < 0.0) {
            return Err(Error::InvalidConfig("mu/epsilon grids must be non-negative".into()));
        }
        Ok(())
    }

    /// The DRAM stack this config describes.
    pub fn stack(&self) -> DramStack {
        DramStack {
            geometry: self.dram.geometry,
            flip_probability: self.dram.flip_probability,
            mapping: self.dram.mapping,
            variant: self.dram.mapping_variant,
            ber_th: self.dram.ber_th,
            format: self.format,
            rounding: self.rounding,
        }
    }

    /// Supply voltage assumed for a BER operating point: the smallest mapped
    /// BER at or above the requested one.
    pub fn voltage_for_ber(&self, ber: f64) -> f64 {
        let mut points = self.selection.ber_voltage_map.clone();
        points.sort_by(|a, b| a.ber.partial_cmp(&b.ber).unwrap());
        for p in &points {
            if ber <= p.ber {
                return p.v_supply;
            }
        }
        points.last().map_or(1.025, |p| p.v_supply)
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
