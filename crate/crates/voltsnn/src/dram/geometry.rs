//! DRAM geometry, addressing, and the voltage-parametric energy model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts for every level of the DRAM hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramGeometry {
    pub n_channels: usize,
    pub n_ranks_per_channel: usize,
    pub n_chips_per_rank: usize,
    pub n_banks_per_chip: usize,
    pub n_subarrays_per_bank: usize,
    pub n_rows_per_subarray: usize,
    pub n_columns_per_row: usize,
    pub bytes_per_column: usize,
}

impl DramGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_channels", self.n_channels),
            ("n_ranks_per_channel", self.n_ranks_per_channel),
            ("n_chips_per_rank", self.n_chips_per_rank),
            ("n_banks_per_chip", self.n_banks_per_chip),
            ("n_subarrays_per_bank", self.n_subarrays_per_bank),
            ("n_rows_per_subarray", self.n_rows_per_subarray),
            ("n_columns_per_row", self.n_columns_per_row),
            ("bytes_per_column", self.bytes_per_column),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Reduced desk-scale geometry (1 MiB in one chip, 8 banks). Large
    /// enough that the error-aware policy can hold an N-100 FP32 model even
    /// when threshold-level sampling noise marks half the subarrays unsafe.
    pub fn desk_default() -> Self {
        Self {
            n_channels: 1,
            n_ranks_per_channel: 1,
            n_chips_per_rank: 1,
            n_banks_per_chip: 8,
            n_subarrays_per_bank: 4,
            n_rows_per_subarray: 512,
            n_columns_per_row: 64,
            bytes_per_column: 1,
        }
    }

    pub fn n_banks_total(&self) -> usize {
        self.n_channels * self.n_ranks_per_channel * self.n_chips_per_rank * self.n_banks_per_chip
    }

    pub fn n_subarrays_total(&self) -> usize {
        self.n_banks_total() * self.n_subarrays_per_bank
    }

    pub fn columns_per_bank(&self) -> u64 {
        self.n_subarrays_per_bank as u64 * self.n_rows_per_subarray as u64
            * self.n_columns_per_row as u64
    }

    /// Total byte capacity.
    pub fn capacity_bytes(&self) -> u64 {
        self.n_banks_total() as u64 * self.columns_per_bank() * self.bytes_per_column as u64
    }

    /// Bit-cells in one bank.
    pub fn bits_per_bank(&self) -> u64 {
        self.columns_per_bank() * self.bytes_per_column as u64 * 8
    }

    /// Bit-cells in one subarray.
    pub fn bits_per_subarray(&self) -> u64 {
        self.n_rows_per_subarray as u64
            * self.n_columns_per_row as u64
            * self.bytes_per_column as u64
            * 8
    }

    pub fn bank_linear(&self, addr: &DramAddress) -> usize {
        ((addr.channel * self.n_ranks_per_channel + addr.rank) * self.n_chips_per_rank
            + addr.chip)
            * self.n_banks_per_chip
            + addr.bank
    }

    pub fn subarray_linear(&self, addr: &DramAddress) -> usize {
        self.bank_linear(addr) * self.n_subarrays_per_bank + addr.subarray
    }

    /// Linear index of a bit-cell within its bank, subarray-major. Subarray
    /// ranges are contiguous, so per-subarray weak-cell counts reduce to a
    /// range query over sorted indices.
    pub fn cell_index_in_bank(&self, subarray: usize, row: usize, column: usize, bit: u32) -> u64 {
        let bits_per_col = self.bytes_per_column as u64 * 8;
        (((subarray as u64 * self.n_rows_per_subarray as u64 + row as u64)
            * self.n_columns_per_row as u64
            + column as u64)
            * bits_per_col)
            + bit as u64
    }

    pub fn validate_address(&self, addr: &DramAddress) -> Result<()> {
        let checks = [
            ("channel", addr.channel, self.n_channels),
            ("rank", addr.rank, self.n_ranks_per_channel),
            ("chip", addr.chip, self.n_chips_per_rank),
            ("bank", addr.bank, self.n_banks_per_chip),
            ("subarray", addr.subarray, self.n_subarrays_per_bank),
            ("row", addr.row, self.n_rows_per_subarray),
            ("column", addr.column, self.n_columns_per_row),
        ];
        for (dimension, index, bound) in checks {
            if index >= bound {
                return Err(Error::AddressOutOfBounds {
                    dimension,
                    index,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// One column location in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DramAddress {
    pub channel: usize,
    pub rank: usize,
    pub chip: usize,
    pub bank: usize,
    pub subarray: usize,
    pub row: usize,
    pub column: usize,
}

/// Row-buffer access condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessCondition {
    Hit,
    Miss,
    Conflict,
}

/// Supply voltage plus per-condition base energies and command timings.
///
/// Base energies and the scaling exponent are config inputs; only their
/// ordering and ratios carry meaning. Timings are voltage-independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VoltageConfig {
    pub v_nominal: f64,
    pub v_supply: f64,
    pub energy_exponent: f64,
    pub e_hit_nj: f64,
    pub e_miss_nj: f64,
    pub e_conflict_nj: f64,
    pub t_rcd_ns: f64,
    pub t_ras_ns: f64,
    pub t_rp_ns: f64,
    pub t_burst_ns: f64,
}

impl Default for VoltageConfig {
    fn default() -> Self {
        Self {
            v_nominal: 1.35,
            v_supply: 1.35,
            energy_exponent: 2.0,
            e_hit_nj: 4.0,
            e_miss_nj: 7.0,
            e_conflict_nj: 10.0,
            t_rcd_ns: 18.0,
            t_ras_ns: 42.0,
            t_rp_ns: 18.0,
            t_burst_ns: 10.0,
        }
    }
}

impl VoltageConfig {
    /// Default table at the given supply voltage.
    pub fn at_supply(v_supply: f64) -> Result<Self> {
        let cfg = Self {
            v_supply,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_supply(&self, v_supply: f64) -> Result<Self> {
        let cfg = Self { v_supply, ..*self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.025..=1.35).contains(&self.v_supply) {
            return Err(Error::InvalidConfig(format!(
                "v_supply {} outside 1.025..=1.35",
                self.v_supply
            )));
        }
        if !(self.e_hit_nj < self.e_miss_nj && self.e_miss_nj < self.e_conflict_nj) {
            return Err(Error::InvalidConfig(format!(
                "base energies must be ordered hit < miss < conflict, got {} / {} / {}",
                self.e_hit_nj, self.e_miss_nj, self.e_conflict_nj
            )));
        }
        for (name, v) in [
            ("v_nominal", self.v_nominal),
            ("t_rcd_ns", self.t_rcd_ns),
            ("t_ras_ns", self.t_ras_ns),
            ("t_rp_ns", self.t_rp_ns),
            ("t_burst_ns", self.t_burst_ns),
        ] {
            if v <= 0.0 || v.is_nan() {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Dimensionless energy factor `(v_supply / v_nominal)^exponent`.
    pub fn energy_scale(&self) -> f64 {
        (self.v_supply / self.v_nominal).powf(self.energy_exponent)
    }

    /// Per-access energy for a condition at this supply voltage.
    pub fn access_energy_nj(&self, condition: AccessCondition) -> f64 {
        let base = match condition {
            AccessCondition::Hit => self.e_hit_nj,
            AccessCondition::Miss => self.e_miss_nj,
            AccessCondition::Conflict => self.e_conflict_nj,
        };
        base * self.energy_scale()
    }

    /// Command time preceding the data burst for a condition.
    pub fn command_time_ns(&self, condition: AccessCondition) -> f64 {
        match condition {
            AccessCondition::Hit => 0.0,
            AccessCondition::Miss => self.t_rcd_ns,
            AccessCondition::Conflict => self.t_rp_ns + self.t_rcd_ns,
        }
    }
}
