//! Weak-cell generation and bit-flip injection.
//!
//! Bit errors follow a uniform random distribution across each bank: a
//! fraction `F` of bit-cells is weak, and on every injection event each
//! stored bit residing in a weak cell flips independently with probability
//! `P`. The effective bit error rate is `F * P`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dram::geometry::{DramAddress, DramGeometry};
use crate::dram::mapping::PhysicalLayout;
use crate::error::{Error, Result};
use crate::fixedpoint::QuantizedTensor;

/// Sampled set of unreliable bit-cells, sparse per bank.
#[derive(Debug, Clone)]
pub struct WeakCellMap {
    weak_fraction: f64,
    flip_probability: f64,
    seed: u64,
    geometry: DramGeometry,
    /// Sorted weak-cell indices (see `DramGeometry::cell_index_in_bank`),
    /// one vector per linear bank.
    banks: Vec<Vec<u64>>,
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::InvalidProbability { name, value });
    }
    Ok(())
}

/// Samples a weak-cell map: each bit-cell of each bank is weak independently
/// with probability `weak_fraction`. Identical inputs give identical maps.
pub fn generate_weak_cells(
    geometry: &DramGeometry,
    weak_fraction: f64,
    flip_probability: f64,
    seed: u64,
) -> Result<WeakCellMap> {
    geometry.validate()?;
    check_probability("weak_fraction", weak_fraction)?;
    check_probability("flip_probability", flip_probability)?;

    let n_banks = geometry.n_banks_total();
    let cells_per_bank = geometry.bits_per_bank();
    let mut banks = Vec::with_capacity(n_banks);
    for bank in 0..n_banks {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, &[bank as u64]));
        banks.push(sample_bernoulli_positions(
            &mut rng,
            cells_per_bank,
            weak_fraction,
        ));
    }
    Ok(WeakCellMap {
        weak_fraction,
        flip_probability,
        seed,
        geometry: *geometry,
        banks,
    })
}

/// Positions of an i.i.d. Bernoulli(p) process over `0..n`, via geometric
/// gap skipping so cost is proportional to the number of hits.
fn sample_bernoulli_positions<R: Rng>(rng: &mut R, n: u64, p: f64) -> Vec<u64> {
    let mut out = Vec::new();
    if p <= 0.0 {
        return out;
    }
    if p >= 1.0 {
        return (0..n).collect();
    }
    let log1m = (1.0 - p).ln();
    let mut pos: u64 = 0;
    loop {
        // number of failures before the next success
        let u: f64 = rng.random();
        let skip = (u.ln() / log1m).floor();
        if skip >= (n - pos) as f64 {
            break;
        }
        pos += skip as u64;
        out.push(pos);
        pos += 1;
        if pos >= n {
            break;
        }
    }
    out
}

impl WeakCellMap {
    pub fn weak_fraction(&self) -> f64 {
        self.weak_fraction
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn geometry(&self) -> &DramGeometry {
        &self.geometry
    }

    /// Nominal BER of the map, `F * P`.
    pub fn effective_ber(&self) -> f64 {
        self.weak_fraction * self.flip_probability
    }

    pub fn weak_cell_count(&self) -> u64 {
        self.banks.iter().map(|b| b.len() as u64).sum()
    }

    /// Whether the bit-cell at `cell` (see `cell_index_in_bank`) of the
    /// linearized bank is weak.
    pub fn is_weak(&self, bank_linear: usize, cell: u64) -> bool {
        self.banks[bank_linear].binary_search(&cell).is_ok()
    }

    /// Estimated BER of one subarray: weak cells over total cells, times P.
    pub fn subarray_ber(&self, addr_prefix: &DramAddress) -> Result<f64> {
        let g = &self.geometry;
        g.validate_address(&DramAddress {
            row: 0,
            column: 0,
            ..*addr_prefix
        })?;
        let bank = g.bank_linear(addr_prefix);
        let lo = g.cell_index_in_bank(addr_prefix.subarray, 0, 0, 0);
        let hi = lo + g.bits_per_subarray();
        let cells = &self.banks[bank];
        let start = cells.partition_point(|&c| c < lo);
        let end = cells.partition_point(|&c| c < hi);
        let weak = (end - start) as f64;
        Ok(weak / g.bits_per_subarray() as f64 * self.flip_probability)
    }

    /// Estimated BER for every subarray, indexed by `subarray_linear`.
    pub fn ber_table(&self) -> Vec<f64> {
        let g = &self.geometry;
        let mut table = Vec::with_capacity(g.n_subarrays_total());
        for ch in 0..g.n_channels {
            for ra in 0..g.n_ranks_per_channel {
                for cp in 0..g.n_chips_per_rank {
                    for ba in 0..g.n_banks_per_chip {
                        for su in 0..g.n_subarrays_per_bank {
                            let prefix = DramAddress {
                                channel: ch,
                                rank: ra,
                                chip: cp,
                                bank: ba,
                                subarray: su,
                                row: 0,
                                column: 0,
                            };
                            table.push(self.subarray_ber(&prefix).expect("in-bounds prefix"));
                        }
                    }
                }
            }
        }
        table
    }
}

/// One bit flip of one injection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskEntry {
    /// Index of the affected weight byte in the stored tensor.
    pub byte_index: usize,
    pub addr: DramAddress,
    /// Bit position within the column, `0..bytes_per_column * 8`.
    pub bit_in_column: u32,
}

/// The set of positions flipped by one injection event.
#[derive(Debug, Clone, Default)]
pub struct ErrorMask {
    pub flips: Vec<MaskEntry>,
}

impl ErrorMask {
    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    /// Diagnostic dump, one line per flipped bit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "byte_index,ch,ra,cp,ba,su,ro,co,bit")?;
        for e in &self.flips {
            let a = &e.addr;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                e.byte_index, a.channel, a.rank, a.chip, a.bank, a.subarray, a.row, a.column,
                e.bit_in_column
            )?;
        }
        Ok(())
    }
}

/// Draws the flips for one injection event: every stored bit in a weak cell
/// flips with probability P. Deterministic in `seed`.
pub fn sample_error_mask(
    layout: &PhysicalLayout,
    map: &WeakCellMap,
    seed: u64,
) -> Result<ErrorMask> {
    let g = map.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, &[0x6d61736b]));
    let mut flips = Vec::new();
    for (byte_index, slot) in layout.slots().iter().enumerate() {
        g.validate_address(&slot.addr)?;
        let bank = g.bank_linear(&slot.addr);
        let base_bit = slot.byte_in_column * 8;
        for bit in 0..8u32 {
            let cell = g.cell_index_in_bank(
                slot.addr.subarray,
                slot.addr.row,
                slot.addr.column,
                base_bit + bit,
            );
            if map.is_weak(bank, cell) && rng.random::<f64>() < map.flip_probability() {
                flips.push(MaskEntry {
                    byte_index,
                    addr: slot.addr,
                    bit_in_column: base_bit + bit,
                });
            }
        }
    }
    Ok(ErrorMask { flips })
}

/// Applies a mask to a stored tensor, flipping the listed bits.
pub fn apply_mask(tensor: &QuantizedTensor, layout: &PhysicalLayout, mask: &ErrorMask) -> Result<QuantizedTensor> {
    if layout.len() != tensor.byte_len() {
        return Err(Error::LayoutMismatch {
            layout_bytes: layout.len(),
            tensor_bytes: tensor.byte_len(),
        });
    }
    let mut out = tensor.clone();
    for e in &mask.flips {
        let slot = &layout.slots()[e.byte_index];
        let bit_in_byte = e.bit_in_column - slot.byte_in_column * 8;
        out.flip_bit(e.byte_index, bit_in_byte);
    }
    Ok(out)
}

/// Samples one injection event and applies it: bits stored in weak cells flip
/// with probability P, everything else is untouched.
pub fn inject_errors(
    tensor: &QuantizedTensor,
    layout: &PhysicalLayout,
    map: &WeakCellMap,
    seed: u64,
) -> Result<QuantizedTensor> {
    if layout.len() != tensor.byte_len() {
        return Err(Error::LayoutMismatch {
            layout_bytes: layout.len(),
            tensor_bytes: tensor.byte_len(),
        });
    }
    let mask = sample_error_mask(layout, map, seed)?;
    apply_mask(tensor, layout, &mask)
}
